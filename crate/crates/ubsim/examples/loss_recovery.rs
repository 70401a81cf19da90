//! Selective versus go-back-N retransmission under random loss.

use ubsim::costmodel::CostParams;
use ubsim::engine::loss::{loss_stream, LossConfig};

fn main() {
    let p = CostParams::default();
    for loss in [0.0, 0.01, 0.05] {
        let ub = loss_stream(&LossConfig::ub(&p, loss, 1));
        let roce = loss_stream(&LossConfig::roce(&p, loss, 1));
        println!(
            "loss {:>4.0}%  sack {:.3} Mops p99 {:>8.1} ns ({} rtx)  gbn {:.3} Mops p99 {:>8.1} ns ({} rtx)",
            loss * 100.0,
            ub.mops(),
            ub.p99(),
            ub.retransmits,
            roce.mops(),
            roce.p99(),
            roce.retransmits
        );
    }
}
