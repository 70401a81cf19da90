//! Hint-based window control versus rate-based ECN control on one bottleneck.

use ubsim::congestion::{
    element_test, steady_state_utilisation, Bottleneck, CaqmParams, Controller, DcqcnParams, ElementTest,
};

fn main() {
    for ctrl in [Controller::Caqm(CaqmParams::default()), Controller::Dcqcn(DcqcnParams::default())] {
        let r = steady_state_utilisation(ctrl, Bottleneck::default(), 1);
        println!(
            "{:<6} utilisation {:.3}  marks {}  mean queue {:.1}",
            ctrl.name(),
            r.utilisation,
            r.marks,
            r.mean_queue
        );
    }
    let e = element_test(ElementTest::default());
    println!("element test: {}/{} packets marked, window {:?}", e.marked, e.packets, e.window_trace);
}
