//! Connection-state bytes as endpoints and remote peers grow.

use ubsim::state::{kb, mb, state_bytes_roce, state_bytes_ub};

fn main() {
    println!("{:>6} {:>14} {:>14} {:>10}", "n=m", "ub", "roce", "ratio");
    for n in [1u64, 16, 64, 256, 1024] {
        let ub = state_bytes_ub(n, n, false);
        let roce = state_bytes_roce(n, n);
        println!("{n:>6} {:>11.1} KB {:>11.1} MB {:>10.1}", kb(ub), mb(roce), roce as f64 / ub as f64);
    }
}
