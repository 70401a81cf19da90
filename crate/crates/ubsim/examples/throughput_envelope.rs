//! Closed-loop concurrency sweep and open-loop latency envelope.

use ubsim::engine::{open_loop_envelope, run, sweep_concurrency, Arrivals, SimConfig};
use ubsim::workloads::WorkloadSpec;
use ubsim::Stack;

fn main() {
    for (stack, wl) in [
        (Stack::UbLdst, WorkloadSpec::PointerChase { locality: 0.0 }),
        (Stack::RoceDma, WorkloadSpec::BulkRead { payload: 64 }),
    ] {
        let mut c = SimConfig::new(stack, wl);
        c.ops = 5000;
        let unloaded = run(&c).expect("valid config").p50();
        let curve = sweep_concurrency(&c, &[1, 2, 4, 8, 16]).expect("valid config");
        let mops: Vec<String> = curve.iter().map(|(d, r)| format!("{d}:{:.3}", r / 1e6)).collect();
        println!("{stack} unloaded p50 {unloaded:.1} ns, Mops by depth {}", mops.join(" "));
        let rates: Vec<f64> = (1..=12).map(|i| i as f64 * 0.25).collect();
        let env = open_loop_envelope(&c, &rates, Arrivals::Paced).expect("valid config");
        for p in &env.points {
            println!(
                "  offered {:.2} achieved {:.3} p50 {:>9.1} p99 {:>9.1}",
                p.offered_mops, p.achieved_mops, p.p50, p.p99
            );
        }
        println!("  knee {:?}", env.knee);
    }
}
