//! Jetties sharing one transport: a stalled jetty holds only its own ops.

use ubsim::engine::{run, Arrivals, IssueModel, SimConfig};
use ubsim::workloads::WorkloadSpec;
use ubsim::Stack;

fn main() {
    for stalled in [vec![], vec![0]] {
        let mut c = SimConfig::new(Stack::UbUrma, WorkloadSpec::TpSharing { jetties: 4 });
        c.ops = 2000;
        c.issue = IssueModel::OpenLoop { rate_mops: 0.5, arrivals: Arrivals::Paced };
        c.stalled_jetties = stalled.clone();
        let r = run(&c).expect("valid config");
        let means: Vec<String> = r.jetty_mean.iter().map(|(j, m)| format!("{j}:{m:.1}")).collect();
        println!("stalled {stalled:?}: held {} ops, per-jetty mean ns {}", r.held, means.join(" "));
    }
}
