//! Run a registered experiment with a parameter override and print its CSV.

use ubsim::costmodel::CostParams;
use ubsim::harness::{run_table, REGISTRY};
use ubsim::rng::DEFAULT_SEED;

fn main() {
    let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
    println!("experiments: {}", names.join(", "));
    let mut p = CostParams::default();
    p.set("doorbell_mmio", "200").expect("known parameter");
    let t = run_table("headline", &p, &[], DEFAULT_SEED).expect("known experiment");
    print!("{}", t.to_csv());
}
