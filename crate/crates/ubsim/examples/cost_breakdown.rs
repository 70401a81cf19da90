//! Per-component round-trip cost of a 64 B read on every stack.

use ubsim::costmodel::{roundtrip_decompose, CostParams};
use ubsim::wire::Opcode;
use ubsim::Stack;

fn main() {
    let p = CostParams::default();
    for stack in Stack::ALL {
        let verb = if stack == Stack::UbLdst { Opcode::Load } else { Opcode::Read };
        let d = roundtrip_decompose(stack, verb, 64, &p).expect("admissible");
        println!("{stack} {verb:?}");
        for c in &d.components {
            println!("  {:<24} {:>8.1} ns  {:?}", c.name, c.ns, c.phase);
        }
        println!("  modeled {:.1} ns, measured {:.1} ns\n", d.modeled_ns(), d.measured_ns());
    }
}
