//! Write-back versus write-through caching in front of remote memory.

use ubsim::costmodel::{Access, CacheModel, CachePolicy, CostParams};

fn main() {
    let p = CostParams::default();
    for policy in CachePolicy::ALL {
        let mut cache = CacheModel::new(policy, &p);
        let mut total = 0.0;
        let accesses = 4000u64;
        for i in 0..accesses {
            // a hot set of 64 lines, every fourth access a write
            let addr = (i * 7919 % 64) * 64;
            let rw = if i % 4 == 0 { Access::Write } else { Access::Read };
            total += cache.cache_access(addr, rw).latency_ns;
        }
        println!("{:<13} mean {:>7.1} ns, writebacks {}", policy.name(), total / accesses as f64, cache.writebacks);
    }
}
