//! The full configuration grid.
//!
//! Four link delays by four in-flight depths, each with:
//! READ and WRITE at seven payloads (8 B to 64 KB), SEND at six (no 64 KB
//! send), FAA and CAS at 8 B. That is 22 work-request configurations per
//! (delay, depth), 352 in all, each run on ub_urma, roce_bf, and roce_dma.
//!
//! LOAD adds 36 configurations on ub_ldst: 64 B, depth 1, at each delay,
//! under write-back and write-through at four localities plus uncached
//! (locality is meaningless without a cache).
//!
//! Excluded combinations: LOAD above 64 B (one cache line per load), LOAD
//! at depth above 1 (a dependent pointer chase), SEND at 64 KB, and
//! cache policy and locality on the work-request path, which never caches.

use super::experiments::{num, sim, verb_name};
use super::{Ctx, HarnessError, Table, Unit};
use crate::costmodel::CachePolicy;
use crate::engine::{run, CacheConfig, IssueModel};
use crate::stack::Stack;
use crate::wire::Opcode;
use crate::workloads::WorkloadSpec;

pub const COLUMNS: &[&str] = &["verb", "payload", "link_delay", "depth", "policy", "locality"];

pub const LINK_DELAYS: [f64; 4] = [50.0, 100.0, 200.0, 500.0];
pub const DEPTHS: [u32; 4] = [1, 4, 16, 64];
pub const GRID_PAYLOADS: [usize; 7] = [8, 64, 256, 1024, 4096, 16384, 65536];
pub const LOCALITIES: [f64; 4] = [0.0, 0.5, 0.8, 0.95];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub verb: Opcode,
    pub payload: usize,
    pub link_delay: f64,
    pub depth: u32,
    pub cache: Option<(CachePolicy, f64)>,
}

impl GridConfig {
    pub fn stacks(&self) -> &'static [Stack] {
        if self.verb == Opcode::Load {
            &[Stack::UbLdst]
        } else {
            &[Stack::UbUrma, Stack::RoceBf, Stack::RoceDma]
        }
    }

    fn workload(&self) -> WorkloadSpec {
        match self.verb {
            Opcode::Load => WorkloadSpec::PointerChase { locality: self.cache.map_or(0.0, |c| c.1) },
            Opcode::Read => WorkloadSpec::BulkRead { payload: self.payload },
            Opcode::Write => WorkloadSpec::BulkWrite { payload: self.payload },
            Opcode::Send => WorkloadSpec::BulkSend { payload: self.payload },
            Opcode::Faa => WorkloadSpec::DistBarrier,
            _ => WorkloadSpec::CasLock { contenders: 1 },
        }
    }
}

/// Every valid configuration, in a fixed order.
pub fn configs() -> Vec<GridConfig> {
    let mut out = Vec::new();
    for link_delay in LINK_DELAYS {
        for depth in DEPTHS {
            let mut push = |verb, payload| out.push(GridConfig { verb, payload, link_delay, depth, cache: None });
            for verb in [Opcode::Read, Opcode::Write, Opcode::Send] {
                for payload in GRID_PAYLOADS {
                    if !(verb == Opcode::Send && payload == 65536) {
                        push(verb, payload);
                    }
                }
            }
            push(Opcode::Faa, 8);
            push(Opcode::Cas, 8);
        }
        let mut caches: Vec<(CachePolicy, f64)> = Vec::new();
        for policy in [CachePolicy::WriteBack, CachePolicy::WriteThrough] {
            caches.extend(LOCALITIES.map(|l| (policy, l)));
        }
        caches.push((CachePolicy::Uncached, 0.0));
        for c in caches {
            out.push(GridConfig { verb: Opcode::Load, payload: 64, link_delay, depth: 1, cache: Some(c) });
        }
    }
    out
}

pub(super) fn run_grid(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = Table::new("grid", ctx.seed, COLUMNS);
    let ops = ctx.knob_u64("ops", 300)?;
    for g in configs() {
        for &s in g.stacks() {
            let mut c = sim(ctx, s, g.workload());
            c.ops = ops;
            c.link.delay_ns = g.link_delay;
            c.issue = IssueModel::Closed { depth: g.depth };
            c.cache = g.cache.map(|(p, _)| CacheConfig::new(p));
            let r = run(&c)?;
            let (policy, loc) = match g.cache {
                Some((p, l)) => (p.name().to_string(), if p == CachePolicy::Uncached { String::new() } else { num(l) }),
                None => (String::new(), String::new()),
            };
            let cells = [
                ("verb", verb_name(g.verb)),
                ("payload", g.payload.to_string()),
                ("link_delay", num(g.link_delay)),
                ("depth", g.depth.to_string()),
                ("policy", policy),
                ("locality", loc),
            ];
            t.push(s.name(), &cells, "mean", r.mean(), Unit::Ns);
            t.push(s.name(), &cells, "p99", r.p99(), Unit::Ns);
            t.push(s.name(), &cells, "throughput", r.goodput_ops() / 1e6, Unit::Mops);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_388_configs() {
        let c = configs();
        assert_eq!(c.len(), 388);
        assert!(!c.iter().any(|g| g.verb == Opcode::Load && g.payload > 64));
        assert!(!c.iter().any(|g| g.verb == Opcode::Send && g.payload == 65536));
    }
}
