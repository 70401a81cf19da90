//! Op-stream generators for every evaluated workload, plus the analytical
//! contention and fan-out models that sit on top of the cost model.

mod swap;
mod zipf;

pub use swap::{swap_access, SwapOutcome, SwapProfile, SwapSim};
pub use zipf::Zipf;

use crate::costmodel::{roundtrip_decompose, CostParams};
use crate::ordering::ROCE_ORDER_NS;
use crate::rng::{substream, SimRng};
use crate::stack::{Family, Stack};
use crate::state::{spill_penalty, ContextCache};
use crate::transport::psn_sharing_delay_ns;
use crate::wire::{ExecTag, Opcode};
use rand::Rng;

/// One operation as the issuing application sees it. Read-type ops use
/// `Opcode::Read` and write-type ops `Opcode::Write`; the engine maps them
/// to LOAD/STORE on the load/store stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Op {
    pub verb: Opcode,
    pub addr: u64,
    pub payload: usize,
    pub jetty: u32,
    pub tag: ExecTag,
    pub fence: bool,
}

impl Op {
    pub fn new(verb: Opcode, addr: u64, payload: usize) -> Self {
        Op { verb, addr, payload, jetty: 0, tag: ExecTag::No, fence: false }
    }
}

pub const VALUE_BYTES: u64 = 64;
/// Lines the pointer chase revisits; small enough to stay in L1.
pub const HOT_LINES: u64 = 16;
const COLD_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSpec {
    /// 64 B loads; with probability `locality` the next pointer lands in a
    /// recently used line, otherwise in a line never touched before.
    PointerChase {
        locality: f64,
    },
    BulkRead {
        payload: usize,
    },
    BulkWrite {
        payload: usize,
    },
    BulkSend {
        payload: usize,
    },
    Pingpong,
    /// FAA 8 B on a shared counter.
    DistBarrier,
    CasLock {
        contenders: u32,
    },
    YcsbA {
        alpha: f64,
        keys: u64,
        get_fraction: f64,
    },
    ZipfRead {
        alpha: f64,
        keys: u64,
    },
    SeqScan {
        bytes: u64,
        stride: u64,
    },
    /// SEND fan-out over `targets` remote endpoints.
    M2n {
        targets: u32,
    },
    TpSharing {
        jetties: u32,
    },
    Mesh {
        nodes: u32,
    },
    ConnSetup {
        n: u32,
        m: u32,
    },
    /// 64 B reads of which `so_fraction` carry the strict-order tag, spread
    /// evenly through the stream.
    MixedOrder {
        so_fraction: f64,
    },
    /// Independent 64 B reads for open-loop drivers.
    Poisson {
        rate_mops: f64,
    },
}

impl WorkloadSpec {
    pub fn ycsb_a() -> Self {
        WorkloadSpec::YcsbA { alpha: 0.99, keys: 10_000, get_fraction: 0.5 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let frac = |x: f64| (0.0..=1.0).contains(&x);
        let ok = match *self {
            WorkloadSpec::PointerChase { locality } => frac(locality),
            WorkloadSpec::BulkRead { payload }
            | WorkloadSpec::BulkWrite { payload }
            | WorkloadSpec::BulkSend { payload } => payload > 0,
            WorkloadSpec::CasLock { contenders } => contenders >= 1,
            WorkloadSpec::YcsbA { alpha, keys, get_fraction } => alpha >= 0.0 && keys > 0 && frac(get_fraction),
            WorkloadSpec::ZipfRead { alpha, keys } => alpha >= 0.0 && keys > 0,
            WorkloadSpec::SeqScan { bytes, stride } => stride > 0 && bytes >= stride,
            WorkloadSpec::M2n { targets } => targets >= 1,
            WorkloadSpec::TpSharing { jetties } => jetties >= 1,
            WorkloadSpec::Mesh { nodes } => nodes >= 2,
            WorkloadSpec::ConnSetup { n, m } => n >= 1 && m >= 1,
            WorkloadSpec::MixedOrder { so_fraction } => frac(so_fraction),
            WorkloadSpec::Poisson { rate_mops } => rate_mops > 0.0,
            WorkloadSpec::Pingpong | WorkloadSpec::DistBarrier => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid workload {self:?}"))
        }
    }

    pub fn generate(&self, seed: u64) -> OpStream {
        let zipf = match *self {
            WorkloadSpec::YcsbA { alpha, keys, .. } | WorkloadSpec::ZipfRead { alpha, keys } => {
                Some(Zipf::new(keys, alpha, seed))
            }
            _ => None,
        };
        OpStream { spec: self.clone(), rng: substream(seed, "workload"), zipf, i: 0 }
    }
}

/// Deterministic, endless op iterator for one spec and seed.
pub struct OpStream {
    spec: WorkloadSpec,
    rng: SimRng,
    zipf: Option<Zipf>,
    i: u64,
}

impl Iterator for OpStream {
    type Item = Op;

    fn next(&mut self) -> Option<Op> {
        let i = self.i;
        self.i += 1;
        let op = match self.spec {
            WorkloadSpec::PointerChase { locality } => {
                let addr = if self.rng.random::<f64>() < locality {
                    self.rng.random_range(0..HOT_LINES) * VALUE_BYTES
                } else {
                    COLD_BASE + i * VALUE_BYTES
                };
                Op::new(Opcode::Read, addr, 64)
            }
            WorkloadSpec::BulkRead { payload } => Op::new(Opcode::Read, 0, payload),
            WorkloadSpec::BulkWrite { payload } => Op::new(Opcode::Write, 0, payload),
            WorkloadSpec::BulkSend { payload } => Op::new(Opcode::Send, 0, payload),
            WorkloadSpec::Pingpong => Op::new(Opcode::Send, 0, 64),
            WorkloadSpec::DistBarrier => Op::new(Opcode::Faa, 0, 8),
            WorkloadSpec::CasLock { .. } => Op::new(Opcode::Cas, 0, 8),
            WorkloadSpec::YcsbA { get_fraction, .. } => {
                let key = self.zipf.as_ref().unwrap().sample(&mut self.rng);
                let verb = if self.rng.random::<f64>() < get_fraction { Opcode::Read } else { Opcode::Write };
                Op::new(verb, key * VALUE_BYTES, VALUE_BYTES as usize)
            }
            WorkloadSpec::ZipfRead { .. } => {
                let key = self.zipf.as_ref().unwrap().sample(&mut self.rng);
                Op::new(Opcode::Read, key * VALUE_BYTES, VALUE_BYTES as usize)
            }
            WorkloadSpec::SeqScan { bytes, stride } => {
                Op::new(Opcode::Read, (i * stride) % (bytes / stride * stride), 64)
            }
            WorkloadSpec::M2n { targets } => {
                let t = (i % targets as u64) as u32;
                Op { jetty: t, ..Op::new(Opcode::Send, t as u64, 64) }
            }
            WorkloadSpec::TpSharing { jetties } => {
                Op { jetty: (i % jetties as u64) as u32, ..Op::new(Opcode::Write, 0, 64) }
            }
            WorkloadSpec::Mesh { nodes } => Op::new(Opcode::Read, i % (nodes as u64 - 1), 64),
            WorkloadSpec::ConnSetup { .. } => return None,
            WorkloadSpec::MixedOrder { so_fraction } => {
                // op i is strict iff the running count of strict ops steps here
                let so = ((i + 1) as f64 * so_fraction).floor() > (i as f64 * so_fraction).floor();
                let tag = if so { ExecTag::So } else { ExecTag::No };
                Op { tag, ..Op::new(Opcode::Read, 0, 64) }
            }
            WorkloadSpec::Poisson { .. } => Op::new(Opcode::Read, 0, 64),
        };
        Some(op)
    }
}

fn measured(stack: Stack, verb: Opcode, p: &CostParams) -> f64 {
    roundtrip_decompose(stack, verb, 64, p).expect("admissible verb").measured_ns()
}

/// Time for the last of `k` contenders to take a CAS lock: the attempts
/// serialize, so roughly K times one CAS. RoCE also pays the context spill
/// once K^2 QPs outgrow the NIC cache.
pub fn cas_time_to_acquire(k: u32, stack: Stack, p: &CostParams) -> f64 {
    assert!(k >= 1);
    let k64 = k as u64;
    let t_cas = measured(stack, Opcode::Cas, p) + spill_penalty(stack.family(), k64, k64);
    k as f64 * t_cas
}

/// Per-op SEND latency from one initiator to K targets.
pub fn m2n_latency(k: u32, stack: Stack, p: &CostParams) -> f64 {
    assert!(k >= 1);
    match stack.family() {
        // one TP channel pool plus hardware group dispatch: flat in K
        Family::Ub => measured(Stack::UbUrma, Opcode::Send, p),
        Family::Roce => {
            let dispatch = if k >= 2 { p.cpu_dispatch } else { 0.0 };
            measured(stack, Opcode::Send, p) + ROCE_ORDER_NS + dispatch + ContextCache::roce().spill_lookup(k as u64)
        }
    }
}

/// Calibrated so that N = M = 1024 lands on 17.04 s (RoCE) and 0.016 s (UB).
pub const ROCE_QP_SETUP_S: f64 = 17.04 / 1_048_576.0;
pub const UB_OBJECT_SETUP_S: f64 = 0.016 / 2048.0;

/// Control-plane bring-up time in seconds for N applications talking to M.
pub fn conn_setup_time(family: Family, n: u32, m: u32) -> f64 {
    assert!(n >= 1 && m >= 1);
    match family {
        Family::Roce => n as f64 * m as f64 * ROCE_QP_SETUP_S,
        Family::Ub => (n as f64 + m as f64) * UB_OBJECT_SETUP_S,
    }
}

/// Per-op latency in an N-node all-to-all mesh: the modeled two-node path,
/// a linear wire-share term, and the context spill.
pub fn mesh_latency(n: u32, family: Family, p: &CostParams) -> f64 {
    assert!(n >= 2);
    let (stack, verb) = match family {
        Family::Ub => (Stack::UbLdst, Opcode::Load),
        Family::Roce => (Stack::RoceDma, Opcode::Read),
    };
    let base = roundtrip_decompose(stack, verb, 64, p).unwrap().modeled_ns();
    let share = p.pipeline_interval.ub_ldst * (n - 1) as f64;
    base + share + spill_penalty(family, n as u64, n as u64)
}

/// UB READ latency with K Jetties serializing on one TP channel's PSN
/// allocator, and the per-QP RoCE reference it is compared with.
pub fn tp_sharing_latency(k: u32, p: &CostParams) -> (f64, f64) {
    let ub = measured(Stack::UbUrma, Opcode::Read, p) + psn_sharing_delay_ns(k);
    (ub, measured(Stack::RoceDma, Opcode::Read, p))
}

/// Smallest K at which the shared channel is slower than per-QP RoCE.
pub fn tp_sharing_crossover(p: &CostParams) -> u32 {
    (1..=1_000_000)
        .find(|&k| {
            let (ub, roce) = tp_sharing_latency(k, p);
            ub > roce
        })
        .unwrap_or(u32::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn deterministic_streams() {
        let spec = WorkloadSpec::ZipfRead { alpha: 0.99, keys: 65_536 };
        let a: Vec<_> = spec.generate(9).take(100).collect();
        let b: Vec<_> = spec.generate(9).take(100).collect();
        let c: Vec<_> = spec.generate(10).take(100).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn seq_scan_addresses() {
        let s = WorkloadSpec::SeqScan { bytes: 1 << 20, stride: 64 };
        let addrs: Vec<u64> = s.generate(1).take(4).map(|o| o.addr).collect();
        assert_eq!(addrs, vec![0, 64, 128, 192]);
        let wrapped = s.generate(1).nth(16_384).unwrap();
        assert_eq!(wrapped.addr, 0);
    }

    #[test]
    fn ycsb_get_fraction() {
        let n = 100_000;
        let gets = WorkloadSpec::ycsb_a().generate(3).take(n).filter(|o| o.verb == Opcode::Read).count();
        let f = gets as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn mixed_order_fraction_exact() {
        for f in [0.0, 0.25, 0.5, 1.0] {
            let so = WorkloadSpec::MixedOrder { so_fraction: f }
                .generate(1)
                .take(1000)
                .filter(|o| o.tag == ExecTag::So)
                .count();
            assert_eq!(so, (1000.0 * f) as usize);
        }
    }

    #[test]
    fn conn_setup_anchors() {
        assert_abs_diff_eq!(conn_setup_time(Family::Roce, 1024, 1024), 17.04, epsilon = 1e-12);
        assert_abs_diff_eq!(conn_setup_time(Family::Ub, 1024, 1024), 0.016, epsilon = 1e-12);
        assert_abs_diff_eq!(ROCE_QP_SETUP_S * 1e6, 16.25, epsilon = 0.05);
    }

    #[test]
    fn m2n_curve() {
        let p = CostParams::default();
        for k in [1, 2, 64, 1024] {
            assert_abs_diff_eq!(m2n_latency(k, Stack::UbUrma, &p), 804.6, epsilon = 0.05);
        }
        assert_abs_diff_eq!(m2n_latency(1, Stack::RoceDma, &p), 1780.8, epsilon = 0.05);
        assert_abs_diff_eq!(m2n_latency(2, Stack::RoceDma, &p), 1980.8, epsilon = 0.05);
        assert_abs_diff_eq!(m2n_latency(512, Stack::RoceDma, &p), 1980.8, epsilon = 0.05);
        assert_abs_diff_eq!(m2n_latency(1024, Stack::RoceDma, &p), 2980.8, epsilon = 0.05);
    }

    #[test]
    fn cas_contention() {
        let p = CostParams::default();
        assert_abs_diff_eq!(cas_time_to_acquire(1, Stack::UbUrma, &p), 750.6, epsilon = 0.05);
        let ub = cas_time_to_acquire(256, Stack::UbUrma, &p);
        let roce = cas_time_to_acquire(256, Stack::RoceDma, &p);
        assert!((ub / 192_000.0 - 1.0).abs() < 0.05, "{ub}");
        assert!((roce / 749_000.0 - 1.0).abs() < 0.05, "{roce}");
    }

    #[test]
    fn mesh_anchors() {
        let p = CostParams::default();
        assert!((mesh_latency(2, Family::Ub, &p) / 447.0 - 1.0).abs() < 0.02);
        assert!((mesh_latency(64, Family::Ub, &p) / 1997.0 - 1.0).abs() < 0.02);
        assert!((mesh_latency(64, Family::Roce, &p) / 4749.0 - 1.0).abs() < 0.02);
        assert!(mesh_latency(23, Family::Roce, &p) - mesh_latency(22, Family::Roce, &p) > 1000.0);
    }

    #[test]
    fn tp_sharing_is_linear() {
        let p = CostParams::default();
        let (a, _) = tp_sharing_latency(10, &p);
        let (b, _) = tp_sharing_latency(11, &p);
        assert_abs_diff_eq!(b - a, 5.0, epsilon = 1e-9);
        assert_eq!(tp_sharing_crossover(&p), 286);
    }
}
