//! Bidirectional latency accounting: every host to NIC traversal on both
//! sides of the wire, the load/store cache hierarchy, and the jitter model.

use crate::rng::SimRng;
use crate::stack::{Family, Stack};
use crate::wire::{flit_count, serialization_ns, Opcode};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{verb:?} is not admissible on {stack}")]
    InadmissibleVerb { stack: Stack, verb: Opcode },
    #[error("invalid cost parameter: {0}")]
    InvalidParam(String),
}

/// A per-stack-kind triple (the two RoCE stacks share one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerStack {
    pub ub_ldst: f64,
    pub ub_urma: f64,
    pub roce: f64,
}

impl PerStack {
    pub fn get(&self, s: Stack) -> f64 {
        match s {
            Stack::UbLdst => self.ub_ldst,
            Stack::UbUrma => self.ub_urma,
            Stack::RoceBf | Stack::RoceDma => self.roce,
        }
    }
}

/// All latency constants, in ns unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    pub verb_post: f64,
    pub wqe_construct: f64,
    pub doorbell_mmio: f64,
    pub dma_wqe_fetch: f64,
    pub pcie_dma_read: f64,
    pub pcie_dma_write: f64,
    pub dma_cqe_write: f64,
    pub cqe_poll_roce: f64,
    pub cqe_poll_ub: f64,
    pub verb_poll: f64,
    pub membus: f64,
    /// One-way link delay.
    pub wire_delay: f64,
    /// Gbps.
    pub wire_bandwidth: f64,
    pub dram_row_hit: f64,
    /// NIC pipeline depth per traversal, in cycles.
    pub nic_cycles: PerStack,
    pub cycle_ns: f64,
    /// Fixed per-op scheduling overhead added to the modeled total.
    pub sched_overhead: PerStack,
    pub sched_overhead_on: bool,
    /// Response NIC transmit saving when the response carries no read data.
    pub short_response_saving: PerStack,
    /// Receive-queue match for a SEND at the target.
    pub send_match: f64,
    /// Separate transaction-ack flit handling that the fused mode skips.
    pub ack_flit: f64,
    /// Software fan-out dispatch when a RoCE app talks to several QPs.
    pub cpu_dispatch: f64,
    /// NIC cycles per additional 64 B line of payload.
    pub line_cycles: f64,
    /// Sustained single-WR streaming bandwidth, Gbps.
    pub stream_gbps: f64,
    pub cache_hit: [f64; 3],
    pub local_dram: f64,
    /// NIC WR pipeline issue interval at saturation.
    pub pipeline_interval: PerStack,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            verb_post: 50.0,
            wqe_construct: 30.0,
            doorbell_mmio: 150.0,
            dma_wqe_fetch: 500.0,
            pcie_dma_read: 500.0,
            pcie_dma_write: 250.0,
            dma_cqe_write: 250.0,
            cqe_poll_roce: 70.0,
            cqe_poll_ub: 5.0,
            verb_poll: 30.0,
            membus: 30.0,
            wire_delay: 100.0,
            wire_bandwidth: 400.0,
            dram_row_hit: 30.0,
            nic_cycles: PerStack { ub_ldst: 8.0, ub_urma: 25.0, roce: 9.0 },
            cycle_ns: 3.106,
            sched_overhead: PerStack { ub_ldst: 80.0, ub_urma: 12.0, roce: 14.0 },
            sched_overhead_on: true,
            short_response_saving: PerStack { ub_ldst: 0.0, ub_urma: 7.0, roce: 9.0 },
            send_match: 54.0,
            ack_flit: 25.0,
            cpu_dispatch: 200.0,
            line_cycles: 8.0,
            stream_gbps: 15.0,
            cache_hit: [1.0, 4.0, 12.0],
            local_dram: 70.0,
            pipeline_interval: PerStack { ub_ldst: 8.0 * 3.106, ub_urma: 1e3 / 150.36, roce: 1e3 / 53.62 },
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let scalars = [
            ("verb_post", self.verb_post),
            ("wqe_construct", self.wqe_construct),
            ("doorbell_mmio", self.doorbell_mmio),
            ("dma_wqe_fetch", self.dma_wqe_fetch),
            ("pcie_dma_read", self.pcie_dma_read),
            ("pcie_dma_write", self.pcie_dma_write),
            ("dma_cqe_write", self.dma_cqe_write),
            ("cqe_poll_roce", self.cqe_poll_roce),
            ("cqe_poll_ub", self.cqe_poll_ub),
            ("verb_poll", self.verb_poll),
            ("membus", self.membus),
            ("wire_delay", self.wire_delay),
            ("dram_row_hit", self.dram_row_hit),
            ("cycle_ns", self.cycle_ns),
            ("send_match", self.send_match),
            ("ack_flit", self.ack_flit),
            ("cpu_dispatch", self.cpu_dispatch),
            ("line_cycles", self.line_cycles),
            ("local_dram", self.local_dram),
        ];
        for (k, v) in scalars {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CostError::InvalidParam(format!("{k} = {v}")));
            }
        }
        if !(self.wire_bandwidth > 0.0) || !(self.stream_gbps > 0.0) {
            return Err(CostError::InvalidParam("bandwidths must be positive".into()));
        }
        for (k, p) in [
            ("nic_cycles", self.nic_cycles),
            ("sched_overhead", self.sched_overhead),
            ("short_response_saving", self.short_response_saving),
            ("pipeline_interval", self.pipeline_interval),
        ] {
            if [p.ub_ldst, p.ub_urma, p.roce].iter().any(|v| !(*v >= 0.0)) {
                return Err(CostError::InvalidParam(format!("{k} has a negative entry")));
            }
        }
        Ok(())
    }

    /// One NIC pipeline traversal.
    pub fn nic_ns(&self, s: Stack) -> f64 {
        self.nic_cycles.get(s) * self.cycle_ns
    }

    pub fn overhead(&self, s: Stack) -> f64 {
        if self.sched_overhead_on {
            self.sched_overhead.get(s)
        } else {
            0.0
        }
    }

    /// Parse a TOML fragment of overrides on top of the defaults.
    pub fn from_toml(text: &str) -> Result<CostParams, CostError> {
        let p: CostParams = toml::from_str(text).map_err(|e| CostError::InvalidParam(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// Apply a `name=value` override; nested triples use `nic_cycles.roce` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CostError> {
        let bad = || CostError::InvalidParam(format!("{key}={value}"));
        if key == "sched_overhead_on" {
            self.sched_overhead_on = value.parse().map_err(|_| bad())?;
            return Ok(());
        }
        let v: f64 = value.parse().map_err(|_| bad())?;
        let triple = |p: &mut PerStack, sub: &str| -> Result<(), CostError> {
            match sub {
                "ub_ldst" => p.ub_ldst = v,
                "ub_urma" => p.ub_urma = v,
                "roce" => p.roce = v,
                _ => return Err(bad()),
            }
            Ok(())
        };
        match key.split_once('.') {
            Some(("nic_cycles", sub)) => triple(&mut self.nic_cycles, sub)?,
            Some(("sched_overhead", sub)) => triple(&mut self.sched_overhead, sub)?,
            Some(("short_response_saving", sub)) => triple(&mut self.short_response_saving, sub)?,
            Some(("pipeline_interval", sub)) => triple(&mut self.pipeline_interval, sub)?,
            Some(("cache_hit", lvl)) => {
                let i: usize = lvl.parse().map_err(|_| bad())?;
                *self.cache_hit.get_mut(i).ok_or_else(bad)? = v;
            }
            Some(_) => return Err(bad()),
            None => {
                let slot = match key {
                    "verb_post" => &mut self.verb_post,
                    "wqe_construct" => &mut self.wqe_construct,
                    "doorbell_mmio" => &mut self.doorbell_mmio,
                    "dma_wqe_fetch" => &mut self.dma_wqe_fetch,
                    "pcie_dma_read" => &mut self.pcie_dma_read,
                    "pcie_dma_write" => &mut self.pcie_dma_write,
                    "dma_cqe_write" => &mut self.dma_cqe_write,
                    "cqe_poll_roce" => &mut self.cqe_poll_roce,
                    "cqe_poll_ub" => &mut self.cqe_poll_ub,
                    "verb_poll" => &mut self.verb_poll,
                    "membus" => &mut self.membus,
                    "wire_delay" => &mut self.wire_delay,
                    "wire_bandwidth" => &mut self.wire_bandwidth,
                    "dram_row_hit" => &mut self.dram_row_hit,
                    "cycle_ns" => &mut self.cycle_ns,
                    "send_match" => &mut self.send_match,
                    "ack_flit" => &mut self.ack_flit,
                    "cpu_dispatch" => &mut self.cpu_dispatch,
                    "line_cycles" => &mut self.line_cycles,
                    "stream_gbps" => &mut self.stream_gbps,
                    "local_dram" => &mut self.local_dram,
                    _ => return Err(bad()),
                };
                *slot = v;
            }
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    InitiatorPre,
    WireForward,
    Target,
    WireBack,
    InitiatorPost,
}

/// What a component physically is; decides jitter and resource sharing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostClass {
    Software,
    Pcie,
    Membus,
    Nic,
    Dram,
    Wire,
}

impl CostClass {
    pub fn jittered(self) -> bool {
        matches!(self, CostClass::Pcie | CostClass::Wire)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: &'static str,
    pub phase: Phase,
    pub class: CostClass,
    /// Paid by the initiator host (CPU or host-side PCIe), as opposed to
    /// the NIC, the wire, or the target.
    pub host_side: bool,
    pub ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub stack: Stack,
    pub verb: Opcode,
    pub payload: usize,
    pub components: Vec<Component>,
    pub overhead_ns: f64,
}

impl Decomposition {
    pub fn modeled_ns(&self) -> f64 {
        self.components.iter().map(|c| c.ns).sum()
    }

    /// Modeled total plus the fixed scheduling overhead.
    pub fn measured_ns(&self) -> f64 {
        self.modeled_ns() + self.overhead_ns
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.name == name).map(|c| c.ns)
    }

    /// Busy time of the initiator host path: everything the host CPU and
    /// its PCIe link spend on the op, plus the scheduling overhead.
    pub fn host_path_ns(&self) -> f64 {
        self.components.iter().filter(|c| c.host_side).map(|c| c.ns).sum::<f64>() + self.overhead_ns
    }

    fn push(&mut self, name: &'static str, phase: Phase, class: CostClass, host_side: bool, ns: f64) {
        self.components.push(Component { name, phase, class, host_side, ns });
    }
}

/// Options that change the path beyond stack, verb, and payload.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathOptions {
    /// Transport and transaction acks share one flit (lightweight reliable mode).
    pub fused_ack: bool,
}

/// Verbs each stack executes natively. The load/store stack runs READ as a LOAD.
pub fn admissible(stack: Stack, verb: Opcode) -> bool {
    match stack {
        Stack::UbLdst => matches!(verb, Opcode::Load | Opcode::Store | Opcode::Read),
        _ => matches!(verb, Opcode::Read | Opcode::Write | Opcode::Send) || verb.is_atomic(),
    }
}

/// For a headline table cell: the stack that actually executes `verb`. The
/// load/store column runs WR-path verbs through the Jetty path.
pub fn route(stack: Stack, verb: Opcode) -> Stack {
    if stack == Stack::UbLdst && !admissible(stack, verb) {
        Stack::UbUrma
    } else {
        stack
    }
}

pub fn roundtrip_decompose(
    stack: Stack,
    verb: Opcode,
    payload: usize,
    p: &CostParams,
) -> Result<Decomposition, CostError> {
    decompose_with(stack, verb, payload, p, PathOptions::default())
}

pub fn decompose_with(
    stack: Stack,
    verb: Opcode,
    payload: usize,
    p: &CostParams,
    opts: PathOptions,
) -> Result<Decomposition, CostError> {
    use CostClass::*;
    use Phase::*;
    if !admissible(stack, verb) {
        return Err(CostError::InadmissibleVerb { stack, verb });
    }
    let ldst = stack == Stack::UbLdst;
    let ub = stack.family() == Family::Ub;
    let wr = !ldst;
    let reads_data = matches!(verb, Opcode::Read | Opcode::Load);
    let returns_data = reads_data || verb.is_atomic();
    let nic = p.nic_ns(stack);
    let on = |b: bool, v: f64| if b { v } else { 0.0 };

    let mut d =
        Decomposition { stack, verb, payload, components: Vec::with_capacity(20), overhead_ns: p.overhead(stack) };
    d.push("verb_post", InitiatorPre, Software, true, on(wr, p.verb_post));
    d.push("wqe_construct", InitiatorPre, Software, true, on(wr, p.wqe_construct));
    d.push("doorbell_mmio", InitiatorPre, Pcie, true, on(!ub, p.doorbell_mmio));
    d.push("dma_wqe_fetch", InitiatorPre, Pcie, true, on(stack == Stack::RoceDma, p.dma_wqe_fetch));
    d.push("submit_membus", InitiatorPre, Membus, true, on(ub, p.membus));
    d.push("nic_tx", InitiatorPre, Nic, false, nic);
    d.push("wire_forward", WireForward, Wire, false, p.wire_delay);
    d.push("nic_rx", Target, Nic, false, nic);
    let target_dram = if ub {
        p.membus
    } else if reads_data {
        p.pcie_dma_read
    } else {
        p.pcie_dma_write
    };
    d.push("target_nic_dram", Target, if ub { Membus } else { Pcie }, false, target_dram);
    d.push("target_dram_row", Target, Dram, false, p.dram_row_hit);
    if verb == Opcode::Send {
        d.push("recv_match", Target, Software, false, p.send_match);
    }
    let mut tx_resp = nic - on(!reads_data, p.short_response_saving.get(stack));
    if opts.fused_ack && stack == Stack::UbUrma {
        tx_resp -= p.ack_flit;
    }
    d.push("nic_tx_resp", Target, Nic, false, tx_resp.max(0.0));
    d.push("wire_back", WireBack, Wire, false, p.wire_delay);
    d.push("nic_rx_resp", InitiatorPost, Nic, false, nic);
    d.push("init_resp_dma", InitiatorPost, Pcie, true, on(!ub && returns_data, p.pcie_dma_write));
    d.push("dma_cqe_write", InitiatorPost, Pcie, true, on(!ub, p.dma_cqe_write));
    d.push("complete_membus", InitiatorPost, Membus, true, on(ub, p.membus));
    let poll = match stack.family() {
        Family::Ub => on(wr, p.cqe_poll_ub),
        Family::Roce => p.cqe_poll_roce,
    };
    d.push("cqe_poll", InitiatorPost, Software, true, poll);
    d.push("verb_poll", InitiatorPost, Software, true, on(wr, p.verb_poll));

    if payload > 64 {
        let extra_lines = payload.div_ceil(64) - 1;
        let extra_flits = flit_count(verb, payload) - flit_count(verb, 64);
        let phase = if reads_data { WireBack } else { WireForward };
        d.push("payload_pipeline", phase, Nic, false, extra_lines as f64 * p.line_cycles * p.cycle_ns);
        d.push("payload_serialization", phase, Wire, false, serialization_ns(extra_flits, p.wire_bandwidth));
        let floor = payload as f64 * 8.0 / p.stream_gbps;
        let excess = (floor - d.measured_ns()).max(0.0);
        d.push("stream_floor", phase, Nic, false, excess);
    }
    Ok(d)
}

/// The per-side table rows, for one stack's READ at 64 B.
pub const PER_SIDE_ROWS: [&str; 18] = [
    "verb_post",
    "wqe_construct",
    "doorbell_mmio",
    "dma_wqe_fetch",
    "submit_membus",
    "nic_tx",
    "wire_forward",
    "nic_rx",
    "target_nic_dram",
    "target_dram_row",
    "nic_tx_resp",
    "wire_back",
    "nic_rx_resp",
    "init_resp_dma",
    "dma_cqe_write",
    "complete_membus",
    "cqe_poll",
    "verb_poll",
];

/// Measured-equivalent READ minus WRITE on a stack.
pub fn verb_direction_delta(stack: Stack, p: &CostParams) -> f64 {
    let (r, w) = match stack {
        Stack::UbLdst => (Opcode::Load, Opcode::Store),
        _ => (Opcode::Read, Opcode::Write),
    };
    let m = |v| roundtrip_decompose(stack, v, 64, p).unwrap().measured_ns();
    m(r) - m(w)
}

/// Throughput of a lossy coherent fabric that resets on every loss event.
pub fn coherent_fabric_overlay(loss_rate: f64, t_base_ns: f64, t_reset_ns: f64) -> f64 {
    1e9 / (t_base_ns + loss_rate * t_reset_ns)
}

/// Remote miss through the cache fill path; the line returns into the
/// hierarchy instead of through the completion crossing.
pub fn cacheable_miss_ns(p: &CostParams) -> f64 {
    roundtrip_decompose(Stack::UbLdst, Opcode::Load, 64, p).unwrap().measured_ns() - p.membus
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    WriteBack,
    WriteThrough,
    Uncached,
}

impl CachePolicy {
    pub const ALL: [CachePolicy; 3] = [CachePolicy::WriteBack, CachePolicy::WriteThrough, CachePolicy::Uncached];

    pub fn name(self) -> &'static str {
        match self {
            CachePolicy::WriteBack => "wb",
            CachePolicy::WriteThrough => "wt",
            CachePolicy::Uncached => "uc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Fully-associative LRU set of keys.
#[derive(Debug, Clone, Default)]
pub struct Lru {
    capacity: usize,
    stamp: u64,
    by_key: HashMap<u64, u64>,
    by_stamp: BTreeMap<u64, u64>,
}

impl Lru {
    pub fn new(capacity: usize) -> Self {
        Lru { capacity, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.by_key.contains_key(&key)
    }

    /// Mark `key` most recently used. Returns true if it was present.
    pub fn touch(&mut self, key: u64) -> bool {
        match self.by_key.get_mut(&key) {
            Some(s) => {
                self.by_stamp.remove(s);
                self.stamp += 1;
                *s = self.stamp;
                self.by_stamp.insert(self.stamp, key);
                true
            }
            None => false,
        }
    }

    /// Insert as most recently used; returns the evicted key, if any.
    pub fn insert(&mut self, key: u64) -> Option<u64> {
        if self.capacity == 0 {
            return Some(key);
        }
        if self.touch(key) {
            return None;
        }
        let mut evicted = None;
        if self.by_key.len() >= self.capacity {
            let (&s, &k) = self.by_stamp.iter().next().unwrap();
            self.by_stamp.remove(&s);
            self.by_key.remove(&k);
            evicted = Some(k);
        }
        self.stamp += 1;
        self.by_key.insert(key, self.stamp);
        self.by_stamp.insert(self.stamp, key);
        evicted
    }

    pub fn remove(&mut self, key: u64) -> bool {
        match self.by_key.remove(&key) {
            Some(s) => {
                self.by_stamp.remove(&s);
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    L1,
    L2,
    Llc,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheOutcome {
    pub level: Level,
    pub latency_ns: f64,
    pub hit: bool,
}

pub const LINE_BYTES: u64 = 64;
pub const CACHE_LINES: [usize; 3] = [32, 128, 512];

/// L1/L2/LLC, each a fully-associative LRU, in front of remote memory.
#[derive(Debug, Clone)]
pub struct CacheModel {
    pub policy: CachePolicy,
    levels: [Lru; 3],
    hit_ns: [f64; 3],
    pub miss_ns: f64,
    pub writebacks: u64,
    dirty: std::collections::HashSet<u64>,
}

impl CacheModel {
    pub fn new(policy: CachePolicy, p: &CostParams) -> Self {
        Self::with_capacity(policy, p, CACHE_LINES)
    }

    pub fn with_capacity(policy: CachePolicy, p: &CostParams, lines: [usize; 3]) -> Self {
        CacheModel {
            policy,
            levels: [Lru::new(lines[0]), Lru::new(lines[1]), Lru::new(lines[2])],
            hit_ns: p.cache_hit,
            miss_ns: cacheable_miss_ns(p),
            writebacks: 0,
            dirty: Default::default(),
        }
    }

    fn fill(&mut self, line: u64, upto: usize) {
        for i in 0..upto {
            if let Some(ev) = self.levels[i].insert(line) {
                // inclusive hierarchy: only the last level's victims leave
                if i == 2 && self.dirty.remove(&ev) {
                    self.writebacks += 1;
                }
            }
        }
    }

    pub fn cache_access(&mut self, addr: u64, rw: Access) -> CacheOutcome {
        let line = addr / LINE_BYTES;
        if self.policy == CachePolicy::Uncached {
            return CacheOutcome { level: Level::Remote, latency_ns: self.miss_ns, hit: false };
        }
        let found = (0..3).find(|&i| self.levels[i].contains(line));
        let (level, mut latency, hit) = match found {
            Some(i) => {
                self.levels[i].touch(line);
                self.fill(line, i);
                ([Level::L1, Level::L2, Level::Llc][i], self.hit_ns[i], true)
            }
            None => {
                self.fill(line, 3);
                (Level::Remote, self.miss_ns, false)
            }
        };
        if rw == Access::Write {
            match self.policy {
                CachePolicy::WriteBack => {
                    self.dirty.insert(line);
                }
                // the store is not done until the remote write lands
                CachePolicy::WriteThrough => latency = self.miss_ns,
                CachePolicy::Uncached => unreachable!(),
            }
        }
        CacheOutcome { level, latency_ns: latency, hit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JitterModel {
    pub factor: f64,
}

impl JitterModel {
    /// Extra latency for one component: exponential with mean factor x base
    /// on wire and PCIe components, zero on chip.
    pub fn sample_jitter(&self, rng: &mut SimRng, class: CostClass, base_ns: f64) -> f64 {
        if self.factor <= 0.0 || !class.jittered() || base_ns <= 0.0 {
            return 0.0;
        }
        Exp::new(1.0 / (self.factor * base_ns)).unwrap().sample(rng)
    }
}

/// Uniform draw helper kept here so callers need not import `rand`.
pub fn uniform(rng: &mut SimRng) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(stack: Stack, verb: Opcode) -> f64 {
        roundtrip_decompose(stack, verb, 64, &CostParams::default()).unwrap().measured_ns()
    }

    #[test]
    fn per_side_totals() {
        let p = CostParams::default();
        let d = roundtrip_decompose(Stack::UbLdst, Opcode::Load, 64, &p).unwrap();
        assert_abs_diff_eq!(d.modeled_ns(), 419.392, epsilon = 1e-9);
        assert_abs_diff_eq!(d.measured_ns(), 499.392, epsilon = 1e-9);
        let d = roundtrip_decompose(Stack::UbUrma, Opcode::Read, 64, &p).unwrap();
        assert_abs_diff_eq!(d.modeled_ns(), 745.6, epsilon = 1e-9);
        assert_abs_diff_eq!(d.measured_ns(), 757.6, epsilon = 1e-9);
        let d = roundtrip_decompose(Stack::RoceDma, Opcode::Read, 64, &p).unwrap();
        assert_abs_diff_eq!(d.modeled_ns(), 2171.816, epsilon = 1e-9);
        assert_abs_diff_eq!(d.measured_ns(), 2185.816, epsilon = 1e-9);
        let names: Vec<_> = d.components.iter().map(|c| c.name).collect();
        assert_eq!(names, PER_SIDE_ROWS);
    }

    #[test]
    fn read_maps_to_load_on_ldst() {
        assert_eq!(m(Stack::UbLdst, Opcode::Read), m(Stack::UbLdst, Opcode::Load));
    }

    #[test]
    fn headline_cells() {
        let cells = [
            (Stack::UbUrma, Opcode::Write, 750.6),
            (Stack::RoceBf, Opcode::Write, 1176.8),
            (Stack::RoceDma, Opcode::Write, 1676.8),
            (Stack::UbUrma, Opcode::Send, 804.6),
            (Stack::RoceBf, Opcode::Send, 1230.8),
            (Stack::RoceDma, Opcode::Send, 1730.8),
            (Stack::UbUrma, Opcode::Faa, 750.6),
            (Stack::RoceBf, Opcode::Faa, 1426.8),
            (Stack::RoceDma, Opcode::Cas, 1926.8),
            (Stack::RoceBf, Opcode::Read, 1685.8),
        ];
        for (s, v, want) in cells {
            assert_abs_diff_eq!(m(s, v), want, epsilon = 0.05);
        }
    }

    #[test]
    fn inadmissible() {
        let p = CostParams::default();
        assert!(roundtrip_decompose(Stack::UbLdst, Opcode::Write, 64, &p).is_err());
        assert!(roundtrip_decompose(Stack::RoceDma, Opcode::Load, 64, &p).is_err());
        assert_eq!(route(Stack::UbLdst, Opcode::Cas), Stack::UbUrma);
        assert_eq!(route(Stack::UbLdst, Opcode::Load), Stack::UbLdst);
    }

    #[test]
    fn direction_deltas() {
        let p = CostParams::default();
        assert_abs_diff_eq!(verb_direction_delta(Stack::RoceDma, &p), 509.0, epsilon = 0.01);
        assert_abs_diff_eq!(verb_direction_delta(Stack::UbUrma, &p), 7.0, epsilon = 0.01);
        assert_eq!(verb_direction_delta(Stack::UbLdst, &p), 0.0);
    }

    #[test]
    fn link_delay_slope_is_two() {
        for s in Stack::ALL {
            let v = if s == Stack::UbLdst { Opcode::Load } else { Opcode::Read };
            let mut p = CostParams::default();
            let a = roundtrip_decompose(s, v, 64, &p).unwrap().measured_ns();
            p.wire_delay += 37.0;
            let b = roundtrip_decompose(s, v, 64, &p).unwrap().measured_ns();
            assert_abs_diff_eq!(b - a, 74.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fused_ack_saves_constant() {
        let p = CostParams::default();
        for payload in [64, 4096, 65536] {
            let a = decompose_with(Stack::UbUrma, Opcode::Read, payload, &p, PathOptions::default()).unwrap();
            let b = decompose_with(Stack::UbUrma, Opcode::Read, payload, &p, PathOptions { fused_ack: true }).unwrap();
            if payload < 16384 {
                assert_abs_diff_eq!(a.measured_ns() - b.measured_ns(), 25.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn coherent_overlay() {
        assert_abs_diff_eq!(coherent_fabric_overlay(0.0, 500.0, 1e6), 2e6, epsilon = 1e-6);
        // the formula gives 1 / 10.5 us at one loss per hundred ops
        let r = coherent_fabric_overlay(1e-2, 500.0, 1e6);
        assert_abs_diff_eq!(r, 1e9 / 10_500.0, epsilon = 1e-6);
        assert_eq!(coherent_fabric_overlay(0.3, 500.0, 0.0), 2e6);
    }

    #[test]
    fn payload_components_sum() {
        let p = CostParams::default();
        for payload in [8, 64, 65, 4096, 16384, 65536] {
            let d = roundtrip_decompose(Stack::RoceDma, Opcode::Read, payload, &p).unwrap();
            let s: f64 = d.components.iter().map(|c| c.ns).sum();
            assert_eq!(s, d.modeled_ns());
            assert!(d.measured_ns() + 1e-9 >= payload as f64 * 8.0 / p.stream_gbps);
        }
    }

    #[test]
    fn lru_evicts_oldest() {
        let mut l = Lru::new(2);
        assert_eq!(l.insert(1), None);
        assert_eq!(l.insert(2), None);
        l.touch(1);
        assert_eq!(l.insert(3), Some(2));
        assert!(l.contains(1) && l.contains(3));
    }

    #[test]
    fn cache_levels() {
        let p = CostParams::default();
        let mut c = CacheModel::new(CachePolicy::WriteBack, &p);
        let miss = c.cache_access(0, Access::Read);
        assert_eq!(miss.level, Level::Remote);
        assert_abs_diff_eq!(miss.latency_ns, 469.392, epsilon = 1e-9);
        assert_eq!(c.cache_access(8, Access::Read).level, Level::L1);
        for a in 1..=40u64 {
            c.cache_access(a * 64, Access::Read);
        }
        assert_eq!(c.cache_access(0, Access::Read).level, Level::L2);
        let mut u = CacheModel::new(CachePolicy::Uncached, &p);
        u.cache_access(0, Access::Read);
        assert_eq!(u.cache_access(0, Access::Read).level, Level::Remote);
        let mut wt = CacheModel::new(CachePolicy::WriteThrough, &p);
        wt.cache_access(0, Access::Read);
        assert_eq!(wt.cache_access(0, Access::Write).latency_ns, wt.miss_ns);
    }

    #[test]
    fn jitter_only_on_wire_and_pcie() {
        let mut rng = crate::rng::substream(1, "j");
        let j = JitterModel { factor: 0.2 };
        assert_eq!(j.sample_jitter(&mut rng, CostClass::Membus, 30.0), 0.0);
        assert_eq!(j.sample_jitter(&mut rng, CostClass::Nic, 30.0), 0.0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| j.sample_jitter(&mut rng, CostClass::Wire, 100.0)).sum::<f64>() / n as f64;
        assert!((mean - 20.0).abs() < 0.3, "{mean}");
        assert_eq!(JitterModel { factor: 0.0 }.sample_jitter(&mut rng, CostClass::Wire, 100.0), 0.0);
    }

    #[test]
    fn overrides() {
        let mut p = CostParams::default();
        p.set("wire_delay", "250").unwrap();
        p.set("nic_cycles.roce", "10").unwrap();
        assert_eq!(p.wire_delay, 250.0);
        assert_eq!(p.nic_cycles.roce, 10.0);
        assert!(p.set("nope", "1").is_err());
        assert!(p.set("membus", "-1").is_err());
        let q = CostParams::from_toml("wire_delay = 50.0\n[nic_cycles]\nub_ldst = 8.0\nub_urma = 25.0\nroce = 12.0\n")
            .unwrap();
        assert_eq!(q.wire_delay, 50.0);
        assert_eq!(q.nic_cycles.roce, 12.0);
        assert!(CostParams::from_toml("bogus = 1").is_err());
    }
}
