//! Deterministic two-node discrete-event core. An op is issued by the
//! application, passes its Jetty's ordering gate, queues FIFO at the shared
//! servers on its path (issuing core, host path, NIC pipeline), then pays its
//! cost-model path plus sampled jitter.

pub mod link;
pub mod loss;
pub mod queue;

pub use link::{link_transmit, LinkConfig, LinkOutcome};
pub use queue::{ns_to_ticks, ticks_to_ns, EventQueue, Tick};

use crate::costmodel::{
    decompose_with, route, Access, CacheModel, CachePolicy, Component, CostClass, CostParams, JitterModel, Level,
    PathOptions, CACHE_LINES,
};
use crate::ordering::{gating_delay_ns, Gate, JettyOrderState, OrderingMode};
use crate::rng::{substream, SimRng, DEFAULT_SEED};
use crate::stack::{Family, Stack};
use crate::state::ContextCache;
use crate::transport::DEFAULT_RTO_MULTIPLIER;
use crate::wire::{flit_count, ExecTag, Opcode, ServiceMode};
use crate::workloads::{Op, OpStream, WorkloadSpec};
use rand_distr::{Distribution, Exp};
use std::collections::{BTreeMap, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

/// Give up on an op after this many retransmissions.
pub const MAX_RETRIES: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrivals {
    /// Constant inter-arrival gap.
    Paced,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IssueModel {
    /// `depth` independent ops kept in flight.
    Closed { depth: u32 },
    /// One application core serving `clients` closed-loop clients; every op
    /// holds the core until it completes.
    SyncCore { clients: u32 },
    /// Arrivals independent of completions. A native load or store blocks
    /// the issuing core for its whole latency.
    OpenLoop { rate_mops: f64, arrivals: Arrivals },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheConfig {
    pub policy: CachePolicy,
    pub lines: [usize; 3],
}

impl CacheConfig {
    pub fn new(policy: CachePolicy) -> Self {
        CacheConfig { policy, lines: CACHE_LINES }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub stack: Stack,
    pub params: CostParams,
    pub link: LinkConfig,
    /// Load/store-path cache; `None` sends every access over the wire.
    pub cache: Option<CacheConfig>,
    pub workload: WorkloadSpec,
    pub issue: IssueModel,
    pub ops: u64,
    /// Stop issuing new ops after this much simulated time.
    pub duration_ns: Option<f64>,
    pub seed: u64,
    /// Connections sharing the NIC context cache.
    pub live_contexts: u64,
    /// Charge ordering costs: UB's tracker when a gate fires, RoCE's per-QP
    /// PSN serialization on every WR.
    pub ordering_accounting: bool,
    pub service_mode: ServiceMode,
    /// Replaces the workload's execution tag on every op.
    pub tag_override: Option<ExecTag>,
    pub fused_ack: bool,
    /// Jetties whose earlier op never completes. Their ops are strict-ordered,
    /// so each one holds forever.
    pub stalled_jetties: Vec<u32>,
    pub trace: bool,
}

impl SimConfig {
    pub fn new(stack: Stack, workload: WorkloadSpec) -> Self {
        let params = CostParams::default();
        SimConfig {
            stack,
            link: LinkConfig {
                delay_ns: params.wire_delay,
                bandwidth_gbps: params.wire_bandwidth,
                ..Default::default()
            },
            params,
            cache: None,
            workload,
            issue: IssueModel::Closed { depth: 1 },
            ops: 10_000,
            duration_ns: None,
            seed: DEFAULT_SEED,
            live_contexts: 1,
            ordering_accounting: false,
            service_mode: ServiceMode::Roi,
            tag_override: None,
            fused_ack: false,
            stalled_jetties: Vec::new(),
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::ConfigInvalid(m));
        self.params.validate().map_err(|e| EngineError::ConfigInvalid(e.to_string()))?;
        self.link.validate().map_err(EngineError::ConfigInvalid)?;
        self.workload.validate().map_err(EngineError::ConfigInvalid)?;
        match self.issue {
            IssueModel::Closed { depth: 0 } | IssueModel::SyncCore { clients: 0 } => {
                return bad("concurrency must be >= 1".into())
            }
            IssueModel::OpenLoop { rate_mops, .. } if !(rate_mops > 0.0 && rate_mops.is_finite()) => {
                return bad("arrival rate must be > 0".into())
            }
            _ => {}
        }
        if self.fused_ack && self.service_mode != ServiceMode::Rol {
            return bad("fused ack needs the ROL service mode".into());
        }
        if let Some(d) = self.duration_ns {
            if !(d >= 0.0) {
                return bad("duration must be >= 0".into());
            }
        }
        Ok(())
    }

    /// Parameters with the link's delay and bandwidth folded in.
    fn effective_params(&self) -> CostParams {
        let mut p = self.params.clone();
        p.wire_delay = self.link.delay_ns;
        p.wire_bandwidth = self.link.bandwidth_gbps;
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    /// Per-op latency in ns, in completion order.
    pub samples: Vec<f64>,
    pub issued: u64,
    pub completed: u64,
    pub lost: u64,
    /// Ops still held by an ordering gate when the run ended.
    pub held: u64,
    pub retransmits: u64,
    pub marked: u64,
    pub bytes: u64,
    pub elapsed_ns: f64,
    pub cache_hits: u64,
    /// Mean completed-op latency per Jetty, ns.
    pub jetty_mean: BTreeMap<u32, f64>,
    /// Mean ns per op for each path component, queueing, and jitter.
    pub attributions: BTreeMap<String, f64>,
    pub trace: Vec<String>,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl RunStats {
    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.samples.iter().sum::<f64>() / self.samples.len() as f64
        }
    }

    pub fn p50(&self) -> f64 {
        percentile(&self.sorted(), 50.0)
    }

    pub fn p99(&self) -> f64 {
        percentile(&self.sorted(), 99.0)
    }

    pub fn p999(&self) -> f64 {
        percentile(&self.sorted(), 99.9)
    }

    pub fn goodput_ops(&self) -> f64 {
        if self.elapsed_ns > 0.0 {
            self.completed as f64 * 1e9 / self.elapsed_ns
        } else {
            0.0
        }
    }

    pub fn goodput_bytes(&self) -> f64 {
        if self.elapsed_ns > 0.0 {
            self.bytes as f64 * 1e9 / self.elapsed_ns
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrival,
    Complete { op: usize },
    Lost { op: usize },
    Commit { jetty: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    op: Op,
    offered: Tick,
}

struct Inflight {
    jetty: u32,
    offered: Tick,
    payload: usize,
}

#[derive(Default)]
struct Server {
    free: Tick,
}

impl Server {
    /// FIFO reservation: returns the start time.
    fn acquire(&mut self, at: Tick, hold: Tick) -> Tick {
        let start = at.max(self.free);
        self.free = start + hold;
        start
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    p: CostParams,
    q: EventQueue<Event>,
    stream: OpStream,
    cache: Option<CacheModel>,
    jitter: JitterModel,
    jitter_rng: SimRng,
    loss_rng: SimRng,
    arrival_rng: SimRng,
    core: Server,
    host: Server,
    pipe: Server,
    jetties: HashMap<u32, JettyOrderState>,
    held: HashMap<u32, VecDeque<Pending>>,
    inflight: Vec<Option<Inflight>>,
    attr_sum: BTreeMap<&'static str, f64>,
    jetty_sum: BTreeMap<u32, (u64, f64)>,
    stats: RunStats,
    spill_ns: f64,
    family_of_path: Family,
}

impl<'a> Sim<'a> {
    fn stop_issuing(&self) -> bool {
        self.stats.issued >= self.cfg.ops || self.cfg.duration_ns.is_some_and(|d| ticks_to_ns(self.q.now()) >= d)
    }

    fn attr(&mut self, name: &'static str, ns: f64) {
        *self.attr_sum.entry(name).or_insert(0.0) += ns;
    }

    fn jetty(&mut self, j: u32) -> &mut JettyOrderState {
        let stalled = self.cfg.stalled_jetties.contains(&j);
        self.jetties.entry(j).or_insert_with(|| {
            let mut s = JettyOrderState::default();
            if stalled {
                s.on_issue();
            }
            s
        })
    }

    /// Pull the next op from the workload and offer it at `now`.
    fn offer_next(&mut self) {
        if self.stop_issuing() {
            return;
        }
        let Some(mut op) = self.stream.next() else { return };
        if let Some(t) = self.cfg.tag_override {
            op.tag = t;
        }
        if self.cfg.stalled_jetties.contains(&op.jetty) {
            op.tag = ExecTag::So;
        }
        self.stats.issued += 1;
        let now = self.q.now();
        self.offer(Pending { op, offered: now });
    }

    fn offer(&mut self, pend: Pending) {
        let j = pend.op.jetty;
        let queue_empty = self.held.get(&j).is_none_or(|h| h.is_empty());
        let mode = self.mode_of(&pend.op);
        if queue_empty && self.jetty(j).gate_check(&mode) == Gate::Emit {
            self.emit(pend, false);
        } else {
            self.held.entry(j).or_default().push_back(pend);
        }
    }

    fn mode_of(&self, op: &Op) -> OrderingMode {
        OrderingMode { service_mode: self.cfg.service_mode, exec_tag: op.tag, fence: op.fence, completion_order: false }
    }

    fn release_held(&mut self, j: u32) {
        loop {
            let Some(front) = self.held.get(&j).and_then(|h| h.front().copied()) else { return };
            let mode = self.mode_of(&front.op);
            if self.jetty(j).gate_check(&mode) == Gate::Hold {
                return;
            }
            self.held.get_mut(&j).unwrap().pop_front();
            self.emit(front, true);
        }
    }

    fn map_verb(&self, verb: Opcode) -> (Stack, Opcode) {
        let s = self.cfg.stack;
        let v = match (s, verb) {
            (Stack::UbLdst, Opcode::Read) => Opcode::Load,
            (Stack::UbLdst, Opcode::Write) => Opcode::Store,
            (Stack::UbLdst, _) => verb,
            (_, Opcode::Load) => Opcode::Read,
            (_, Opcode::Store) => Opcode::Write,
            _ => verb,
        };
        (route(s, v), v)
    }

    /// Components of one op's path after the gate, and whether it touches
    /// the NIC at all.
    fn path(&mut self, op: &Op, gated: bool) -> (Stack, Vec<Component>, f64, bool) {
        let (stack, verb) = self.map_verb(op.verb);
        let mut d = decompose_with(stack, verb, op.payload, &self.p, PathOptions { fused_ack: self.cfg.fused_ack })
            .expect("routed verb is admissible");
        let mut overhead = d.overhead_ns;
        let mut remote = true;
        if stack == Stack::UbLdst {
            if let Some(cache) = self.cache.as_mut() {
                let rw = if verb == Opcode::Store { Access::Write } else { Access::Read };
                let out = cache.cache_access(op.addr, rw);
                let write_through = rw == Access::Write && cache.policy == CachePolicy::WriteThrough;
                if out.level != Level::Remote && !write_through {
                    self.stats.cache_hits += 1;
                    let name = match out.level {
                        Level::L1 => "cache_l1",
                        Level::L2 => "cache_l2",
                        _ => "cache_llc",
                    };
                    d.components = vec![Component {
                        name,
                        phase: crate::costmodel::Phase::InitiatorPre,
                        class: CostClass::Software,
                        host_side: true,
                        ns: out.latency_ns,
                    }];
                    overhead = 0.0;
                    remote = false;
                } else {
                    // the fill returns into the hierarchy, not through a completion
                    d.components.retain(|c| c.name != "complete_membus");
                }
            }
        }
        if remote && self.cfg.ordering_accounting {
            let g = gating_delay_ns(stack.family(), gated);
            if g > 0.0 {
                d.components.push(Component {
                    name: "ordering",
                    phase: crate::costmodel::Phase::InitiatorPre,
                    class: CostClass::Nic,
                    host_side: false,
                    ns: g,
                });
            }
        }
        if remote && self.spill_ns > 0.0 && stack.family() == self.family_of_path {
            d.components.push(Component {
                name: "context_spill",
                phase: crate::costmodel::Phase::Target,
                class: if stack.family() == Family::Roce { CostClass::Pcie } else { CostClass::Membus },
                host_side: false,
                ns: self.spill_ns,
            });
        }
        (stack, d.components, overhead, remote)
    }

    fn emit(&mut self, pend: Pending, gated: bool) {
        let now = self.q.now();
        let op = pend.op;
        self.jetty(op.jetty).on_issue();
        let (stack, comps, overhead, remote) = self.path(&op, gated);

        let mut latency = overhead;
        for c in &comps {
            let j = self.jitter.sample_jitter(&mut self.jitter_rng, c.class, c.ns);
            latency += c.ns + j;
            self.attr(c.name, c.ns);
            if j > 0.0 {
                self.attr("jitter", j);
            }
        }
        if overhead > 0.0 {
            self.attr("sched_overhead", overhead);
        }
        let lat_ticks = ns_to_ticks(latency);

        let blocking = match self.cfg.issue {
            IssueModel::SyncCore { .. } => true,
            IssueModel::OpenLoop { .. } => self.cfg.stack == Stack::UbLdst && stack == Stack::UbLdst,
            IssueModel::Closed { .. } => false,
        };
        let mut start = now;
        if blocking {
            start = start.max(self.core.free);
        }
        if remote {
            if stack != Stack::UbLdst {
                let host: f64 = comps.iter().filter(|c| c.host_side).map(|c| c.ns).sum::<f64>() + overhead;
                start = self.host.acquire(start, ns_to_ticks(host));
            }
            start = self.pipe.acquire(start, ns_to_ticks(self.p.pipeline_interval.get(stack)));
        }

        // loss: each attempt sends the request and the response over the link
        let mut done_at = start + lat_ticks;
        let mut lost = false;
        if self.cfg.link.loss_rate > 0.0 && remote {
            let flits = flit_count(op.verb, op.payload);
            let mut attempt = 0;
            let mut t = start;
            loop {
                let fwd = link_transmit(&self.cfg.link, flits, &mut self.loss_rng, &mut self.jitter_rng);
                let back = match fwd {
                    LinkOutcome::Drop => LinkOutcome::Drop,
                    LinkOutcome::Arrive { .. } => {
                        link_transmit(&self.cfg.link, 1, &mut self.loss_rng, &mut self.jitter_rng)
                    }
                };
                if back != LinkOutcome::Drop {
                    done_at = t + lat_ticks;
                    break;
                }
                if attempt == MAX_RETRIES {
                    lost = true;
                    done_at = t + ns_to_ticks(DEFAULT_RTO_MULTIPLIER * latency * f64::powi(2.0, attempt as i32));
                    break;
                }
                t += ns_to_ticks(DEFAULT_RTO_MULTIPLIER * latency * f64::powi(2.0, attempt as i32));
                attempt += 1;
                self.stats.retransmits += 1;
            }
        }
        if blocking {
            self.core.free = done_at;
        }
        let queue_ns = ticks_to_ns(start - now);
        if queue_ns > 0.0 {
            self.attr("queueing", queue_ns);
        }
        let id = self.inflight.len();
        self.inflight.push(Some(Inflight { jetty: op.jetty, offered: pend.offered, payload: op.payload }));
        if self.cfg.trace {
            self.stats.trace.push(format!(
                "{:.3} emit op={id} jetty={} verb={:?} gated={gated} done={:.3}",
                ticks_to_ns(now),
                op.jetty,
                op.verb,
                ticks_to_ns(done_at)
            ));
        }
        self.q.schedule(done_at, if lost { Event::Lost { op: id } } else { Event::Complete { op: id } });
    }

    fn schedule_arrival(&mut self) {
        if let IssueModel::OpenLoop { rate_mops, arrivals } = self.cfg.issue {
            let gap_ns = 1e3 / rate_mops;
            let gap = match arrivals {
                Arrivals::Paced => gap_ns,
                Arrivals::Poisson => Exp::new(1.0 / gap_ns).unwrap().sample(&mut self.arrival_rng),
            };
            self.q.schedule_in(ns_to_ticks(gap), Event::Arrival);
        }
    }

    fn finish(&mut self, id: usize, ok: bool) {
        let inf = self.inflight[id].take().expect("op finishes once");
        let now = self.q.now();
        if ok {
            self.stats.completed += 1;
            self.stats.bytes += inf.payload as u64;
            let lat = ticks_to_ns(now - inf.offered);
            self.stats.samples.push(lat);
            let e = self.jetty_sum.entry(inf.jetty).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += lat;
        } else {
            self.stats.lost += 1;
        }
        self.stats.elapsed_ns = ticks_to_ns(now);
        // the order tracker commits after the completion is visible, so an op
        // the application issues in reaction still sees this one outstanding
        self.q.schedule(now, Event::Commit { jetty: inf.jetty });
        if matches!(self.cfg.issue, IssueModel::Closed { .. } | IssueModel::SyncCore { .. }) {
            self.offer_next();
        }
    }

    fn run(mut self) -> RunStats {
        match self.cfg.issue {
            IssueModel::Closed { depth: n } | IssueModel::SyncCore { clients: n } => {
                for _ in 0..n {
                    self.offer_next();
                }
            }
            IssueModel::OpenLoop { .. } => self.q.schedule(0, Event::Arrival),
        }
        while let Some((_, ev)) = self.q.pop() {
            match ev {
                Event::Arrival => {
                    if !self.stop_issuing() {
                        self.offer_next();
                        self.schedule_arrival();
                    }
                }
                Event::Complete { op } => self.finish(op, true),
                Event::Lost { op } => self.finish(op, false),
                Event::Commit { jetty } => {
                    self.jetty(jetty).on_complete();
                    self.release_held(jetty);
                }
            }
        }
        self.stats.held = self.held.values().map(|h| h.len() as u64).sum();
        let n = (self.stats.completed + self.stats.lost).max(1) as f64;
        self.stats.jetty_mean = self.jetty_sum.iter().map(|(&j, &(c, t))| (j, t / c as f64)).collect();
        self.stats.attributions = self.attr_sum.iter().map(|(k, v)| (k.to_string(), v / n)).collect();
        self.stats
    }
}

/// Run one configuration to completion.
pub fn run(cfg: &SimConfig) -> Result<RunStats, EngineError> {
    cfg.validate()?;
    let p = cfg.effective_params();
    let cache = match (cfg.stack, cfg.cache) {
        (Stack::UbLdst, Some(c)) => Some(CacheModel::with_capacity(c.policy, &p, c.lines)),
        _ => None,
    };
    let family = cfg.stack.family();
    let sim = Sim {
        spill_ns: ContextCache::for_family(family).spill_lookup(cfg.live_contexts),
        family_of_path: family,
        p,
        q: EventQueue::new(),
        stream: cfg.workload.generate(cfg.seed),
        cache,
        jitter: JitterModel { factor: cfg.link.jitter_factor },
        jitter_rng: substream(cfg.seed, "jitter"),
        loss_rng: substream(cfg.seed, "loss"),
        arrival_rng: substream(cfg.seed, "arrivals"),
        core: Server::default(),
        host: Server::default(),
        pipe: Server::default(),
        jetties: HashMap::new(),
        held: HashMap::new(),
        inflight: Vec::new(),
        attr_sum: BTreeMap::new(),
        jetty_sum: BTreeMap::new(),
        stats: RunStats::default(),
        cfg,
    };
    Ok(sim.run())
}

/// Completed ops per second at each closed-loop depth.
pub fn sweep_concurrency(cfg: &SimConfig, depths: &[u32]) -> Result<Vec<(u32, f64)>, EngineError> {
    depths
        .iter()
        .map(|&d| {
            let mut c = cfg.clone();
            c.issue = IssueModel::Closed { depth: d };
            run(&c).map(|s| (d, s.goodput_ops()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoint {
    pub offered_mops: f64,
    pub achieved_mops: f64,
    pub p50: f64,
    pub p99: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub points: Vec<EnvelopePoint>,
    /// Lowest offered rate whose p99 exceeds twice the unloaded median.
    pub knee: Option<f64>,
    /// Lowest offered rate whose p99 exceeds twice its own median.
    pub knee_own_median: Option<f64>,
}

/// Sweep open-loop offered rates (ascending). The first rate serves as the
/// unloaded reference.
pub fn open_loop_envelope(cfg: &SimConfig, rates_mops: &[f64], arrivals: Arrivals) -> Result<Envelope, EngineError> {
    let mut points = Vec::with_capacity(rates_mops.len());
    for &r in rates_mops {
        let mut c = cfg.clone();
        c.issue = IssueModel::OpenLoop { rate_mops: r, arrivals };
        let s = run(&c)?;
        points.push(EnvelopePoint {
            offered_mops: r,
            achieved_mops: s.goodput_ops() / 1e6,
            p50: s.p50(),
            p99: s.p99(),
        });
    }
    let base = points.first().map(|p| p.p50).unwrap_or(0.0);
    let knee = points.iter().find(|p| p.p99 > 2.0 * base).map(|p| p.offered_mops);
    let knee_own_median = points.iter().find(|p| p.p99 > 2.0 * p.p50).map(|p| p.offered_mops);
    Ok(Envelope { points, knee, knee_own_median })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::CachePolicy;
    use approx::assert_abs_diff_eq;

    fn verb_cfg(stack: Stack) -> SimConfig {
        let mut c = SimConfig::new(stack, WorkloadSpec::BulkRead { payload: 64 });
        c.ops = 200;
        c
    }

    #[test]
    fn headline_runs() {
        let s = run(&verb_cfg(Stack::UbLdst)).unwrap();
        assert_abs_diff_eq!(s.mean(), 499.392, epsilon = 0.01);
        let s = run(&verb_cfg(Stack::RoceDma)).unwrap();
        assert_abs_diff_eq!(s.mean(), 2185.816, epsilon = 0.01);
        assert_eq!(s.completed, 200);
    }

    #[test]
    fn zero_ops_is_empty() {
        let mut c = verb_cfg(Stack::UbUrma);
        c.ops = 0;
        let s = run(&c).unwrap();
        assert_eq!(s.completed, 0);
        assert_eq!(s.mean(), 0.0);
        c.ops = 10;
        c.duration_ns = Some(0.0);
        assert_eq!(run(&c).unwrap().completed, 0);
    }

    #[test]
    fn invalid_configs() {
        let mut c = verb_cfg(Stack::UbUrma);
        c.issue = IssueModel::Closed { depth: 0 };
        assert!(run(&c).is_err());
        let mut c = verb_cfg(Stack::UbUrma);
        c.link.loss_rate = 2.0;
        assert!(run(&c).is_err());
        let mut c = verb_cfg(Stack::UbUrma);
        c.fused_ack = true;
        assert!(run(&c).is_err());
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 99.9), 100.0);
        assert_eq!(percentile(&[7.0], 50.0), 7.0);
    }

    #[test]
    fn pipeline_caps_throughput() {
        for (stack, cap) in [(Stack::UbUrma, 150.36), (Stack::RoceDma, 53.62)] {
            let mut c = verb_cfg(stack);
            c.ops = 5000;
            c.issue = IssueModel::Closed { depth: 256 };
            // isolate the NIC: no host-side work
            c.params.sched_overhead_on = false;
            let interval = c.params.pipeline_interval.get(stack);
            assert_abs_diff_eq!(1e3 / interval, cap, epsilon = 1e-9);
            let s = run(&c).unwrap();
            assert!(s.goodput_ops() / 1e6 <= cap * 1.0001);
        }
    }

    #[test]
    fn concurrency_plateaus() {
        let mut c = SimConfig::new(Stack::RoceDma, WorkloadSpec::BulkRead { payload: 64 });
        c.ops = 2000;
        let r = sweep_concurrency(&c, &[1, 2, 4, 16]).unwrap();
        assert!((r[0].1 / 1e6 - 0.4575).abs() < 0.01);
        for w in r.windows(2) {
            assert!(w[1].1 >= w[0].1 * 0.999);
        }
        assert!((r[3].1 / 1e6 - 0.744).abs() < 0.01, "{:?}", r);
    }

    #[test]
    fn so_gates_at_depth_one() {
        let mut c = SimConfig::new(Stack::UbLdst, WorkloadSpec::MixedOrder { so_fraction: 1.0 });
        c.ops = 100;
        c.ordering_accounting = true;
        let s = run(&c).unwrap();
        // the first op has nothing outstanding
        assert_abs_diff_eq!(s.samples[0], 499.392, epsilon = 0.01);
        assert_abs_diff_eq!(s.samples[1], 519.392, epsilon = 0.01);
    }

    #[test]
    fn stalled_jetty_holds_forever() {
        let mut c = SimConfig::new(Stack::UbUrma, WorkloadSpec::MixedOrder { so_fraction: 1.0 });
        c.ops = 10;
        c.stalled_jetties = vec![0];
        c.issue = IssueModel::OpenLoop { rate_mops: 0.5, arrivals: Arrivals::Paced };
        let s = run(&c).unwrap();
        assert_eq!(s.completed, 0);
        assert_eq!(s.held, 10);
        assert_eq!(s.issued, s.completed + s.lost + s.held);
    }

    #[test]
    fn stalled_jetty_leaves_others_alone() {
        let mut c = SimConfig::new(Stack::UbUrma, WorkloadSpec::TpSharing { jetties: 4 });
        c.ops = 400;
        c.issue = IssueModel::OpenLoop { rate_mops: 0.5, arrivals: Arrivals::Paced };
        let free = run(&c).unwrap();
        c.stalled_jetties = vec![0];
        let stalled = run(&c).unwrap();
        assert_eq!(stalled.held, 100);
        assert!(!stalled.jetty_mean.contains_key(&0));
        for j in 1..4 {
            assert_eq!(free.jetty_mean[&j], stalled.jetty_mean[&j]);
        }
    }

    #[test]
    fn conservation_under_loss() {
        for loss in [0.0, 0.1, 1.0] {
            let mut c = verb_cfg(Stack::UbUrma);
            c.link.loss_rate = loss;
            let s = run(&c).unwrap();
            assert_eq!(s.completed + s.lost, s.issued);
            if loss < 1.0 {
                assert!(s.lost <= 1);
            } else {
                assert_eq!(s.completed, 0);
            }
        }
    }

    #[test]
    fn cache_locality() {
        let mut c = SimConfig::new(Stack::UbLdst, WorkloadSpec::PointerChase { locality: 0.0 });
        c.ops = 2000;
        c.cache = Some(CacheConfig::new(CachePolicy::WriteBack));
        assert_abs_diff_eq!(run(&c).unwrap().mean(), 469.392, epsilon = 0.01);
        c.workload = WorkloadSpec::PointerChase { locality: 0.8 };
        let warm = run(&c).unwrap().mean();
        assert!(warm < 150.0, "{warm}");
        c.cache = Some(CacheConfig::new(CachePolicy::Uncached));
        assert_abs_diff_eq!(run(&c).unwrap().mean(), 469.392, epsilon = 0.01);
    }

    #[test]
    fn deterministic_with_jitter() {
        let mut c = verb_cfg(Stack::RoceDma);
        c.link.jitter_factor = 0.2;
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
        c.seed += 1;
        let other = run(&c).unwrap();
        c.seed -= 1;
        assert_ne!(run(&c).unwrap().samples, other.samples);
    }

    #[test]
    fn link_delay_slope() {
        for stack in Stack::ALL {
            let mut c = verb_cfg(stack);
            c.ops = 10;
            let a = run(&c).unwrap().mean();
            c.link.delay_ns = 350.0;
            let b = run(&c).unwrap().mean();
            assert_abs_diff_eq!(b - a, 500.0, epsilon = 0.01);
        }
    }

    #[test]
    fn tags_do_not_change_ungated_latency() {
        let mut base = None;
        for mode in OrderingMode::combinations() {
            let mut c = SimConfig::new(Stack::UbUrma, WorkloadSpec::BulkRead { payload: 64 });
            c.ops = 50;
            c.service_mode = mode.service_mode;
            c.tag_override = Some(mode.exec_tag);
            c.ordering_accounting = true;
            c.issue = IssueModel::OpenLoop { rate_mops: 0.5, arrivals: Arrivals::Paced };
            let s = run(&c).unwrap();
            let m = s.mean();
            assert_eq!(*base.get_or_insert(m), m);
        }
    }
}
