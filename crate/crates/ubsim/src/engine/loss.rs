//! NIC-injected stream of single-flit WRITEs over a lossy link, recovered by
//! selective retransmission or Go-Back-N through the transport state.

use super::percentile;
use super::queue::{ns_to_ticks, ticks_to_ns, EventQueue, Tick};
use crate::costmodel::CostParams;
use crate::transport::{AckDecision, RxState, Scheme, Trigger, TxWindow, DEFAULT_RTO_MULTIPLIER, DEFAULT_WINDOW};
use crate::wire::PacketHeader;
use std::collections::{BTreeSet, HashMap};

/// Which first-attempt or retransmitted packets the link drops.
#[derive(Debug, Clone, PartialEq)]
pub enum DropPattern {
    /// Each transmission of (psn, attempt) is dropped with probability `p`,
    /// decided by a hash of the seed so two schemes see the same trace.
    Bernoulli { p: f64, seed: u64 },
    /// Drop exactly the first transmission of each listed psn.
    FirstAttempt(BTreeSet<u32>),
}

impl DropPattern {
    fn drops(&self, psn: u32, attempt: u32) -> bool {
        match self {
            DropPattern::Bernoulli { p, seed } => {
                if *p <= 0.0 {
                    return false;
                }
                let h = mix(seed ^ ((psn as u64) << 20) ^ ((attempt as u64) << 52));
                ((h >> 11) as f64 / (1u64 << 53) as f64) < *p
            }
            DropPattern::FirstAttempt(set) => attempt == 0 && set.contains(&psn),
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub scheme: Scheme,
    /// NIC transmit pipeline occupancy per packet.
    pub occupancy_ns: f64,
    pub nic_tx_ns: f64,
    pub nic_rx_ns: f64,
    /// Target-side work before the in-order ack leaves.
    pub target_ns: f64,
    pub wire_ns: f64,
    /// Ops outstanding from the injector.
    pub depth: u32,
    pub window: u32,
    pub ops: u32,
    pub rto_multiplier: f64,
    /// Completions retire strictly in psn order.
    pub in_order_completion: bool,
    pub drops: DropPattern,
}

impl LossConfig {
    /// Selective recovery on the Jetty path: per-op completion on ack or SACK.
    pub fn ub(p: &CostParams, loss: f64, seed: u64) -> Self {
        LossConfig {
            scheme: Scheme::Sack,
            occupancy_ns: p.pipeline_interval.ub_urma,
            nic_tx_ns: p.nic_cycles.ub_urma * p.cycle_ns,
            nic_rx_ns: p.nic_cycles.ub_urma * p.cycle_ns,
            target_ns: p.membus + p.dram_row_hit,
            wire_ns: p.wire_delay,
            depth: 8,
            window: DEFAULT_WINDOW,
            ops: 20_000,
            rto_multiplier: DEFAULT_RTO_MULTIPLIER,
            in_order_completion: false,
            drops: DropPattern::Bernoulli { p: loss, seed },
        }
    }

    /// Go-Back-N on an RC QP: completions in order.
    pub fn roce(p: &CostParams, loss: f64, seed: u64) -> Self {
        LossConfig {
            scheme: Scheme::GoBackN,
            occupancy_ns: p.pipeline_interval.roce,
            nic_tx_ns: p.nic_cycles.roce * p.cycle_ns,
            nic_rx_ns: p.nic_cycles.roce * p.cycle_ns,
            target_ns: p.pcie_dma_write,
            in_order_completion: true,
            ..Self::ub(p, loss, seed)
        }
    }

    fn one_way(&self) -> f64 {
        self.nic_tx_ns + self.wire_ns + self.nic_rx_ns
    }

    fn rtt(&self) -> f64 {
        2.0 * self.one_way() + self.target_ns
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossStats {
    pub completed: u32,
    pub elapsed_ns: f64,
    pub latencies: Vec<f64>,
    pub retransmits: u64,
    /// Psns in the order the receiver delivered them.
    pub delivered: Vec<u32>,
}

impl LossStats {
    pub fn mops(&self) -> f64 {
        if self.elapsed_ns > 0.0 {
            self.completed as f64 * 1e3 / self.elapsed_ns
        } else {
            0.0
        }
    }

    pub fn p50(&self) -> f64 {
        let mut v = self.latencies.clone();
        v.sort_by(f64::total_cmp);
        percentile(&v, 50.0)
    }

    pub fn p99(&self) -> f64 {
        let mut v = self.latencies.clone();
        v.sort_by(f64::total_cmp);
        percentile(&v, 99.0)
    }
}

#[derive(Debug, Clone)]
enum Ev {
    /// A data packet reaches the receiver.
    Rx(u32),
    /// An ack reaches the sender; `recover` marks SACK/NAK reports that ask
    /// for retransmission.
    Ack {
        decision: AckDecision,
        recover: bool,
    },
    Rto(u64),
}

pub fn loss_stream(cfg: &LossConfig) -> LossStats {
    let mut q: EventQueue<Ev> = EventQueue::new();
    let mut tx = TxWindow::new(cfg.window);
    tx.rto.multiplier = cfg.rto_multiplier;
    let mut rx = RxState::new(cfg.scheme);
    let mut st = LossStats::default();
    let mut tx_free: Tick = 0;
    let mut attempts: HashMap<u32, u32> = HashMap::new();
    let mut issued_at: HashMap<u32, Tick> = HashMap::new();
    let mut acked: BTreeSet<u32> = BTreeSet::new();
    let mut last_rtx: HashMap<u32, Tick> = HashMap::new();
    let mut cq_next = 0u32;
    let mut timer_gen = 0u64;
    let rtt = ns_to_ticks(cfg.rtt());
    let one_way = ns_to_ticks(cfg.one_way());

    let mut transmit = |q: &mut EventQueue<Ev>, psn: u32, tx_free: &mut Tick| {
        let now = q.now();
        let start = now.max(*tx_free);
        *tx_free = start + ns_to_ticks(cfg.occupancy_ns);
        let a = attempts.entry(psn).or_insert(0);
        let dropped = cfg.drops.drops(psn, *a);
        *a += 1;
        if !dropped {
            q.schedule(start + one_way, Ev::Rx(psn));
        }
    };
    let arm = |q: &mut EventQueue<Ev>, tx: &TxWindow, gen: &mut u64| {
        *gen += 1;
        q.schedule_in(ns_to_ticks(tx.rto.timeout_ns(cfg.rtt())), Ev::Rto(*gen));
    };

    let issue_more = |q: &mut EventQueue<Ev>,
                      tx: &mut TxWindow,
                      issued_at: &mut HashMap<u32, Tick>,
                      st: &LossStats,
                      tx_free: &mut Tick,
                      transmit: &mut dyn FnMut(&mut EventQueue<Ev>, u32, &mut Tick)| {
        while tx.psn_next() < cfg.ops && tx.psn_next() - st.completed < cfg.depth {
            let Ok(psn) = tx.push(PacketHeader::default(), &[]) else { break };
            issued_at.insert(psn, q.now());
            transmit(q, psn, tx_free);
        }
    };

    issue_more(&mut q, &mut tx, &mut issued_at, &st, &mut tx_free, &mut transmit);
    arm(&mut q, &tx, &mut timer_gen);

    while st.completed < cfg.ops {
        let Some((now, ev)) = q.pop() else { break };
        match ev {
            Ev::Rx(psn) => {
                let Ok(out) = rx.receive(psn) else { continue };
                st.delivered.extend(&out.delivered);
                let back = ns_to_ticks(cfg.one_way());
                match out.ack {
                    AckDecision::Silent => {}
                    d if !out.delivered.is_empty() => {
                        // in-order progress is acked once the target has the data
                        q.schedule_in(back + ns_to_ticks(cfg.target_ns), Ev::Ack { decision: d, recover: false });
                    }
                    d @ AckDecision::Duplicate { .. } => q.schedule_in(back, Ev::Ack { decision: d, recover: false }),
                    d => q.schedule_in(back, Ev::Ack { decision: d, recover: true }),
                }
            }
            Ev::Ack { decision, recover } => {
                let newly = match decision {
                    AckDecision::Ack { epsn } | AckDecision::Duplicate { epsn } | AckDecision::Nak { epsn } => {
                        tx.on_cumulative_ack(epsn)
                    }
                    AckDecision::Sack { epsn, bitmap } => match cfg.scheme {
                        Scheme::Sack => tx.on_sack(epsn, bitmap),
                        Scheme::GoBackN => tx.on_cumulative_ack(epsn),
                    },
                    AckDecision::Silent => Vec::new(),
                };
                acked.extend(newly.iter().copied());
                if !newly.is_empty() {
                    arm(&mut q, &tx, &mut timer_gen);
                }
                let complete = |psn: u32, st: &mut LossStats| {
                    st.latencies.push(ticks_to_ns(now - issued_at[&psn]));
                    st.completed += 1;
                };
                if cfg.in_order_completion {
                    while acked.remove(&cq_next) {
                        complete(cq_next, &mut st);
                        cq_next += 1;
                    }
                } else {
                    for psn in newly {
                        acked.remove(&psn);
                        complete(psn, &mut st);
                    }
                }
                if recover {
                    let trigger = match decision {
                        AckDecision::Nak { epsn } => Some(Trigger::Nak(epsn)),
                        AckDecision::Sack { epsn, bitmap } => Some(Trigger::Sack { base: epsn, bitmap }),
                        _ => None,
                    };
                    if let Some(t) = trigger {
                        for psn in tx.recover(t, cfg.scheme) {
                            // a selective hole is resent at most once per round trip
                            if cfg.scheme == Scheme::Sack {
                                if last_rtx.get(&psn).is_some_and(|&t0| now < t0 + rtt) {
                                    continue;
                                }
                                last_rtx.insert(psn, now);
                            }
                            transmit(&mut q, psn, &mut tx_free);
                            st.retransmits += 1;
                        }
                    }
                }
                issue_more(&mut q, &mut tx, &mut issued_at, &st, &mut tx_free, &mut transmit);
                st.elapsed_ns = ticks_to_ns(now);
            }
            Ev::Rto(gen) => {
                if gen != timer_gen {
                    continue;
                }
                if tx.in_flight() > 0 {
                    for psn in tx.recover(Trigger::Rto, cfg.scheme) {
                        last_rtx.insert(psn, now);
                        transmit(&mut q, psn, &mut tx_free);
                        st.retransmits += 1;
                    }
                    tx.rto.expire();
                }
                arm(&mut q, &tx, &mut timer_gen);
            }
        }
    }
    st
}

/// Goodput loss in percentage points and p99 inflation of a lossy run
/// against the same configuration without loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    pub goodput_drop_pp: f64,
    pub p99_inflation: f64,
    pub retransmits: u64,
    pub clean_mops: f64,
    pub lossy_mops: f64,
}

pub fn loss_summary(lossy: &LossConfig) -> LossSummary {
    let mut clean = lossy.clone();
    clean.drops = DropPattern::Bernoulli { p: 0.0, seed: 0 };
    let a = loss_stream(&clean);
    let b = loss_stream(lossy);
    LossSummary {
        goodput_drop_pp: 100.0 * (1.0 - b.mops() / a.mops()),
        p99_inflation: b.p99() / a.p99(),
        retransmits: b.retransmits,
        clean_mops: a.mops(),
        lossy_mops: b.mops(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scheme: Scheme, drops: DropPattern, ops: u32) -> LossConfig {
        let p = CostParams::default();
        let base = if scheme == Scheme::Sack { LossConfig::ub(&p, 0.0, 1) } else { LossConfig::roce(&p, 0.0, 1) };
        LossConfig { ops, drops, ..base }
    }

    #[test]
    fn clean_run_has_no_retransmits() {
        for scheme in [Scheme::Sack, Scheme::GoBackN] {
            let s = loss_stream(&small(scheme, DropPattern::FirstAttempt(BTreeSet::new()), 500));
            assert_eq!(s.completed, 500);
            assert_eq!(s.retransmits, 0);
            assert_eq!(s.delivered, (0..500).collect::<Vec<_>>());
        }
    }

    #[test]
    fn exhaustive_small_drop_subsets() {
        for n in 1..=6u32 {
            for mask in 0u32..(1 << n) {
                let set: BTreeSet<u32> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                for scheme in [Scheme::Sack, Scheme::GoBackN] {
                    let s = loss_stream(&small(scheme, DropPattern::FirstAttempt(set.clone()), n));
                    assert_eq!(s.completed, n, "{scheme:?} {set:?}");
                    assert_eq!(s.delivered, (0..n).collect::<Vec<_>>(), "{scheme:?} {set:?}");
                }
            }
        }
    }

    #[test]
    fn gbn_retransmits_at_least_sack() {
        for seed in 0..8 {
            let d = DropPattern::Bernoulli { p: 0.05, seed };
            let s = loss_stream(&small(Scheme::Sack, d.clone(), 2000));
            let g = loss_stream(&small(Scheme::GoBackN, d, 2000));
            assert!(s.retransmits <= g.retransmits, "seed {seed}: {} > {}", s.retransmits, g.retransmits);
        }
    }

    #[test]
    fn bernoulli_rate() {
        let d = DropPattern::Bernoulli { p: 0.05, seed: 3 };
        let n = (0..100_000).filter(|&i| d.drops(i, 0)).count() as f64;
        assert!((n / 100_000.0 - 0.05).abs() < 0.003);
    }
}
