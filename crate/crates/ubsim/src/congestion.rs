//! C-AQM (proportional bandwidth hint) and DCQCN (RED-curve AIMD)
//! controllers, the marking switch queue, and two closed-loop scenarios:
//! a steady-state bottleneck and the 200-WR element test.
//!
//! Scenario time is measured in bottleneck packet-times.

use crate::engine::queue::EventQueue;
use crate::rng::{substream, SimRng};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaqmParams {
    pub mark_threshold: f64,
    pub beta: f64,
    /// Packets added per round trip when the echoed hint is 255.
    pub additive_increase: f64,
    pub window_cap: f64,
    /// Scale the increase by the echoed hint.
    pub hint_proportional: bool,
}

impl Default for CaqmParams {
    fn default() -> Self {
        CaqmParams {
            mark_threshold: 0.97,
            beta: 0.1,
            additive_increase: 4.0,
            window_cap: 32.0,
            hint_proportional: true,
        }
    }
}

/// Rates are in units of the bottleneck rate; times in packet-times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcqcnParams {
    pub red_threshold: f64,
    pub p_max: f64,
    /// EWMA gain of the congestion estimate.
    pub g: f64,
    /// Target-rate step once fast recovery is exhausted.
    pub rate_ai: f64,
    pub fast_recovery_stages: u32,
    pub timer: f64,
    /// Minimum spacing between congestion notifications.
    pub cnp_gap: f64,
    pub line_rate: f64,
    pub min_rate: f64,
}

impl Default for DcqcnParams {
    fn default() -> Self {
        DcqcnParams {
            red_threshold: 0.5,
            p_max: 0.1,
            g: 0.5,
            rate_ai: 0.11,
            fast_recovery_stages: 5,
            timer: 50.0,
            cnp_gap: 2.0,
            line_rate: 2.0,
            min_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Caqm(CaqmParams),
    Dcqcn(DcqcnParams),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Caqm(_) => "caqm",
            Controller::Dcqcn(_) => "dcqcn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marking {
    Threshold(f64),
    Red { threshold: f64, p_max: f64 },
}

impl Marking {
    pub fn for_controller(c: &Controller) -> Self {
        match c {
            Controller::Caqm(p) => Marking::Threshold(p.mark_threshold),
            Controller::Dcqcn(p) => Marking::Red { threshold: p.red_threshold, p_max: p.p_max },
        }
    }

    /// Marking probability at an occupancy fraction.
    pub fn probability(&self, occupancy: f64) -> f64 {
        match *self {
            Marking::Threshold(t) => (occupancy > t) as u8 as f64,
            Marking::Red { threshold, p_max } => {
                if occupancy <= threshold {
                    0.0
                } else {
                    p_max * ((occupancy - threshold) / (1.0 - threshold)).min(1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchQueue {
    pub capacity: u64,
    pub occupancy: u64,
}

impl SwitchQueue {
    pub fn new(capacity: u64) -> Self {
        SwitchQueue { capacity, occupancy: 0 }
    }

    pub fn fraction(&self) -> f64 {
        self.occupancy as f64 / self.capacity as f64
    }

    /// Admit `size` units; `None` is a tail drop, otherwise the mark decision
    /// taken on the occupancy including the new arrival.
    pub fn enqueue(&mut self, size: u64, marking: &Marking, rng: &mut SimRng) -> Option<bool> {
        if self.occupancy + size > self.capacity {
            return None;
        }
        self.occupancy += size;
        Some(switch_mark(self, marking, rng))
    }

    pub fn dequeue(&mut self, size: u64) {
        self.occupancy = self.occupancy.saturating_sub(size);
    }
}

pub fn switch_mark(q: &SwitchQueue, marking: &Marking, rng: &mut SimRng) -> bool {
    match marking {
        Marking::Threshold(_) => marking.probability(q.fraction()) >= 1.0,
        Marking::Red { .. } => {
            let p = marking.probability(q.fraction());
            p > 0.0 && rng.random::<f64>() < p
        }
    }
}

/// The 8-bit hint: available bandwidth fraction scaled to 255.
pub fn encode_hint(available_fraction: f64) -> u8 {
    (255.0 * available_fraction.clamp(0.0, 1.0)).floor() as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Echo {
    pub mark: bool,
    pub increase_req: bool,
    pub hint: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaqmState {
    pub params: CaqmParams,
    pub window: f64,
}

impl CaqmState {
    pub fn new(params: CaqmParams) -> Self {
        CaqmState { params, window: params.window_cap }
    }

    fn increase_step(&self, hint: u8) -> f64 {
        let scale = if self.params.hint_proportional { hint as f64 / 255.0 } else { 1.0 };
        self.params.additive_increase * scale
    }

    fn decrease(&mut self) {
        self.window = (self.window * (1.0 - self.params.beta)).floor().max(1.0);
    }

    /// Per-echo update: a marked echo cuts the window, an unmarked one adds
    /// its share of the per-round increase.
    pub fn caqm_update(&mut self, echo: Echo) -> f64 {
        if echo.mark {
            self.decrease();
        } else if echo.increase_req {
            let step = self.increase_step(echo.hint) / self.window;
            self.window = (self.window + step).min(self.params.window_cap);
        }
        self.window
    }

    /// Round-level update: one decision per round trip.
    pub fn on_round(&mut self, echo: Echo) -> f64 {
        if echo.mark {
            self.decrease();
        } else if echo.increase_req {
            self.window = (self.window + self.increase_step(echo.hint)).min(self.params.window_cap);
        }
        self.window
    }

    pub fn packets_allowed(&self) -> u32 {
        self.window.floor() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcqcnState {
    pub params: DcqcnParams,
    pub rate: f64,
    pub target: f64,
    pub alpha: f64,
    pub stage: u32,
    last_cnp: f64,
}

impl DcqcnState {
    pub fn new(params: DcqcnParams) -> Self {
        DcqcnState {
            params,
            rate: params.line_rate,
            target: params.line_rate,
            alpha: 1.0,
            stage: 0,
            last_cnp: f64::NEG_INFINITY,
        }
    }

    /// React to a marked ack at time `now`. Returns whether it was taken as a
    /// congestion notification (notifications are rate limited).
    pub fn dcqcn_update(&mut self, cnp: bool, now: f64) -> bool {
        if !cnp || now - self.last_cnp < self.params.cnp_gap {
            return false;
        }
        let p = &self.params;
        self.last_cnp = now;
        self.alpha = (1.0 - p.g) * self.alpha + p.g;
        self.target = self.rate;
        self.rate = (self.rate * (1.0 - self.alpha / 2.0)).max(p.min_rate);
        self.stage = 0;
        true
    }

    /// Recovery timer: fast recovery toward the target, then additive.
    pub fn on_timer(&mut self, now: f64) {
        let p = &self.params;
        if now - self.last_cnp > p.timer {
            self.alpha *= 1.0 - p.g;
        }
        self.stage += 1;
        if self.stage > p.fast_recovery_stages {
            self.target = (self.target + p.rate_ai).min(p.line_rate);
        }
        self.rate = ((self.rate + self.target) / 2.0).min(p.line_rate);
    }
}

/// A single sender through one bottleneck queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    /// Base round trip, packet-times.
    pub base_rtt: f64,
    pub queue_packets: u64,
    /// Sender line rate relative to the bottleneck (window senders pace at it too).
    pub line_rate: f64,
    pub duration: f64,
    pub warmup_fraction: f64,
    pub sample_every: f64,
}

impl Default for Bottleneck {
    fn default() -> Self {
        Bottleneck {
            base_rtt: 8.0,
            queue_packets: 24,
            line_rate: 2.0,
            duration: 200_000.0,
            warmup_fraction: 0.2,
            sample_every: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcRun {
    pub utilisation: f64,
    pub delivered: u64,
    pub marks: u64,
    pub drops: u64,
    pub mean_queue: f64,
    /// (time, window in packets or rate relative to the bottleneck)
    pub trajectory: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
enum CcEv {
    Arrive,
    Depart { mark: bool },
    Ack { mark: bool, hint: u8 },
    Tick,
    Timer,
    Sample,
}

const T_SCALE: f64 = 1e6;

fn at(t: f64) -> u64 {
    (t * T_SCALE).round() as u64
}

/// Run a controller against the bottleneck and report utilisation over the
/// post-warmup window.
pub fn steady_state_utilisation(ctrl: Controller, link: Bottleneck, seed: u64) -> CcRun {
    let mut rng = substream(seed, "congestion.mark");
    let marking = Marking::for_controller(&ctrl);
    let mut q: EventQueue<CcEv> = EventQueue::new();
    let half = link.base_rtt / 2.0;
    let warm = link.duration * link.warmup_fraction;
    let mut sq = SwitchQueue::new(link.queue_packets);
    let mut queue_free = 0.0f64;
    let mut tx_free = 0.0f64;
    let (mut delivered, mut marks, mut drops) = (0u64, 0u64, 0u64);
    let mut q_area = 0.0;
    let mut q_last = warm;
    let mut inflight = 0u32;
    let mut caqm = match ctrl {
        Controller::Caqm(p) => Some(CaqmState::new(p)),
        _ => None,
    };
    let mut dcqcn = match ctrl {
        Controller::Dcqcn(p) => Some(DcqcnState::new(p)),
        _ => None,
    };
    let mut trajectory = Vec::new();

    let send_window = |now: f64, st: &CaqmState, inflight: &mut u32, tx_free: &mut f64, q: &mut EventQueue<CcEv>| {
        while *inflight < st.packets_allowed() {
            *inflight += 1;
            let start = now.max(*tx_free);
            *tx_free = start + 1.0 / link.line_rate;
            q.schedule(at(start + half), CcEv::Arrive);
        }
    };

    if let Some(st) = &caqm {
        send_window(0.0, st, &mut inflight, &mut tx_free, &mut q);
    }
    if let Some(d) = &dcqcn {
        q.schedule(0, CcEv::Tick);
        q.schedule(at(d.params.timer), CcEv::Timer);
    }
    q.schedule(0, CcEv::Sample);

    while let Some((tick, ev)) = q.pop() {
        let t = tick as f64 / T_SCALE;
        if t > link.duration {
            break;
        }
        match ev {
            CcEv::Arrive => {
                if t > warm {
                    q_area += sq.occupancy as f64 * (t - q_last);
                    q_last = t;
                }
                match sq.enqueue(1, &marking, &mut rng) {
                    None => {
                        drops += 1;
                        // a window sender learns of the loss one half-rtt later
                        if caqm.is_some() {
                            q.schedule(at(t + half), CcEv::Ack { mark: true, hint: 0 });
                        }
                    }
                    Some(mark) => {
                        marks += mark as u64;
                        let start = t.max(queue_free);
                        queue_free = start + 1.0;
                        q.schedule(at(queue_free), CcEv::Depart { mark });
                    }
                }
            }
            CcEv::Depart { mark } => {
                if t > warm {
                    q_area += sq.occupancy as f64 * (t - q_last);
                    q_last = t;
                    delivered += 1;
                }
                sq.dequeue(1);
                let hint = encode_hint(1.0 - sq.fraction());
                q.schedule(at(t + half), CcEv::Ack { mark, hint });
            }
            CcEv::Ack { mark, hint } => {
                if let Some(st) = caqm.as_mut() {
                    inflight -= 1;
                    st.caqm_update(Echo { mark, increase_req: true, hint });
                    let snapshot = *st;
                    send_window(t, &snapshot, &mut inflight, &mut tx_free, &mut q);
                } else if let Some(d) = dcqcn.as_mut() {
                    d.dcqcn_update(mark, t);
                }
            }
            CcEv::Tick => {
                let d = dcqcn.as_ref().unwrap();
                q.schedule(tick, CcEv::Arrive);
                q.schedule(at(t + 1.0 / d.rate), CcEv::Tick);
            }
            CcEv::Timer => {
                let d = dcqcn.as_mut().unwrap();
                d.on_timer(t);
                q.schedule(at(t + d.params.timer), CcEv::Timer);
            }
            CcEv::Sample => {
                let v = match (&caqm, &dcqcn) {
                    (Some(c), _) => c.window,
                    (_, Some(d)) => d.rate,
                    _ => unreachable!(),
                };
                trajectory.push((t, v));
                q.schedule(at(t + link.sample_every), CcEv::Sample);
            }
        }
    }
    let measured = link.duration - warm;
    CcRun {
        utilisation: delivered as f64 / measured,
        delivered,
        marks,
        drops,
        mean_queue: q_area / measured,
        trajectory,
    }
}

/// The closed-loop element test: a byte window over a marking queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementTest {
    pub work_requests: u32,
    pub wr_bytes: u32,
    pub mtu: u32,
    pub initial_window: u32,
    pub decrease_factor: f64,
    pub queue_packets: u32,
    pub mark_threshold: f64,
    /// Queue service time per packet, in sender packet-times.
    pub drain: f64,
    /// One-way propagation, in sender packet-times.
    pub delay: f64,
}

impl Default for ElementTest {
    fn default() -> Self {
        ElementTest {
            work_requests: 200,
            wr_bytes: 512,
            mtu: 4096,
            initial_window: 65_536,
            decrease_factor: 0.5,
            queue_packets: 10,
            mark_threshold: 0.97,
            drain: 2.0,
            delay: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementResult {
    pub packets: u32,
    pub marked: u32,
    pub final_window: u32,
    pub window_trace: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
enum ElEv {
    Enqueue,
    Depart(bool),
    Ack(bool),
}

pub fn element_test(cfg: ElementTest) -> ElementResult {
    let packets = (cfg.work_requests * cfg.wr_bytes).div_ceil(cfg.mtu);
    let mut q: EventQueue<ElEv> = EventQueue::new();
    let mut window = cfg.initial_window;
    let (mut sent, mut inflight, mut qlen, mut marked) = (0u32, 0u32, 0u32, 0u32);
    let (mut tx_free, mut q_free) = (0.0f64, 0.0f64);
    let mut trace = vec![window];

    let mut send = |now: f64, window: u32, sent: &mut u32, inflight: &mut u32, q: &mut EventQueue<ElEv>| {
        while *sent < packets && (*inflight + 1) * cfg.mtu <= window {
            let start = now.max(tx_free);
            tx_free = start + 1.0;
            q.schedule(at(start + 1.0 + cfg.delay), ElEv::Enqueue);
            *sent += 1;
            *inflight += 1;
        }
    };
    send(0.0, window, &mut sent, &mut inflight, &mut q);
    while let Some((tick, ev)) = q.pop() {
        let t = tick as f64 / T_SCALE;
        match ev {
            ElEv::Enqueue => {
                qlen += 1;
                let mark = qlen as f64 / cfg.queue_packets as f64 > cfg.mark_threshold;
                marked += mark as u32;
                let start = t.max(q_free);
                q_free = start + cfg.drain;
                q.schedule(at(q_free), ElEv::Depart(mark));
            }
            ElEv::Depart(mark) => {
                qlen -= 1;
                q.schedule(at(t + cfg.delay), ElEv::Ack(mark));
            }
            ElEv::Ack(mark) => {
                inflight -= 1;
                window = if mark {
                    ((window as f64 * cfg.decrease_factor) as u32).max(cfg.mtu)
                } else {
                    (window + cfg.mtu).min(cfg.initial_window)
                };
                trace.push(window);
                send(t, window, &mut sent, &mut inflight, &mut q);
            }
        }
    }
    ElementResult { packets, marked, final_window: window, window_trace: trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caqm_marks_above_threshold() {
        let mut rng = substream(1, "t");
        let m = Marking::Threshold(0.97);
        let q = SwitchQueue { capacity: 100, occupancy: 98 };
        assert!(switch_mark(&q, &m, &mut rng));
        let q = SwitchQueue { capacity: 100, occupancy: 97 };
        assert!(!switch_mark(&q, &m, &mut rng));
    }

    #[test]
    fn red_curve() {
        let m = Marking::Red { threshold: 0.5, p_max: 0.1 };
        assert_eq!(m.probability(0.4), 0.0);
        assert!((m.probability(1.0) - 0.1).abs() < 1e-12);
        assert!((m.probability(0.75) - 0.05).abs() < 1e-12);
        let mut rng = substream(1, "t");
        let q = SwitchQueue { capacity: 100, occupancy: 40 };
        assert!((0..1000).all(|_| !switch_mark(&q, &m, &mut rng)));
        let q = SwitchQueue { capacity: 100, occupancy: 100 };
        let hits = (0..100_000).filter(|_| switch_mark(&q, &m, &mut rng)).count();
        assert!((9_000..11_000).contains(&hits), "{hits}");
    }

    #[test]
    fn queue_never_exceeds_capacity() {
        let mut rng = substream(1, "t");
        let mut q = SwitchQueue::new(4);
        let m = Marking::Threshold(0.97);
        for _ in 0..4 {
            assert!(q.enqueue(1, &m, &mut rng).is_some());
        }
        assert!(q.enqueue(1, &m, &mut rng).is_none());
        assert_eq!(q.occupancy, 4);
    }

    #[test]
    fn caqm_update_examples() {
        let mut s = CaqmState::new(CaqmParams::default());
        assert_eq!(s.on_round(Echo { mark: true, increase_req: true, hint: 0 }), 28.0);
        assert_eq!(s.on_round(Echo { mark: false, increase_req: true, hint: 255 }), 32.0);
        let mut s = CaqmState::new(CaqmParams::default());
        s.window = 1.0;
        s.caqm_update(Echo { mark: true, increase_req: false, hint: 0 });
        assert_eq!(s.window, 1.0);
        s.window = 10.0;
        s.caqm_update(Echo { mark: false, increase_req: false, hint: 255 });
        assert_eq!(s.window, 10.0);
        assert_eq!(encode_hint(1.0), 255);
        assert_eq!(encode_hint(0.5), 127);
    }

    #[test]
    fn dcqcn_md_and_recovery() {
        let p = DcqcnParams::default();
        let mut d = DcqcnState::new(p);
        let mut prev = d.rate;
        for i in 0..6 {
            d.dcqcn_update(true, i as f64 * 10.0);
            assert!(d.rate < prev);
            prev = d.rate;
        }
        for i in 0..400 {
            d.on_timer(1000.0 + i as f64 * p.timer);
        }
        assert!((d.rate - p.line_rate).abs() < 1e-6);
    }

    #[test]
    fn cnp_rate_limit() {
        let mut d = DcqcnState::new(DcqcnParams::default());
        assert!(d.dcqcn_update(true, 0.0));
        assert!(!d.dcqcn_update(true, 1.0));
        assert!(d.dcqcn_update(true, 2.0));
        assert!(!d.dcqcn_update(false, 10.0));
    }

    #[test]
    fn element_test_default() {
        let r = element_test(ElementTest::default());
        assert_eq!(r.packets, 25);
        assert_eq!(r.marked, 9);
        assert_eq!(r.final_window, 4096);
        assert_eq!(r.window_trace[0], 65_536);
    }
}
