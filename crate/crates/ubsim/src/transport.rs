//! Per-TP-channel reliability: PSN allocation, the 64-slot retransmit ring,
//! receive-side reorder bitmap, Go-Back-N and selective recovery, RTO timer,
//! and ack-mode flit accounting.

use crate::wire::{PacketHeader, INLINE_MAX};
use thiserror::Error;

pub const RING_SLOTS: usize = 64;
pub const DEFAULT_WINDOW: u32 = 32;
/// Serialization cost at the shared PSN allocator, per op.
pub const PSN_ALLOC_NS: f64 = 5.0;
pub const DEFAULT_RTO_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("transmit window full ({0} packets in flight)")]
    WindowFull(u32),
    #[error("psn {psn} outside receive window starting at {epsn}")]
    OutOfWindow { psn: u32, epsn: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    GoBackN,
    Sack,
}

/// What a retransmit ring slot holds: the metadata flit and, for inline
/// payloads, the extension flit. Multi-flit payloads are not replayable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingEntry {
    pub psn: u32,
    pub header: PacketHeader,
    pub inline: [u8; INLINE_MAX],
    pub sacked: bool,
}

#[derive(Debug, Clone)]
pub struct TxWindow {
    ring: Vec<Option<RingEntry>>,
    psn_next: u32,
    last_acked: u32,
    window_limit: u32,
    pub rto: Rto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// Receiver reports `psn` as the first missing packet.
    Nak(u32),
    /// Receiver state: everything below `base` delivered, bit i of `bitmap`
    /// set iff `base + i` is held out of order.
    Sack {
        base: u32,
        bitmap: u64,
    },
    Rto,
}

impl TxWindow {
    pub fn new(window_limit: u32) -> Self {
        assert!((1..=RING_SLOTS as u32).contains(&window_limit), "window limit must be in 1..=64");
        TxWindow { ring: vec![None; RING_SLOTS], psn_next: 0, last_acked: 0, window_limit, rto: Rto::default() }
    }

    pub fn psn_next(&self) -> u32 {
        self.psn_next
    }

    /// Oldest unacknowledged psn; everything below it is acknowledged.
    pub fn last_acked(&self) -> u32 {
        self.last_acked
    }

    pub fn window_limit(&self) -> u32 {
        self.window_limit
    }

    pub fn in_flight(&self) -> u32 {
        self.psn_next - self.last_acked
    }

    pub fn allocate_psn(&mut self) -> Result<u32, TransportError> {
        if self.in_flight() >= self.window_limit {
            return Err(TransportError::WindowFull(self.in_flight()));
        }
        let psn = self.psn_next;
        self.psn_next += 1;
        Ok(psn)
    }

    /// Allocate a psn and park the header in the ring for replay.
    pub fn push(&mut self, mut header: PacketHeader, inline: &[u8]) -> Result<u32, TransportError> {
        let psn = self.allocate_psn()?;
        header.psn = psn;
        let mut buf = [0u8; INLINE_MAX];
        let n = inline.len().min(INLINE_MAX);
        buf[..n].copy_from_slice(&inline[..n]);
        self.ring[psn as usize % RING_SLOTS] = Some(RingEntry { psn, header, inline: buf, sacked: false });
        Ok(psn)
    }

    pub fn entry(&self, psn: u32) -> Option<&RingEntry> {
        self.ring[psn as usize % RING_SLOTS].as_ref().filter(|e| e.psn == psn)
    }

    pub fn is_unacked(&self, psn: u32) -> bool {
        psn >= self.last_acked && psn < self.psn_next && !self.entry(psn).map(|e| e.sacked).unwrap_or(false)
    }

    /// Cumulative ack: every psn below `cum` is delivered. Returns the psns
    /// newly acknowledged by this call (excluding ones already sacked).
    pub fn on_cumulative_ack(&mut self, cum: u32) -> Vec<u32> {
        let cum = cum.min(self.psn_next);
        let mut newly = Vec::new();
        while self.last_acked < cum {
            let psn = self.last_acked;
            let slot = &mut self.ring[psn as usize % RING_SLOTS];
            let was_sacked = slot.as_ref().map(|e| e.psn == psn && e.sacked).unwrap_or(false);
            if !was_sacked {
                newly.push(psn);
            }
            *slot = None;
            self.last_acked += 1;
        }
        if !newly.is_empty() {
            self.rto.reset();
        }
        newly
    }

    /// Apply a selective ack. Returns the psns newly acknowledged.
    pub fn on_sack(&mut self, base: u32, bitmap: u64) -> Vec<u32> {
        let mut newly = self.on_cumulative_ack(base);
        for i in 0..64u32 {
            if bitmap & (1u64 << i) == 0 {
                continue;
            }
            let psn = base + i;
            if psn < self.last_acked || psn >= self.psn_next {
                continue;
            }
            if let Some(e) = self.ring[psn as usize % RING_SLOTS].as_mut() {
                if e.psn == psn && !e.sacked {
                    e.sacked = true;
                    newly.push(psn);
                }
            }
        }
        if !newly.is_empty() {
            self.rto.reset();
        }
        newly
    }

    /// The set of psns to retransmit for a recovery trigger.
    pub fn recover(&self, trigger: Trigger, scheme: Scheme) -> Vec<u32> {
        let unacked = |lo: u32, hi: u32| -> Vec<u32> { (lo..hi).filter(|&p| self.is_unacked(p)).collect() };
        match (scheme, trigger) {
            (Scheme::GoBackN, Trigger::Nak(psn)) => (psn.max(self.last_acked)..self.psn_next).collect(),
            (Scheme::GoBackN, Trigger::Sack { base, .. }) => (base.max(self.last_acked)..self.psn_next).collect(),
            (Scheme::GoBackN, Trigger::Rto) => (self.last_acked..self.psn_next).collect(),
            (Scheme::Sack, Trigger::Nak(psn)) => unacked(psn, psn + 1),
            (Scheme::Sack, Trigger::Sack { base, bitmap }) => {
                if bitmap == 0 {
                    return Vec::new();
                }
                let top = 63 - bitmap.leading_zeros();
                let lo = base.max(self.last_acked);
                (lo..base + top)
                    .filter(|&p| p < base || bitmap & (1u64 << (p - base)) == 0)
                    .filter(|&p| self.is_unacked(p))
                    .collect()
            }
            (Scheme::Sack, Trigger::Rto) => unacked(self.last_acked, self.psn_next),
        }
    }
}

/// Retransmission timer with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rto {
    pub multiplier: f64,
    pub backoff: u32,
}

impl Default for Rto {
    fn default() -> Self {
        Rto { multiplier: DEFAULT_RTO_MULTIPLIER, backoff: 0 }
    }
}

impl Rto {
    pub fn with_multiplier(multiplier: f64) -> Self {
        Rto { multiplier, backoff: 0 }
    }

    /// Timeout for the next arming.
    pub fn timeout_ns(&self, rtt_estimate_ns: f64) -> f64 {
        self.multiplier * rtt_estimate_ns * f64::powi(2.0, self.backoff as i32)
    }

    /// A consecutive expiry doubles the next timeout.
    pub fn expire(&mut self) {
        self.backoff = (self.backoff + 1).min(30);
    }

    pub fn reset(&mut self) {
        self.backoff = 0;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AckDecision {
    /// In-order progress: cumulative ack up to `epsn`.
    Ack { epsn: u32 },
    /// Out-of-order state report.
    Sack { epsn: u32, bitmap: u64 },
    /// First out-of-order arrival for this gap under Go-Back-N.
    Nak { epsn: u32 },
    /// Duplicate of an already delivered psn: re-ack.
    Duplicate { epsn: u32 },
    /// Out-of-order arrival whose gap was already reported.
    Silent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RxOutcome {
    pub delivered: Vec<u32>,
    pub ack: AckDecision,
}

#[derive(Debug, Clone)]
pub struct RxState {
    pub epsn: u32,
    pub sack_bitmap: u64,
    pub max_rcv_psn: Option<u32>,
    scheme: Scheme,
    nak_for: Option<u32>,
}

impl RxState {
    pub fn new(scheme: Scheme) -> Self {
        RxState { epsn: 0, sack_bitmap: 0, max_rcv_psn: None, scheme, nak_for: None }
    }

    pub fn receive(&mut self, psn: u32) -> Result<RxOutcome, TransportError> {
        if psn < self.epsn {
            return Ok(RxOutcome { delivered: Vec::new(), ack: AckDecision::Duplicate { epsn: self.epsn } });
        }
        let off = psn - self.epsn;
        if off >= 64 {
            return Err(TransportError::OutOfWindow { psn, epsn: self.epsn });
        }
        self.max_rcv_psn = Some(self.max_rcv_psn.map_or(psn, |m| m.max(psn)));
        if off == 0 {
            let mut delivered = vec![psn];
            self.epsn += 1;
            self.sack_bitmap >>= 1;
            while self.sack_bitmap & 1 == 1 {
                delivered.push(self.epsn);
                self.epsn += 1;
                self.sack_bitmap >>= 1;
            }
            let ack = if self.sack_bitmap == 0 {
                AckDecision::Ack { epsn: self.epsn }
            } else {
                AckDecision::Sack { epsn: self.epsn, bitmap: self.sack_bitmap }
            };
            return Ok(RxOutcome { delivered, ack });
        }
        let ack = match self.scheme {
            Scheme::Sack => {
                self.sack_bitmap |= 1u64 << off;
                AckDecision::Sack { epsn: self.epsn, bitmap: self.sack_bitmap }
            }
            Scheme::GoBackN => {
                if self.nak_for == Some(self.epsn) {
                    AckDecision::Silent
                } else {
                    self.nak_for = Some(self.epsn);
                    AckDecision::Nak { epsn: self.epsn }
                }
            }
        };
        Ok(RxOutcome { delivered: Vec::new(), ack })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AckMode {
    /// A transport ack per packet plus a transaction ack.
    PerPacketTpack,
    /// Transaction-level ack plus the transport ack for its last packet.
    TransactionTaack,
    /// Transport ack carries the transaction ack on the same flit.
    Fused,
}

impl AckMode {
    /// Ack flits returned for a transaction of `packets` packets.
    pub fn ack_flits(self, packets: u32) -> u32 {
        match self {
            AckMode::PerPacketTpack => packets + 1,
            AckMode::TransactionTaack => 2,
            AckMode::Fused => 1,
        }
    }

    /// Fusing requires the lightweight reliable service mode.
    pub fn admissible(self, mode: crate::wire::ServiceMode) -> bool {
        self != AckMode::Fused || mode == crate::wire::ServiceMode::Rol
    }
}

/// Per-op delay at a PSN allocator shared by `sharers` Jetties issuing
/// back to back: each op waits out every sharer's allocation slot.
pub fn psn_sharing_delay_ns(sharers: u32) -> f64 {
    PSN_ALLOC_NS * sharers as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Opcode;

    fn hdr() -> PacketHeader {
        PacketHeader { opcode: Opcode::Write, ..Default::default() }
    }

    #[test]
    fn psn_allocation_is_monotone_and_windowed() {
        let mut tx = TxWindow::new(DEFAULT_WINDOW);
        assert_eq!(tx.allocate_psn(), Ok(0));
        assert_eq!(tx.allocate_psn(), Ok(1));
        for _ in 2..32 {
            tx.allocate_psn().unwrap();
        }
        assert_eq!(tx.allocate_psn(), Err(TransportError::WindowFull(32)));
        tx.on_cumulative_ack(1);
        assert_eq!(tx.allocate_psn(), Ok(32));
    }

    #[test]
    fn sharing_delay() {
        assert_eq!(psn_sharing_delay_ns(3), 15.0);
        assert_eq!(psn_sharing_delay_ns(1), 5.0);
    }

    #[test]
    fn rx_in_order_and_reorder() {
        let mut rx = RxState::new(Scheme::Sack);
        for p in 0..3 {
            assert_eq!(rx.receive(p).unwrap().delivered, vec![p]);
        }
        assert_eq!(rx.epsn, 3);

        let mut rx = RxState::new(Scheme::Sack);
        let a = rx.receive(1).unwrap();
        assert!(a.delivered.is_empty());
        assert_eq!(a.ack, AckDecision::Sack { epsn: 0, bitmap: 0b10 });
        let b = rx.receive(0).unwrap();
        assert_eq!(b.delivered, vec![0, 1]);
        assert_eq!(rx.epsn, 2);
        assert_eq!(rx.sack_bitmap, 0);
    }

    #[test]
    fn rx_duplicate_and_window() {
        let mut rx = RxState::new(Scheme::Sack);
        rx.receive(0).unwrap();
        let d = rx.receive(0).unwrap();
        assert!(d.delivered.is_empty());
        assert_eq!(d.ack, AckDecision::Duplicate { epsn: 1 });
        assert_eq!(rx.receive(65), Err(TransportError::OutOfWindow { psn: 65, epsn: 1 }));
        assert_eq!(rx.epsn, 1);
    }

    #[test]
    fn gbn_receiver_naks_once_per_gap() {
        let mut rx = RxState::new(Scheme::GoBackN);
        assert_eq!(rx.receive(1).unwrap().ack, AckDecision::Nak { epsn: 0 });
        assert_eq!(rx.receive(2).unwrap().ack, AckDecision::Silent);
        assert_eq!(rx.sack_bitmap, 0);
        assert_eq!(rx.receive(0).unwrap().delivered, vec![0]);
        assert_eq!(rx.receive(2).unwrap().ack, AckDecision::Nak { epsn: 1 });
    }

    fn window_with_32_from_5() -> TxWindow {
        let mut tx = TxWindow::new(DEFAULT_WINDOW);
        for _ in 0..37 {
            if tx.push(hdr(), &[]).is_err() {
                tx.on_cumulative_ack(5);
                tx.push(hdr(), &[]).unwrap();
            }
        }
        assert_eq!(tx.last_acked(), 5);
        assert_eq!(tx.in_flight(), 32);
        tx
    }

    #[test]
    fn gbn_resends_whole_window() {
        let tx = window_with_32_from_5();
        let set = tx.recover(Trigger::Nak(5), Scheme::GoBackN);
        assert_eq!(set, (5..37).collect::<Vec<_>>());
    }

    #[test]
    fn sack_resends_only_hole() {
        let mut tx = window_with_32_from_5();
        // everything after 5 arrived
        let bitmap = !0u64 << 1 & ((1u64 << 32) - 1);
        tx.on_sack(5, bitmap);
        assert_eq!(tx.recover(Trigger::Sack { base: 5, bitmap }, Scheme::Sack), vec![5]);
        assert_eq!(tx.recover(Trigger::Nak(5), Scheme::Sack), vec![5]);
        assert_eq!(tx.recover(Trigger::Rto, Scheme::Sack), vec![5]);
    }

    #[test]
    fn empty_window_rto_is_empty() {
        let tx = TxWindow::new(8);
        assert!(tx.recover(Trigger::Rto, Scheme::GoBackN).is_empty());
        assert!(tx.recover(Trigger::Rto, Scheme::Sack).is_empty());
    }

    #[test]
    fn rto_backoff() {
        let mut r = Rto::default();
        assert_eq!(r.timeout_ns(400.0), 1200.0);
        r.expire();
        assert_eq!(r.timeout_ns(400.0), 2400.0);
        r.reset();
        assert_eq!(r.timeout_ns(400.0), 1200.0);
    }

    #[test]
    fn ack_clears_backoff() {
        let mut tx = TxWindow::new(8);
        tx.push(hdr(), &[]).unwrap();
        tx.rto.expire();
        tx.on_cumulative_ack(1);
        assert_eq!(tx.rto.backoff, 0);
        assert_eq!(tx.in_flight(), 0);
    }

    #[test]
    fn ring_keeps_header_and_inline() {
        let mut tx = TxWindow::new(8);
        let psn = tx.push(hdr(), &[1, 2, 3]).unwrap();
        let e = tx.entry(psn).unwrap();
        assert_eq!(e.header.psn, psn);
        assert_eq!(&e.inline[..3], &[1, 2, 3]);
    }

    #[test]
    fn fused_saves_one_flit() {
        assert_eq!(AckMode::TransactionTaack.ack_flits(1) - AckMode::Fused.ack_flits(1), 1);
        assert_eq!(AckMode::PerPacketTpack.ack_flits(1) - AckMode::Fused.ack_flits(1), 1);
        assert!(!AckMode::Fused.admissible(crate::wire::ServiceMode::Roi));
        assert!(AckMode::Fused.admissible(crate::wire::ServiceMode::Rol));
    }
}
