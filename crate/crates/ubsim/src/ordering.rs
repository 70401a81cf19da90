//! Opt-in ordering: per-Jetty gating counters, fence latch, execution-tag
//! gating, and the completion reorder buffer.

use crate::stack::Family;
use crate::wire::{ExecTag, ServiceMode};
use std::collections::BTreeSet;

/// Initiator order-tracker cost when a gate actually holds an op.
pub const UB_GATE_NS: f64 = 20.0;
/// Per-QP PSN serialization RoCE pays on every WR.
pub const ROCE_ORDER_NS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OrderingMode {
    pub service_mode: ServiceMode,
    pub exec_tag: ExecTag,
    pub fence: bool,
    pub completion_order: bool,
}

impl OrderingMode {
    pub fn new(service_mode: ServiceMode, exec_tag: ExecTag) -> Self {
        OrderingMode { service_mode, exec_tag, ..Default::default() }
    }

    /// All 12 service-mode by execution-tag combinations.
    pub fn combinations() -> impl Iterator<Item = OrderingMode> {
        ServiceMode::ALL.into_iter().flat_map(|m| ExecTag::ALL.into_iter().map(move |t| OrderingMode::new(m, t)))
    }

    /// UNO emits no transaction-layer ack.
    pub fn emits_transaction_ack(&self) -> bool {
        self.service_mode != ServiceMode::Uno
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Emit,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct JettyOrderState {
    pub issue_seq: u64,
    pub completed_seq: u64,
    /// Issue count a latched fence waits for.
    pub fence_latched: Option<u64>,
}

impl JettyOrderState {
    pub fn outstanding(&self) -> u64 {
        self.issue_seq - self.completed_seq
    }

    /// May the issue stage emit an op with this mode now?
    pub fn gate_check(&mut self, mode: &OrderingMode) -> Gate {
        if mode.fence && self.fence_latched.is_none() {
            self.fence_latched = Some(self.issue_seq);
        }
        if let Some(target) = self.fence_latched {
            if self.completed_seq < target {
                return Gate::Hold;
            }
            self.fence_latched = None;
        }
        match mode.exec_tag {
            ExecTag::So if self.outstanding() > 0 => Gate::Hold,
            _ => Gate::Emit,
        }
    }

    pub fn on_issue(&mut self) -> u64 {
        let seq = self.issue_seq;
        self.issue_seq += 1;
        seq
    }

    pub fn on_complete(&mut self) {
        assert!(self.completed_seq < self.issue_seq, "completion without issue");
        self.completed_seq += 1;
    }
}

/// Ordering cost charged to one op.
pub fn gating_delay_ns(family: Family, gated: bool) -> f64 {
    match family {
        Family::Ub if gated => UB_GATE_NS,
        Family::Ub => 0.0,
        Family::Roce => ROCE_ORDER_NS,
    }
}

/// Releases completions either in arrival order or strictly in issue order.
#[derive(Debug, Clone, Default)]
pub struct CompletionReorderBuffer {
    pub completion_order: bool,
    cursor: u64,
    pending: BTreeSet<u64>,
}

impl CompletionReorderBuffer {
    pub fn new(completion_order: bool) -> Self {
        CompletionReorderBuffer { completion_order, cursor: 0, pending: BTreeSet::new() }
    }

    pub fn release_completions(&mut self, seq: u64) -> Vec<u64> {
        if !self.completion_order {
            return vec![seq];
        }
        if seq >= self.cursor {
            self.pending.insert(seq);
        }
        let mut out = Vec::new();
        while self.pending.remove(&self.cursor) {
            out.push(self.cursor);
            self.cursor += 1;
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_combinations() {
        assert_eq!(OrderingMode::combinations().count(), 12);
        let uno = OrderingMode::new(ServiceMode::Uno, ExecTag::No);
        assert!(!uno.emits_transaction_ack());
    }

    #[test]
    fn no_tag_never_gates() {
        let mut j = JettyOrderState::default();
        for _ in 0..10 {
            j.on_issue();
        }
        assert_eq!(j.gate_check(&OrderingMode::default()), Gate::Emit);
    }

    #[test]
    fn so_waits_for_outstanding_ro() {
        let mut j = JettyOrderState::default();
        assert_eq!(j.gate_check(&OrderingMode::new(ServiceMode::Roi, ExecTag::Ro)), Gate::Emit);
        j.on_issue();
        let so = OrderingMode::new(ServiceMode::Roi, ExecTag::So);
        assert_eq!(j.gate_check(&so), Gate::Hold);
        j.on_complete();
        assert_eq!(j.gate_check(&so), Gate::Emit);
    }

    #[test]
    fn fence_holds_until_prior_complete() {
        let mut j = JettyOrderState::default();
        j.on_issue();
        j.on_issue();
        let fenced = OrderingMode { fence: true, ..Default::default() };
        assert_eq!(j.gate_check(&fenced), Gate::Hold);
        j.on_complete();
        assert_eq!(j.gate_check(&fenced), Gate::Hold);
        j.on_complete();
        assert_eq!(j.gate_check(&fenced), Gate::Emit);
        assert_eq!(j.fence_latched, None);
    }

    #[test]
    fn gating_costs() {
        assert_eq!(gating_delay_ns(Family::Ub, false), 0.0);
        assert_eq!(gating_delay_ns(Family::Ub, true), 20.0);
        assert_eq!(gating_delay_ns(Family::Roce, false), 50.0);
    }

    #[test]
    fn ordered_release_example() {
        let mut c = CompletionReorderBuffer::new(true);
        assert_eq!(c.release_completions(2), Vec::<u64>::new());
        assert_eq!(c.release_completions(0), vec![0]);
        assert_eq!(c.release_completions(1), vec![1, 2]);
        let mut u = CompletionReorderBuffer::new(false);
        assert_eq!(u.release_completions(2), vec![2]);
        assert_eq!(u.release_completions(0), vec![0]);
    }

    #[test]
    fn all_three_arrival_orders() {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            let mut c = CompletionReorderBuffer::new(true);
            let mut released = Vec::new();
            for (k, &s) in p.iter().enumerate() {
                released.extend(c.release_completions(s));
                // brute-force oracle: longest issue-order prefix of what has arrived
                let arrived: BTreeSet<u64> = p[..=k].iter().copied().collect();
                let prefix = (0..).take_while(|i| arrived.contains(i)).count();
                assert_eq!(released, (0..prefix as u64).collect::<Vec<_>>());
            }
            assert_eq!(released, vec![0, 1, 2]);
        }
    }
}
