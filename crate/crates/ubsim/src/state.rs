//! Connection-state records, state-size arithmetic, the NIC context-cache
//! spill model, and Jetty-Group dispatch.

use crate::stack::Family;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("unknown jetty group {0}")]
    UnknownGroup(u32),
    #[error("jetty group {0} has no members")]
    EmptyGroup(u32),
}

/// (field, bytes) rows of the minimal Jetty descriptor.
pub const JETTY_MVP_FIELDS: &[(&str, i64)] =
    &[("jetty_id", 4), ("token_value", 4), ("jfc_id", 4), ("jetty_type", 1), ("state", 1), ("valid", 1), ("pad", 5)];

/// Extra rows carried by the full-spec descriptor on top of the minimal one.
pub const JETTY_FULL_EXTRA_FIELDS: &[(&str, i64)] = &[
    ("sq_rq_handle", 8),
    ("jfae_id", 4),
    ("public_owner", 4),
    ("drain_bookkeeping", 6),
    ("exception_mode", 1),
    ("fault_counter", 2),
    ("mr_perm_idx", 2),
    ("group_backptr", 4),
    ("alignment", -3),
];

pub const TP_CHANNEL_FIELDS: &[(&str, i64)] = &[
    ("remote_cna", 4),
    ("local_remote_tpn", 8),
    ("psn_next", 4),
    ("tpmsn_next", 4),
    ("last_acked", 4),
    ("flags", 2),
    ("epsn", 4),
    ("emsn", 4),
    ("base_psn", 4),
    ("sack_bitmap", 8),
    ("max_rcv_psn", 4),
    ("mode_flags", 2),
    ("pad", 4),
];

pub const JETTY_MVP_BYTES: u64 = 20;
pub const JETTY_FULL_BYTES: u64 = 48;
pub const TP_CHANNEL_BYTES: u64 = 56;
pub const QP_BYTES: u64 = 512;
/// Per-application memory-region record, shared by both stacks.
pub const MR_BYTES: u64 = 32;
pub const GROUP_BYTES_PER_8: u64 = 80;
/// Default NIC SRAM budget for connection contexts.
pub const CONTEXT_CACHE_BYTES: u64 = 262_144;

pub fn field_sum(rows: &[(&str, i64)]) -> i64 {
    rows.iter().map(|r| r.1).sum()
}

pub fn jetty_bytes(full_spec: bool) -> u64 {
    if full_spec {
        JETTY_FULL_BYTES
    } else {
        JETTY_MVP_BYTES
    }
}

/// N Jetties (each with its MR record) plus M shared TP channels.
pub fn state_bytes_ub(n: u64, m: u64, full_spec: bool) -> u64 {
    n * (jetty_bytes(full_spec) + MR_BYTES) + m * TP_CHANNEL_BYTES
}

/// One QP per (application, remote endpoint) pair plus the per-app MR record.
pub fn state_bytes_roce(n: u64, m: u64) -> u64 {
    n * m * QP_BYTES + n * MR_BYTES
}

/// Decimal kilobytes, as reported in tables.
pub fn kb(bytes: u64) -> f64 {
    bytes as f64 / 1e3
}

pub fn mb(bytes: u64) -> f64 {
    bytes as f64 / 1e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextCache {
    pub capacity: u64,
    pub entry_size: u64,
    /// Calibrated entry ceiling that overrides the byte rule when set.
    pub max_entries: Option<u64>,
    pub spill_penalty_ns: f64,
}

impl ContextCache {
    /// RoCE caches 512 B QP contexts; a spill refetches over PCIe on both sides.
    pub fn roce() -> Self {
        ContextCache {
            capacity: CONTEXT_CACHE_BYTES,
            entry_size: QP_BYTES,
            max_entries: None,
            spill_penalty_ns: 1000.0,
        }
    }

    /// UB holds 1023 live contexts, so 1024 is the first count that spills;
    /// a miss costs a membus crossing plus a local DRAM access on both sides.
    pub fn ub() -> Self {
        ContextCache {
            capacity: CONTEXT_CACHE_BYTES,
            entry_size: JETTY_MVP_BYTES + MR_BYTES + TP_CHANNEL_BYTES,
            max_entries: Some(1023),
            spill_penalty_ns: 200.0,
        }
    }

    pub fn for_family(f: Family) -> Self {
        match f {
            Family::Ub => Self::ub(),
            Family::Roce => Self::roce(),
        }
    }

    pub fn spills(&self, live_contexts: u64) -> bool {
        match self.max_entries {
            Some(max) => live_contexts > max,
            None => live_contexts.saturating_mul(self.entry_size) > self.capacity,
        }
    }

    pub fn spill_lookup(&self, live_contexts: u64) -> f64 {
        if self.spills(live_contexts) {
            self.spill_penalty_ns
        } else {
            0.0
        }
    }
}

/// Per-op spill penalty for an N-endpoint by M-peer deployment.
pub fn spill_penalty(family: Family, n: u64, m: u64) -> f64 {
    match family {
        Family::Roce => ContextCache::roce().spill_lookup(n * m),
        Family::Ub => ContextCache::ub().spill_lookup(n.max(m)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchPolicy {
    HintHash,
    RoundRobin,
    QueueDepth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JettyGroup {
    pub group_id: u32,
    pub members: Vec<u32>,
    pub policy: DispatchPolicy,
    pub rr_cursor: u32,
}

impl JettyGroup {
    pub fn new(group_id: u32, members: Vec<u32>, policy: DispatchPolicy) -> Self {
        JettyGroup { group_id, members, policy, rr_cursor: 0 }
    }

    pub fn state_bytes(&self) -> u64 {
        (self.members.len() as u64).div_ceil(8) * GROUP_BYTES_PER_8
    }

    /// Pick a member index. `queue_depths` is indexed like `members`.
    pub fn dispatch_index(&mut self, hint: u32, queue_depths: &[u32]) -> Result<usize, StateError> {
        let n = self.members.len();
        if n == 0 {
            return Err(StateError::EmptyGroup(self.group_id));
        }
        Ok(match self.policy {
            DispatchPolicy::HintHash => hint as usize % n,
            DispatchPolicy::RoundRobin => {
                let i = self.rr_cursor as usize % n;
                self.rr_cursor = ((i + 1) % n) as u32;
                i
            }
            DispatchPolicy::QueueDepth => {
                (0..n).min_by_key(|&i| (queue_depths.get(i).copied().unwrap_or(0), i)).unwrap()
            }
        })
    }

    pub fn dispatch(&mut self, hint: u32, queue_depths: &[u32]) -> Result<u32, StateError> {
        let i = self.dispatch_index(hint, queue_depths)?;
        Ok(self.members[i])
    }
}

/// Target-side table of registered groups.
#[derive(Debug, Default, Clone)]
pub struct GroupTable {
    groups: BTreeMap<u32, JettyGroup>,
}

impl GroupTable {
    pub fn register(&mut self, g: JettyGroup) {
        self.groups.insert(g.group_id, g);
    }

    pub fn group_dispatch(&mut self, id: u32, hint: u32, queue_depths: &[u32]) -> Result<u32, StateError> {
        self.groups.get_mut(&id).ok_or(StateError::UnknownGroup(id))?.dispatch(hint, queue_depths)
    }

    /// Resolve a destination id: groups dispatch, anything else passes through.
    pub fn resolve(&mut self, id: u32, hint: u32, queue_depths: &[u32]) -> u32 {
        match self.group_dispatch(id, hint, queue_depths) {
            Ok(j) => j,
            Err(_) => id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabricState {
    pub ub: f64,
    pub roce: f64,
    pub cxl_dir: f64,
    pub nvlink: f64,
}

/// Coherence-directory entries tracked per node group.
pub const CXL_DIR_ENTRIES: f64 = 1.0e6;
/// HBM mapped per peer in a GPU peer-mapping fabric.
pub const NVLINK_BYTES_PER_PEER: f64 = 2.0e9;

/// Closed-form fabric state for an N-node deployment, in bytes.
pub fn fabric_state_curves(n: u64) -> FabricState {
    let nf = n as f64;
    FabricState {
        ub: ((JETTY_FULL_BYTES + MR_BYTES + TP_CHANNEL_BYTES) * n) as f64,
        roce: (QP_BYTES * n * n) as f64,
        cxl_dir: CXL_DIR_ENTRIES * (nf / 8.0 + 8.0),
        nvlink: NVLINK_BYTES_PER_PEER * nf,
    }
}
