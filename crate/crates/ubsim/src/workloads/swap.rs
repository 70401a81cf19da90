//! Page-swap far memory over RoCE: resident pages hit local DRAM, faults pay
//! the kernel page-fault path plus a 4 KB DMA fetch.

use crate::costmodel::{roundtrip_decompose, CostParams, Lru};
use crate::stack::Stack;
use crate::wire::Opcode;

pub const PAGE_BYTES: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SwapProfile {
    pub name: &'static str,
    pub kernel_pf_ns: f64,
    pub page_bytes: u64,
    /// Pages brought in per fault, the faulting page included.
    pub prefetch_pages: u64,
    pub resident_cap: usize,
}

impl SwapProfile {
    pub fn infiniswap() -> Self {
        SwapProfile {
            name: "infiniswap",
            kernel_pf_ns: 3000.0,
            page_bytes: PAGE_BYTES,
            prefetch_pages: 1,
            resident_cap: 16_384,
        }
    }

    pub fn fastswap() -> Self {
        SwapProfile {
            name: "fastswap",
            kernel_pf_ns: 1000.0,
            page_bytes: PAGE_BYTES,
            prefetch_pages: 8,
            resident_cap: 16_384,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapOutcome {
    pub latency_ns: f64,
    pub fault: bool,
}

#[derive(Debug, Clone)]
pub struct SwapSim {
    pub profile: SwapProfile,
    resident: Lru,
    hit_ns: f64,
    fault_ns: f64,
    pub faults: u64,
}

impl SwapSim {
    pub fn new(profile: SwapProfile, p: &CostParams) -> Self {
        let fetch = roundtrip_decompose(Stack::RoceDma, Opcode::Read, profile.page_bytes as usize, p).unwrap();
        // prefetched pages queue behind the demand fetch; each adds whichever
        // of the host path or the NIC payload pipeline is slower
        let per_extra = fetch.host_path_ns().max(fetch.get("payload_pipeline").unwrap_or(0.0));
        let fault_ns = profile.kernel_pf_ns + fetch.measured_ns() + (profile.prefetch_pages - 1) as f64 * per_extra;
        SwapSim { resident: Lru::new(profile.resident_cap), profile, hit_ns: p.local_dram, fault_ns, faults: 0 }
    }

    pub fn fault_ns(&self) -> f64 {
        self.fault_ns
    }
}

/// One 64 B access at byte address `addr`.
pub fn swap_access(sim: &mut SwapSim, addr: u64) -> SwapOutcome {
    let page = addr / sim.profile.page_bytes;
    if sim.resident.touch(page) {
        return SwapOutcome { latency_ns: sim.hit_ns, fault: false };
    }
    for k in 0..sim.profile.prefetch_pages {
        sim.resident.insert(page + k);
    }
    // the faulting page is the most recently used one
    sim.resident.touch(page);
    sim.faults += 1;
    SwapOutcome { latency_ns: sim.fault_ns, fault: true }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_after_fault() {
        let p = CostParams::default();
        let mut s = SwapSim::new(SwapProfile::infiniswap(), &p);
        assert!(swap_access(&mut s, 100).fault);
        let h = swap_access(&mut s, 200);
        assert!(!h.fault);
        assert_eq!(h.latency_ns, 70.0);
        assert!(swap_access(&mut s, 4096).fault);
    }

    #[test]
    fn prefetch_covers_next_pages() {
        let p = CostParams::default();
        let mut s = SwapSim::new(SwapProfile::fastswap(), &p);
        assert!(swap_access(&mut s, 0).fault);
        for pg in 1..8 {
            assert!(!swap_access(&mut s, pg * 4096).fault);
        }
        assert!(swap_access(&mut s, 8 * 4096).fault);
    }

    #[test]
    fn eviction_at_cap() {
        let p = CostParams::default();
        let prof = SwapProfile { resident_cap: 2, ..SwapProfile::infiniswap() };
        let mut s = SwapSim::new(prof, &p);
        for pg in 0..3 {
            swap_access(&mut s, pg * 4096);
        }
        assert!(swap_access(&mut s, 0).fault);
    }
}
