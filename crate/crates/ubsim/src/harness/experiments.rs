//! One function per experiment. Each returns a [`Table`] whose rows are
//! fully determined by the context.

use super::{grid, Ctx, Experiment, HarnessError, Kind, Table, Unit};
use crate::congestion::{
    element_test, steady_state_utilisation, Bottleneck, CaqmParams, Controller, DcqcnParams, ElementTest,
};
use crate::costmodel::{
    coherent_fabric_overlay, decompose_with, roundtrip_decompose, verb_direction_delta, CachePolicy, PathOptions,
    PER_SIDE_ROWS,
};
use crate::engine::loss::{loss_summary, LossConfig};
use crate::engine::{open_loop_envelope, run, Arrivals, CacheConfig, IssueModel, RunStats, SimConfig};
use crate::ordering::OrderingMode;
use crate::stack::{Family, Stack};
use crate::state::{fabric_state_curves, kb, mb, state_bytes_roce, state_bytes_ub};
use crate::transport::AckMode;
use crate::wire::{Opcode, ServiceMode};
use crate::workloads::{
    cas_time_to_acquire, conn_setup_time, m2n_latency, mesh_latency, swap_access, tp_sharing_crossover,
    tp_sharing_latency, SwapProfile, SwapSim, WorkloadSpec,
};

pub static REGISTRY: &[Experiment] = &[
    exp(
        "per_side_table",
        "Per-component round-trip decomposition of a 64 B read",
        Kind::Analytical,
        &["component"],
        &[],
        per_side_table,
    ),
    exp(
        "headline",
        "Mean latency per verb and stack at the headline operating point",
        Kind::Analytical,
        &["verb"],
        &[],
        headline,
    ),
    exp("verb_asymmetry", "Read minus write latency per stack", Kind::Analytical, &["verb"], &[], verb_asymmetry),
    exp("payload_scaling", "Read latency from 8 B to 64 KB", Kind::Analytical, &["payload"], &[], payload_scaling),
    exp(
        "state_scaling",
        "Connection-state bytes for N endpoints by M peers",
        Kind::Analytical,
        &["n", "m", "jetty_spec"],
        &[],
        state_scaling,
    ),
    exp(
        "fabric_state",
        "State growth of four fabric designs against node count",
        Kind::Analytical,
        &["n"],
        &[],
        fabric_state,
    ),
    exp(
        "coherent_overlay",
        "Throughput of a reset-on-loss coherent fabric",
        Kind::Analytical,
        &["loss_rate"],
        &["t_base", "t_reset"],
        coherent_overlay,
    ),
    exp(
        "sram_spill",
        "64 B read latency against live connection contexts",
        Kind::Stochastic,
        &["n"],
        &["ops"],
        sram_spill,
    ),
    exp("m2n", "Per-op latency fanning out to K targets", Kind::Analytical, &["k"], &[], m2n),
    exp(
        "cas_contention",
        "Time for the last of K contenders to take a CAS lock",
        Kind::Analytical,
        &["k"],
        &[],
        cas_contention,
    ),
    exp("conn_setup", "Connection setup time for an N by M deployment", Kind::Analytical, &["n", "m"], &[], conn_setup),
    exp("tp_sharing", "Shared transport channel against per-connection QPs", Kind::Analytical, &["k"], &[], tp_sharing),
    exp("mesh", "Per-op latency in an N-node all-to-all mesh", Kind::Analytical, &["nodes"], &[], mesh),
    exp(
        "loss_goodput",
        "Goodput and tail latency under random packet loss",
        Kind::Stochastic,
        &["loss_rate"],
        &["ops"],
        loss_goodput,
    ),
    exp(
        "congestion",
        "Congestion-control utilisation and the element test",
        Kind::Stochastic,
        &["controller"],
        &[],
        congestion,
    ),
    exp(
        "jitter_cdf",
        "Latency distribution under PCIe and wire jitter",
        Kind::Stochastic,
        &["jitter_factor", "quantile"],
        &["trials"],
        jitter_cdf,
    ),
    exp(
        "mixed_order",
        "Strict-order fraction, ordering modes, and head-of-line isolation",
        Kind::Stochastic,
        &["so_fraction", "service_mode", "exec_tag", "jetty", "stalled"],
        &["ops"],
        mixed_order,
    ),
    exp("fused_ack", "Fused transport and transaction acks", Kind::Stochastic, &["ack_mode"], &["ops"], fused_ack),
    exp(
        "swap_compare",
        "Far-memory paging against load/store",
        Kind::Stochastic,
        &["workload"],
        &["ops"],
        swap_compare,
    ),
    exp("ycsb", "YCSB-A application throughput at 256 clients", Kind::Stochastic, &[], &["ops", "clients"], ycsb),
    exp(
        "envelope",
        "Open-loop latency against offered rate",
        Kind::Stochastic,
        &["arrivals", "offered_mops"],
        &["ops"],
        envelope,
    ),
    exp("concurrency", "Op rate against in-flight depth", Kind::Stochastic, &["depth"], &["ops"], concurrency),
    exp(
        "link_delay",
        "Pointer-chase latency against one-way link delay",
        Kind::Stochastic,
        &["link_delay"],
        &["ops"],
        link_delay,
    ),
    exp(
        "cache_policy",
        "Load/store latency against cache policy and locality",
        Kind::Stochastic,
        &["policy", "locality"],
        &["ops"],
        cache_policy,
    ),
    exp("grid", "Full configuration grid", Kind::Stochastic, grid::COLUMNS, &["ops"], grid::run_grid),
];

const fn exp(
    name: &'static str,
    about: &'static str,
    kind: Kind,
    params: &'static [&'static str],
    knobs: &'static [&'static str],
    run: super::RunFn,
) -> Experiment {
    Experiment { name, about, kind, params, knobs, run }
}

fn table(name: &str, ctx: &Ctx) -> Table {
    let e = super::find(name).expect("registered");
    Table::new(name, ctx.seed, e.params)
}

/// Shortest decimal form, so `0.15` stays `0.15`.
pub(super) fn num(x: f64) -> String {
    format!("{x}")
}

pub(super) fn verb_name(v: Opcode) -> String {
    format!("{v:?}").to_lowercase()
}

/// Engine config with the context's parameters, seed, and link.
pub(super) fn sim(ctx: &Ctx, stack: Stack, workload: WorkloadSpec) -> SimConfig {
    let mut c = SimConfig::new(stack, workload);
    c.params = ctx.params.clone();
    c.link.delay_ns = ctx.params.wire_delay;
    c.link.bandwidth_gbps = ctx.params.wire_bandwidth;
    c.seed = ctx.seed;
    c
}

fn ops(ctx: &Ctx, default: u64) -> Result<u64, HarnessError> {
    let n = ctx.knob_u64("ops", default)?;
    if n == 0 {
        return Err(HarnessError::ConfigInvalid("ops must be >= 1".into()));
    }
    Ok(n)
}

const READ_STACKS: [Stack; 3] = [Stack::UbLdst, Stack::UbUrma, Stack::RoceDma];

/// The verb a stack uses for a remote 64 B fetch.
fn fetch_verb(s: Stack) -> Opcode {
    if s == Stack::UbLdst {
        Opcode::Load
    } else {
        Opcode::Read
    }
}

fn per_side_table(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("per_side_table", ctx);
    for s in READ_STACKS {
        let d = roundtrip_decompose(s, fetch_verb(s), 64, &ctx.params)?;
        for row in PER_SIDE_ROWS {
            t.push(s.name(), &[("component", row.into())], "latency", d.get(row).unwrap_or(0.0), Unit::Ns);
        }
        t.push(s.name(), &[("component", "modeled_total".into())], "latency", d.modeled_ns(), Unit::Ns);
        t.push(s.name(), &[("component", "sched_overhead".into())], "latency", d.overhead_ns, Unit::Ns);
        t.push(s.name(), &[("component", "measured_total".into())], "latency", d.measured_ns(), Unit::Ns);
    }
    Ok(t)
}

/// Verbs of the headline table; atomics carry an 8 B operand.
const HEADLINE_VERBS: [(Opcode, usize); 6] = [
    (Opcode::Load, 64),
    (Opcode::Read, 64),
    (Opcode::Write, 64),
    (Opcode::Send, 64),
    (Opcode::Faa, 8),
    (Opcode::Cas, 8),
];

fn headline(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("headline", ctx);
    let p = &ctx.params;
    let measured = |s: Stack, v: Opcode, n: usize| -> Result<f64, HarnessError> {
        let s = crate::costmodel::route(s, v);
        Ok(roundtrip_decompose(s, v, n, p)?.measured_ns())
    };
    for (verb, n) in HEADLINE_VERBS {
        let vn = verb_name(verb);
        for s in Stack::ALL {
            // the load/store column runs LOAD natively and READ only as a LOAD
            let cell = match (s, verb) {
                (Stack::UbLdst, Opcode::Read) => false,
                (Stack::UbLdst, _) => true,
                (_, Opcode::Load) => false,
                _ => true,
            };
            if cell {
                t.push(s.name(), &[("verb", vn.clone())], "latency", measured(s, verb, n)?, Unit::Ns);
            }
        }
        let dma = measured(Stack::RoceDma, if verb == Opcode::Load { Opcode::Read } else { verb }, n)?;
        let ub = if verb == Opcode::Load { Stack::UbLdst } else { Stack::UbUrma };
        t.push(&format!("roce_dma/{}", ub.name()), &[("verb", vn)], "ratio", dma / measured(ub, verb, n)?, Unit::Ratio);
    }
    Ok(t)
}

fn verb_asymmetry(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("verb_asymmetry", ctx);
    for s in Stack::ALL {
        let (r, w) = if s == Stack::UbLdst { (Opcode::Load, Opcode::Store) } else { (Opcode::Read, Opcode::Write) };
        for v in [r, w] {
            let m = roundtrip_decompose(s, v, 64, &ctx.params)?.measured_ns();
            t.push(s.name(), &[("verb", verb_name(v))], "latency", m, Unit::Ns);
        }
        t.push(s.name(), &[], "read_minus_write", verb_direction_delta(s, &ctx.params), Unit::Ns);
    }
    Ok(t)
}

pub(super) const PAYLOADS: [usize; 8] = [8, 64, 256, 1024, 4096, 16384, 32768, 65536];

fn payload_scaling(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("payload_scaling", ctx);
    for n in PAYLOADS {
        let cell = [("payload", n.to_string())];
        let mut lat = [0.0; 4];
        for (i, s) in Stack::ALL.into_iter().enumerate() {
            lat[i] = roundtrip_decompose(s, fetch_verb(s), n, &ctx.params)?.measured_ns();
            t.push(s.name(), &cell, "latency", lat[i], Unit::Ns);
        }
        t.push("roce_dma/ub_ldst", &cell, "ratio", lat[3] / lat[0], Unit::Ratio);
    }
    Ok(t)
}

fn state_scaling(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("state_scaling", ctx);
    let mut sizes: Vec<u64> = (0..=12).map(|k| 1u64 << k).collect();
    sizes.insert(4, 8);
    sizes.dedup();
    for n in sizes {
        let cells = |spec: &str| [("n", n.to_string()), ("m", n.to_string()), ("jetty_spec", spec.to_string())];
        let roce = state_bytes_roce(n, n);
        t.push("roce", &cells(""), "bytes", roce as f64, Unit::Bytes);
        for (spec, full) in [("mvp", false), ("full", true)] {
            let ub = state_bytes_ub(n, n, full);
            t.push("ub", &cells(spec), "bytes", ub as f64, Unit::Bytes);
            t.push("roce/ub", &cells(spec), "ratio", roce as f64 / ub as f64, Unit::Ratio);
        }
    }
    // the table's display units
    let big = [("n", "1024".to_string()), ("m", "1024".to_string()), ("jetty_spec", "mvp".to_string())];
    t.push("ub", &big, "kilobytes", kb(state_bytes_ub(1024, 1024, false)), Unit::Kilobytes);
    let big = [("n", "1024".to_string()), ("m", "1024".to_string())];
    t.push("roce", &big, "megabytes", mb(state_bytes_roce(1024, 1024)), Unit::Megabytes);
    Ok(t)
}

fn fabric_state(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("fabric_state", ctx);
    let mut ns: Vec<u64> = (0..=10).map(|k| 1u64 << k).collect();
    ns.push(40);
    ns.sort_unstable();
    for n in ns {
        let f = fabric_state_curves(n);
        let cell = [("n", n.to_string())];
        for (name, v) in [("ub", f.ub), ("roce", f.roce), ("cxl_dir", f.cxl_dir), ("nvlink", f.nvlink)] {
            t.push(name, &cell, "bytes", v, Unit::Bytes);
        }
    }
    Ok(t)
}

fn coherent_overlay(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("coherent_overlay", ctx);
    let t_base = ctx.knob_f64("t_base", 500.0)?;
    let t_reset = ctx.knob_f64("t_reset", 1e6)?;
    if !(t_base > 0.0 && t_reset >= 0.0) {
        return Err(HarnessError::ConfigInvalid("t_base must be > 0 and t_reset >= 0".into()));
    }
    for l in [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2] {
        let ops = coherent_fabric_overlay(l, t_base, t_reset);
        t.push("coherent_fabric", &[("loss_rate", num(l))], "throughput", ops / 1e6, Unit::Mops);
    }
    Ok(t)
}

const SPILL_N: [u64; 17] = [1, 2, 4, 8, 16, 22, 23, 24, 32, 64, 128, 256, 512, 1023, 1024, 1025, 2048];

fn sram_spill(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("sram_spill", ctx);
    let n_ops = ops(ctx, 200)?;
    for s in [Stack::UbUrma, Stack::RoceDma] {
        for n in SPILL_N {
            let mut c = sim(ctx, s, WorkloadSpec::BulkRead { payload: 64 });
            c.ops = n_ops;
            // RoCE needs a QP per endpoint pair; UB one context per endpoint
            c.live_contexts = if s.family() == Family::Roce { n * n } else { n };
            let r = run(&c)?;
            t.push(s.name(), &[("n", n.to_string())], "latency", r.mean(), Unit::Ns);
        }
    }
    Ok(t)
}

const FANOUT_K: [u32; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

fn m2n(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("m2n", ctx);
    for s in [Stack::UbUrma, Stack::RoceDma] {
        for k in FANOUT_K {
            t.push(s.name(), &[("k", k.to_string())], "latency", m2n_latency(k, s, &ctx.params), Unit::Ns);
        }
    }
    Ok(t)
}

fn cas_contention(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("cas_contention", ctx);
    for s in [Stack::UbUrma, Stack::RoceDma] {
        for k in FANOUT_K {
            let v = cas_time_to_acquire(k, s, &ctx.params);
            t.push(s.name(), &[("k", k.to_string())], "time_to_acquire", v, Unit::Ns);
        }
    }
    Ok(t)
}

fn conn_setup(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("conn_setup", ctx);
    for f in [Family::Ub, Family::Roce] {
        for n in [1u32, 16, 64, 256, 1024] {
            let cells = [("n", n.to_string()), ("m", n.to_string())];
            t.push(f.name(), &cells, "setup_time", conn_setup_time(f, n, n), Unit::Seconds);
        }
    }
    Ok(t)
}

fn tp_sharing(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("tp_sharing", ctx);
    let cross = tp_sharing_crossover(&ctx.params);
    let mut ks: Vec<u32> = (0..=10).map(|i| 1u32 << i).collect();
    ks.extend([255, cross - 1, cross, cross + 1]);
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        let (ub, roce) = tp_sharing_latency(k, &ctx.params);
        t.push("ub_urma", &[("k", k.to_string())], "latency", ub, Unit::Ns);
        t.push("roce_dma", &[("k", k.to_string())], "latency", roce, Unit::Ns);
    }
    t.push("ub_urma", &[], "crossover_k", cross as f64, Unit::Count);
    Ok(t)
}

fn mesh(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("mesh", ctx);
    for f in [Family::Ub, Family::Roce] {
        for n in [2u32, 4, 8, 16, 22, 23, 24, 32, 64] {
            t.push(f.name(), &[("nodes", n.to_string())], "latency", mesh_latency(n, f, &ctx.params), Unit::Ns);
        }
    }
    Ok(t)
}

fn loss_goodput(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("loss_goodput", ctx);
    let n_ops = ops(ctx, 20_000)?;
    for loss in [0.0, 0.001, 0.01, 0.02, 0.05, 0.1] {
        for (name, mut cfg) in [
            ("ub_urma", LossConfig::ub(&ctx.params, loss, ctx.seed)),
            ("roce_dma", LossConfig::roce(&ctx.params, loss, ctx.seed)),
        ] {
            cfg.ops = u32::try_from(n_ops).map_err(|_| HarnessError::ConfigInvalid("ops too large".into()))?;
            let s = loss_summary(&cfg);
            let cell = [("loss_rate", num(loss))];
            t.push(name, &cell, "goodput", s.lossy_mops, Unit::Mops);
            t.push(name, &cell, "goodput_drop", s.goodput_drop_pp, Unit::Pp);
            t.push(name, &cell, "p99_inflation", s.p99_inflation, Unit::Ratio);
            t.push(name, &cell, "retransmits", s.retransmits as f64, Unit::Count);
        }
    }
    Ok(t)
}

fn congestion(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("congestion", ctx);
    for (stack, ctrl) in
        [("ub_urma", Controller::Caqm(CaqmParams::default())), ("roce_dma", Controller::Dcqcn(DcqcnParams::default()))]
    {
        let r = steady_state_utilisation(ctrl, Bottleneck::default(), ctx.seed);
        let cell = [("controller", ctrl.name().to_string())];
        t.push(stack, &cell, "utilisation", r.utilisation, Unit::Fraction);
        t.push(stack, &cell, "marks", r.marks as f64, Unit::Count);
        t.push(stack, &cell, "drops", r.drops as f64, Unit::Count);
        t.push(stack, &cell, "mean_queue", r.mean_queue, Unit::Packets);
    }
    let e = element_test(ElementTest::default());
    let cell = [("controller", "element_test".to_string())];
    t.push("ub_urma", &cell, "packets", e.packets as f64, Unit::Count);
    t.push("ub_urma", &cell, "marked", e.marked as f64, Unit::Count);
    t.push("ub_urma", &cell, "initial_window", ElementTest::default().initial_window as f64, Unit::Bytes);
    t.push("ub_urma", &cell, "final_window", e.final_window as f64, Unit::Bytes);
    Ok(t)
}

const QUANTILES: [f64; 11] = [1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0, 99.5, 99.9];

fn jitter_cdf(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("jitter_cdf", ctx);
    let trials = ctx.knob_u64("trials", 5000)?;
    for factor in [0.0, 0.1, 0.2] {
        for s in Stack::ALL {
            let mut c = sim(ctx, s, WorkloadSpec::BulkRead { payload: 64 });
            c.ops = trials;
            c.link.jitter_factor = factor;
            let r = run(&c)?;
            let sorted = r.sorted();
            for q in QUANTILES {
                let cells = [("jitter_factor", num(factor)), ("quantile", num(q))];
                t.push(s.name(), &cells, "latency", crate::engine::percentile(&sorted, q), Unit::Ns);
            }
            t.push(s.name(), &[("jitter_factor", num(factor))], "mean", r.mean(), Unit::Ns);
        }
    }
    Ok(t)
}

fn mixed_order(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("mixed_order", ctx);
    let n_ops = ops(ctx, 2000)?;
    for i in 0..=10 {
        let f = i as f64 / 10.0;
        let mut mean = [0.0; 2];
        for (k, s) in [Stack::UbLdst, Stack::RoceDma].into_iter().enumerate() {
            let mut c = sim(ctx, s, WorkloadSpec::MixedOrder { so_fraction: f });
            c.ops = n_ops;
            c.ordering_accounting = true;
            mean[k] = run(&c)?.mean();
            t.push(s.name(), &[("so_fraction", num(f))], "latency", mean[k], Unit::Ns);
        }
        t.push("roce_dma/ub_ldst", &[("so_fraction", num(f))], "ratio", mean[1] / mean[0], Unit::Ratio);
    }
    // ungated latency under every mode: ops spaced so none is outstanding
    for mode in OrderingMode::combinations() {
        let mut c = sim(ctx, Stack::UbUrma, WorkloadSpec::BulkRead { payload: 64 });
        c.ops = n_ops.min(500);
        c.service_mode = mode.service_mode;
        c.tag_override = Some(mode.exec_tag);
        c.ordering_accounting = true;
        c.issue = IssueModel::OpenLoop { rate_mops: 0.5, arrivals: Arrivals::Paced };
        let cells = [
            ("service_mode", format!("{:?}", mode.service_mode).to_lowercase()),
            ("exec_tag", format!("{:?}", mode.exec_tag).to_lowercase()),
        ];
        t.push("ub_urma", &cells, "latency", run(&c)?.mean(), Unit::Ns);
    }
    // head-of-line isolation: jetty 0 stalls behind an op that never completes
    for stalled in [false, true] {
        let mut c = sim(ctx, Stack::UbUrma, WorkloadSpec::TpSharing { jetties: 4 });
        c.ops = n_ops.min(2000);
        c.issue = IssueModel::OpenLoop { rate_mops: 0.5, arrivals: Arrivals::Paced };
        if stalled {
            c.stalled_jetties = vec![0];
        }
        let r = run(&c)?;
        let st = if stalled { "0" } else { "none" };
        for (j, m) in &r.jetty_mean {
            t.push("ub_urma", &[("jetty", j.to_string()), ("stalled", st.into())], "latency", *m, Unit::Ns);
        }
        t.push("ub_urma", &[("stalled", st.into())], "held", r.held as f64, Unit::Count);
    }
    Ok(t)
}

fn fused_ack(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("fused_ack", ctx);
    let n_ops = ops(ctx, 200)?;
    let mut mean = [0.0; 2];
    for (i, (name, fused)) in [("taack", false), ("fused", true)].into_iter().enumerate() {
        let mut c = sim(ctx, Stack::UbUrma, WorkloadSpec::BulkWrite { payload: 64 });
        c.ops = n_ops;
        c.service_mode = ServiceMode::Rol;
        c.fused_ack = fused;
        mean[i] = run(&c)?.mean();
        let cell = [("ack_mode", name.to_string())];
        t.push("ub_urma", &cell, "latency", mean[i], Unit::Ns);
        let mode = if fused { AckMode::Fused } else { AckMode::TransactionTaack };
        t.push("ub_urma", &cell, "ack_flits", mode.ack_flits(1) as f64, Unit::Flits);
        let d = decompose_with(Stack::UbUrma, Opcode::Write, 64, &ctx.params, PathOptions { fused_ack: fused })?;
        t.push("ub_urma", &cell, "modeled", d.modeled_ns(), Unit::Ns);
    }
    t.push("ub_urma", &[], "saving", mean[0] - mean[1], Unit::Ns);
    Ok(t)
}

fn swap_compare(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("swap_compare", ctx);
    let zipf_ops = ops(ctx, 10_000)?;
    let seq_bytes = 1u64 << 20;
    let workloads = [
        ("zipf", WorkloadSpec::ZipfRead { alpha: 0.99, keys: 65_536 }, zipf_ops),
        ("seq_scan", WorkloadSpec::SeqScan { bytes: seq_bytes, stride: 64 }, seq_bytes / 64),
    ];
    for (wname, spec, n) in workloads {
        let cell = [("workload", wname.to_string())];
        let mut c = sim(ctx, Stack::UbLdst, spec.clone());
        c.ops = n;
        c.cache = Some(CacheConfig::new(CachePolicy::WriteBack));
        let r = run(&c)?;
        push_latency(&mut t, "ub_ldst", &cell, &r);
        for prof in [SwapProfile::infiniswap(), SwapProfile::fastswap()] {
            let mut s = SwapSim::new(prof.clone(), &ctx.params);
            let samples: Vec<f64> =
                spec.generate(ctx.seed).take(n as usize).map(|op| swap_access(&mut s, op.addr).latency_ns).collect();
            let r = RunStats { samples, ..Default::default() };
            push_latency(&mut t, prof.name, &cell, &r);
            t.push(prof.name, &cell, "faults", s.faults as f64, Unit::Count);
        }
    }
    Ok(t)
}

fn push_latency(t: &mut Table, stack: &str, cell: &[(&str, String)], r: &RunStats) {
    t.push(stack, cell, "mean", r.mean(), Unit::Ns);
    t.push(stack, cell, "p50", r.p50(), Unit::Ns);
    t.push(stack, cell, "p99", r.p99(), Unit::Ns);
}

fn ycsb(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("ycsb", ctx);
    let n_ops = ops(ctx, 20_000)?;
    let clients = ctx.knob_u64("clients", 256)? as u32;
    let mut tput = [0.0; 4];
    for (i, s) in Stack::ALL.into_iter().enumerate() {
        let mut c = sim(ctx, s, WorkloadSpec::ycsb_a());
        c.ops = n_ops;
        c.cache = Some(CacheConfig::new(CachePolicy::WriteBack));
        c.issue = IssueModel::SyncCore { clients };
        let r = run(&c)?;
        tput[i] = r.goodput_ops() / 1e6;
        t.push(s.name(), &[], "throughput", tput[i], Unit::Mops);
        t.push(s.name(), &[], "mean", r.mean(), Unit::Ns);
        t.push(s.name(), &[], "p99", r.p99(), Unit::Ns);
        t.push(s.name(), &[], "cache_hits", r.cache_hits as f64, Unit::Count);
    }
    t.push("ub_ldst/roce_dma", &[], "throughput_ratio", tput[0] / tput[3], Unit::Ratio);
    Ok(t)
}

fn envelope(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("envelope", ctx);
    let n_ops = ops(ctx, 5000)?;
    let rates: Vec<f64> = (1..=60).map(|i| i as f64 / 20.0).collect();
    for (aname, arrivals) in [("paced", Arrivals::Paced), ("poisson", Arrivals::Poisson)] {
        for s in Stack::ALL {
            let mut c = sim(ctx, s, WorkloadSpec::BulkRead { payload: 64 });
            c.ops = n_ops;
            let e = open_loop_envelope(&c, &rates, arrivals)?;
            for p in &e.points {
                let cells = [("arrivals", aname.to_string()), ("offered_mops", num(p.offered_mops))];
                t.push(s.name(), &cells, "achieved", p.achieved_mops, Unit::Mops);
                t.push(s.name(), &cells, "p50", p.p50, Unit::Ns);
                t.push(s.name(), &cells, "p99", p.p99, Unit::Ns);
            }
            // a missing knee means the sweep never saturated; report 0
            let cell = [("arrivals", aname.to_string())];
            t.push(s.name(), &cell, "knee", e.knee.unwrap_or(0.0), Unit::Mops);
            t.push(s.name(), &cell, "knee_own_median", e.knee_own_median.unwrap_or(0.0), Unit::Mops);
        }
    }
    Ok(t)
}

/// Hit fraction of the pointer-chase stream used by the rate and link sweeps.
pub const POINTER_CHASE_LOCALITY: f64 = 0.15;

fn pointer_chase(ctx: &Ctx, s: Stack) -> SimConfig {
    let mut c = sim(ctx, s, WorkloadSpec::PointerChase { locality: POINTER_CHASE_LOCALITY });
    c.cache = Some(CacheConfig::new(CachePolicy::WriteBack));
    c
}

fn concurrency(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("concurrency", ctx);
    let n_ops = ops(ctx, 5000)?;
    for s in Stack::ALL {
        let mut c = pointer_chase(ctx, s);
        c.ops = n_ops;
        for (d, rate) in crate::engine::sweep_concurrency(&c, &[1, 2, 4, 8, 16, 32, 64])? {
            t.push(s.name(), &[("depth", d.to_string())], "throughput", rate / 1e6, Unit::Mops);
        }
    }
    Ok(t)
}

fn link_delay(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("link_delay", ctx);
    let n_ops = ops(ctx, 5000)?;
    for d in [50.0, 100.0, 200.0, 500.0] {
        let cell = [("link_delay", num(d))];
        let mut mean = [0.0; 4];
        for (i, s) in Stack::ALL.into_iter().enumerate() {
            let mut c = pointer_chase(ctx, s);
            c.ops = n_ops;
            c.link.delay_ns = d;
            mean[i] = run(&c)?.mean();
            t.push(s.name(), &cell, "latency", mean[i], Unit::Ns);
        }
        t.push("roce_dma/ub_ldst", &cell, "ratio", mean[3] / mean[0], Unit::Ratio);
        t.push("roce_dma-ub_ldst", &cell, "gap", mean[3] - mean[0], Unit::Ns);
    }
    Ok(t)
}

fn cache_policy(ctx: &Ctx) -> Result<Table, HarnessError> {
    let mut t = table("cache_policy", ctx);
    let n_ops = ops(ctx, 5000)?;
    for policy in [CachePolicy::WriteBack, CachePolicy::WriteThrough, CachePolicy::Uncached] {
        for loc in [0.0, 0.5, 0.8, 0.95] {
            let mut c = sim(ctx, Stack::UbLdst, WorkloadSpec::PointerChase { locality: loc });
            c.ops = n_ops;
            c.cache = Some(CacheConfig::new(policy));
            let r = run(&c)?;
            let cells = [("policy", policy.name().to_string()), ("locality", num(loc))];
            t.push("ub_ldst", &cells, "latency", r.mean(), Unit::Ns);
            t.push("ub_ldst", &cells, "hit_fraction", r.cache_hits as f64 / r.completed.max(1) as f64, Unit::Fraction);
        }
    }
    Ok(t)
}
