//! Experiment registry, CSV emission, and golden-output regression.

mod experiments;
pub mod grid;

pub use experiments::REGISTRY;

use crate::costmodel::CostParams;
use crate::rng::DEFAULT_SEED;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Bumped whenever a column is added, removed, or reinterpreted.
pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "UBSIM_OUT_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown experiment `{0}` (try `list`)")]
    UnknownExperiment(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("no golden CSV at {0}")]
    GoldenMissing(PathBuf),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<crate::engine::EngineError> for HarnessError {
    fn from(e: crate::engine::EngineError) -> Self {
        HarnessError::ConfigInvalid(e.to_string())
    }
}

impl From<crate::costmodel::CostError> for HarnessError {
    fn from(e: crate::costmodel::CostError) -> Self {
        HarnessError::ConfigInvalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Ns,
    Seconds,
    Bytes,
    Count,
    Ratio,
    Fraction,
    Mops,
    OpsPerSec,
    Pp,
    Flits,
    Kilobytes,
    Megabytes,
    Packets,
}

impl Unit {
    pub fn name(self) -> &'static str {
        match self {
            Unit::Ns => "ns",
            Unit::Seconds => "s",
            Unit::Bytes => "bytes",
            Unit::Count => "count",
            Unit::Ratio => "ratio",
            Unit::Fraction => "fraction",
            Unit::Mops => "mops",
            Unit::OpsPerSec => "ops_per_s",
            Unit::Pp => "pp",
            Unit::Flits => "flits",
            Unit::Kilobytes => "kb",
            Unit::Megabytes => "mb",
            Unit::Packets => "packets",
        }
    }

    fn format(self, v: f64) -> String {
        match self {
            Unit::Ns | Unit::Pp => format!("{v:.1}"),
            Unit::Bytes | Unit::Count | Unit::Flits => format!("{v:.0}"),
            Unit::Seconds => format!("{v:.6}"),
            Unit::OpsPerSec => format!("{v:.1}"),
            Unit::Ratio | Unit::Fraction | Unit::Mops | Unit::Kilobytes | Unit::Megabytes | Unit::Packets => {
                format!("{v:.4}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub stack: String,
    /// One value per swept-parameter column; empty when not applicable.
    pub params: Vec<String>,
    pub metric: String,
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub seed: u64,
    pub param_names: Vec<&'static str>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(experiment: &str, seed: u64, param_names: &[&'static str]) -> Self {
        Table { experiment: experiment.to_string(), seed, param_names: param_names.to_vec(), rows: Vec::new() }
    }

    /// Append a row. `params` pairs must name declared columns.
    pub fn push(&mut self, stack: &str, params: &[(&str, String)], metric: &str, value: f64, unit: Unit) {
        let mut cells = vec![String::new(); self.param_names.len()];
        for (k, v) in params {
            let i = self
                .param_names
                .iter()
                .position(|n| n == k)
                .unwrap_or_else(|| panic!("{}: undeclared column {k}", self.experiment));
            cells[i] = v.clone();
        }
        self.rows.push(Row { stack: stack.to_string(), params: cells, metric: metric.to_string(), value, unit });
    }

    /// Look up a value by stack, metric, and parameter cells.
    pub fn get(&self, stack: &str, metric: &str, params: &[(&str, &str)]) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.stack == stack
                    && r.metric == metric
                    && params
                        .iter()
                        .all(|(k, v)| self.param_names.iter().position(|n| n == k).is_some_and(|i| r.params[i] == *v))
            })
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["experiment", "stack"];
        header.extend(self.param_names.iter().copied());
        header.extend(["metric", "value", "unit"]);
        w.write_record(&header).unwrap();
        for r in &self.rows {
            let mut rec = vec![self.experiment.clone(), r.stack.clone()];
            rec.extend(r.params.iter().cloned());
            rec.extend([r.metric.clone(), r.unit.format(r.value), r.unit.name().to_string()]);
            w.write_record(&rec).unwrap();
        }
        let body = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let mut out = String::new();
        let _ = writeln!(out, "# ubsim-csv schema={SCHEMA_VERSION} experiment={} seed={}", self.experiment, self.seed);
        out.push_str(&body);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Closed-form: golden compare is byte-exact.
    Analytical,
    /// Seeded simulation: golden compare uses a per-metric tolerance.
    Stochastic,
}

/// Run-time context for one experiment.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub params: CostParams,
    pub seed: u64,
    knobs: BTreeMap<String, String>,
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx { params: CostParams::default(), seed: DEFAULT_SEED, knobs: BTreeMap::new() }
    }
}

impl Ctx {
    pub fn knob_u64(&self, name: &str, default: u64) -> Result<u64, HarnessError> {
        match self.knobs.get(name) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| HarnessError::ConfigInvalid(format!("{name}={v} is not an integer"))),
        }
    }

    pub fn knob_f64(&self, name: &str, default: f64) -> Result<f64, HarnessError> {
        match self.knobs.get(name) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| HarnessError::ConfigInvalid(format!("{name}={v} is not a number"))),
        }
    }
}

pub type RunFn = fn(&Ctx) -> Result<Table, HarnessError>;

pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
    pub kind: Kind,
    pub params: &'static [&'static str],
    /// Experiment-specific `--param` keys besides cost parameters.
    pub knobs: &'static [&'static str],
    pub run: RunFn,
}

pub fn find(name: &str) -> Result<&'static Experiment, HarnessError> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| HarnessError::UnknownExperiment(name.to_string()))
}

/// Build the context: cost parameters from `base`, then each `k=v`
/// override either sets a cost parameter or an experiment knob.
pub fn make_ctx(
    exp: &Experiment,
    base: &CostParams,
    overrides: &[(String, String)],
    seed: u64,
) -> Result<Ctx, HarnessError> {
    let mut ctx = Ctx { params: base.clone(), seed, knobs: BTreeMap::new() };
    for (k, v) in overrides {
        if exp.knobs.contains(&k.as_str()) {
            ctx.knobs.insert(k.clone(), v.clone());
        } else {
            ctx.params.set(k, v)?;
        }
    }
    ctx.params.validate()?;
    Ok(ctx)
}

/// Run a registered experiment and return its table.
pub fn run_table(
    name: &str,
    base: &CostParams,
    overrides: &[(String, String)],
    seed: u64,
) -> Result<Table, HarnessError> {
    let exp = find(name)?;
    let ctx = make_ctx(exp, base, overrides, seed)?;
    (exp.run)(&ctx)
}

/// Run and write `<out>/<name>.csv`; returns the path.
pub fn run_experiment(
    name: &str,
    base: &CostParams,
    overrides: &[(String, String)],
    seed: u64,
    out: &Path,
) -> Result<PathBuf, HarnessError> {
    let t = run_table(name, base, overrides, seed)?;
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{name}.csv"));
    std::fs::write(&path, t.to_csv())?;
    Ok(path)
}

/// Directory with the committed golden CSVs.
pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("golden")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenReport {
    pub name: String,
    pub pass: bool,
    pub diffs: Vec<String>,
}

/// Relative tolerance for stochastic experiments: the widest band the
/// stochastic acceptance checks allow (jitter percentiles at +/-10%).
pub const STOCHASTIC_RTOL: f64 = 0.10;

/// Compare a fresh default run against the committed golden CSV.
pub fn verify_golden(name: &str, dir: &Path) -> Result<GoldenReport, HarnessError> {
    let exp = find(name)?;
    let path = dir.join(format!("{name}.csv"));
    if !path.exists() {
        return Err(HarnessError::GoldenMissing(path));
    }
    let golden = std::fs::read_to_string(&path)?;
    let fresh = (exp.run)(&Ctx::default())?.to_csv();
    Ok(compare(name, exp.kind, &golden, &fresh))
}

/// Compare two CSV texts: byte-exact for analytical experiments; same rows and
/// values within [`STOCHASTIC_RTOL`] for stochastic ones.
pub fn compare(name: &str, kind: Kind, golden: &str, fresh: &str) -> GoldenReport {
    let mut diffs = Vec::new();
    if golden == fresh {
        return GoldenReport { name: name.to_string(), pass: true, diffs };
    }
    let g: Vec<&str> = golden.lines().collect();
    let f: Vec<&str> = fresh.lines().collect();
    if g.len() != f.len() {
        diffs.push(format!("row count {} -> {}", g.len(), f.len()));
    }
    for (i, (a, b)) in g.iter().zip(&f).enumerate() {
        if a == b {
            continue;
        }
        let ok = kind == Kind::Stochastic && i > 1 && within_tolerance(a, b);
        if !ok {
            diffs.push(format!("line {}: `{a}` -> `{b}`", i + 1));
        }
    }
    GoldenReport { name: name.to_string(), pass: diffs.is_empty(), diffs }
}

fn within_tolerance(a: &str, b: &str) -> bool {
    let ca: Vec<&str> = a.split(',').collect();
    let cb: Vec<&str> = b.split(',').collect();
    if ca.len() != cb.len() || ca.len() < 3 {
        return false;
    }
    let n = ca.len();
    // every column but the value must match exactly
    if ca[..n - 2] != cb[..n - 2] || ca[n - 1] != cb[n - 1] {
        return false;
    }
    match (ca[n - 2].parse::<f64>(), cb[n - 2].parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= STOCHASTIC_RTOL * x.abs().max(y.abs()).max(1e-9),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_unique() {
        let mut names: Vec<_> = REGISTRY.iter().map(|e| e.name).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn unknown_experiment() {
        assert!(matches!(run_table("nope", &CostParams::default(), &[], 1), Err(HarnessError::UnknownExperiment(_))));
    }

    #[test]
    fn bad_override() {
        let o = vec![("wire_delay".to_string(), "-5".to_string())];
        assert!(matches!(
            run_table("per_side_table", &CostParams::default(), &o, 1),
            Err(HarnessError::ConfigInvalid(_))
        ));
        let o = vec![("bogus".to_string(), "1".to_string())];
        assert!(matches!(
            run_table("per_side_table", &CostParams::default(), &o, 1),
            Err(HarnessError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn csv_header_and_format() {
        let mut t = Table::new("x", 7, &["n"]);
        t.push("ub_ldst", &[("n", "4".into())], "latency", 499.392, Unit::Ns);
        t.push("roce_dma", &[], "ratio", 4.37698, Unit::Ratio);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# ubsim-csv schema=1 experiment=x seed=7");
        assert_eq!(lines[1], "experiment,stack,n,metric,value,unit");
        assert_eq!(lines[2], "x,ub_ldst,4,latency,499.4,ns");
        assert_eq!(lines[3], "x,roce_dma,,ratio,4.3770,ratio");
        assert_eq!(t.get("ub_ldst", "latency", &[("n", "4")]), Some(499.392));
    }

    #[test]
    fn tolerance_compare() {
        let g = "# h\nexperiment,stack,metric,value,unit\nj,a,p50,100.0,ns\n";
        let f = "# h\nexperiment,stack,metric,value,unit\nj,a,p50,108.0,ns\n";
        assert!(compare("j", Kind::Stochastic, g, f).pass);
        assert!(!compare("j", Kind::Analytical, g, f).pass);
        let far = "# h\nexperiment,stack,metric,value,unit\nj,a,p50,120.0,ns\n";
        let r = compare("j", Kind::Stochastic, g, far);
        assert!(!r.pass);
        assert_eq!(r.diffs.len(), 1);
    }
}
