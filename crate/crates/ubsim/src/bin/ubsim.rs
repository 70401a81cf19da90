//! Command-line front end for the experiment harness.

use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use ubsim::costmodel::CostParams;
use ubsim::harness::{self, HarnessError, OUT_DIR_ENV, REGISTRY};
use ubsim::rng::DEFAULT_SEED;

#[derive(Parser)]
#[command(name = "ubsim", version, about = "Two-node UB vs RoCEv2 simulator and experiment harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write `<out>/<experiment>.csv`.
    Run {
        experiment: String,
        /// Override a cost parameter or experiment knob, e.g. `wire_delay=200`.
        #[arg(long = "param", value_parser = parse_kv)]
        params: Vec<(String, String)>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
        /// TOML file of cost parameters applied before `--param`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List registered experiments.
    List,
    /// Compare default runs against the committed golden CSVs.
    Verify {
        experiment: Option<String>,
        #[arg(long)]
        golden: Option<PathBuf>,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.cmd {
        Cmd::List => {
            let mut out = std::io::stdout().lock();
            for e in REGISTRY {
                let kind = match e.kind {
                    harness::Kind::Analytical => "analytical",
                    harness::Kind::Stochastic => "stochastic",
                };
                // a closed pipe (`| head`) is not an error
                if writeln!(out, "{:18} {:10} {}", e.name, kind, e.about).is_err() {
                    break;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { experiment, params, seed, out, config } => {
            let base = match config {
                Some(path) => CostParams::from_toml(&std::fs::read_to_string(&path)?)?,
                None => CostParams::default(),
            };
            let path = harness::run_experiment(&experiment, &base, &params, seed, &out)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { experiment, golden } => {
            let dir = golden.unwrap_or_else(harness::golden_dir);
            let names: Vec<&str> = match &experiment {
                Some(n) => vec![harness::find(n)?.name],
                None => REGISTRY.iter().map(|e| e.name).collect(),
            };
            let mut failed = 0;
            for n in names {
                let r = harness::verify_golden(n, &dir)?;
                println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
                for d in r.diffs.iter().take(20) {
                    println!("  {d}");
                }
                failed += usize::from(!r.pass);
            }
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
