use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use moslice_core::experiment::{
    run_cdf, run_certify, run_convergence, run_knapsack, CdfSweep, ExperimentSpec, KnapsackSweep,
};
use moslice_core::PowerMode;

/// Slice allocation experiments for micro-operator networks.
#[derive(Debug, Parser)]
#[command(name = "moslice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides `scenario.rng_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// Two-branch MCMC acceptance and discount-as-exploration Q-learning.
    #[arg(long)]
    literal_mode: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Welfare trace of one MCMC chain per replication.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Final welfare per replication and sweep cell.
    Cdf {
        #[command(flatten)]
        common: Common,
        /// Numbers of slices to sweep, e.g. 15,20,25,30.
        #[arg(long, value_delimiter = ',')]
        slices: Vec<usize>,
        /// Power modes to sweep: qlearning, uniform, max_power.
        #[arg(long, value_delimiter = ',')]
        power_modes: Vec<PowerMode>,
        /// Numbers of MNOs to sweep, e.g. 3,4,5.
        #[arg(long, value_delimiter = ',')]
        mnos: Vec<usize>,
    },
    /// Per-SBS delays and knapsack fractions of the first MNO.
    Knapsack {
        #[command(flatten)]
        common: Common,
        /// Latency thresholds in seconds; defaults to 0.001,0.003,0.005.
        #[arg(long, value_delimiter = ',')]
        delay_thresholds: Vec<f64>,
        /// Violation tolerances; defaults to 0.3,0.4.
        #[arg(long, value_delimiter = ',')]
        tolerances: Vec<f64>,
    },
    /// Exhaustive optimum versus MCMC on small instances.
    Certify {
        #[command(flatten)]
        common: Common,
    },
}

fn load_spec(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.scenario.rng_seed = seed;
    }
    if let Some(n) = common.replications {
        spec.replications = n;
    }
    if let Some(out) = &common.out {
        spec.output_dir = out.to_string_lossy().into_owned();
    }
    if common.literal_mode {
        spec.set_literal_mode(true);
    }
    spec.validate().context("invalid configuration")?;
    Ok(spec)
}

/// Writes `rows` as CSV after a `#` line holding the resolved config and seed.
fn write_csv<T: Serialize, S: Serialize>(
    spec: &ExperimentSpec,
    extra: &S,
    name: &str,
    rows: &[T],
) -> Result<PathBuf> {
    let dir = Path::new(&spec.output_dir);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let header = serde_json::json!({ "seed": spec.base_seed(), "config": spec, "sweep": extra });
    writeln!(out, "# {header}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Converge { common } => {
            let spec = load_spec(&common)?;
            let rows = run_convergence(&spec)?;
            write_csv(&spec, &(), "converge.csv", &rows)
        }
        Command::Cdf {
            common,
            slices,
            power_modes,
            mnos,
        } => {
            let spec = load_spec(&common)?;
            let sweep = CdfSweep {
                num_slices: slices,
                power_modes,
                num_mnos: mnos,
            };
            let rows = run_cdf(&spec, &sweep)?;
            write_csv(&spec, &sweep, "cdf.csv", &rows)
        }
        Command::Knapsack {
            common,
            delay_thresholds,
            tolerances,
        } => {
            let spec = load_spec(&common)?;
            let full = KnapsackSweep::full();
            let sweep = KnapsackSweep {
                delay_thresholds: if delay_thresholds.is_empty() {
                    full.delay_thresholds
                } else {
                    delay_thresholds
                },
                tolerances: if tolerances.is_empty() {
                    full.tolerances
                } else {
                    tolerances
                },
            };
            let rows = run_knapsack(&spec, &sweep)?;
            write_csv(&spec, &sweep, "knapsack.csv", &rows)
        }
        Command::Certify { common } => {
            let spec = load_spec(&common)?;
            let rows = run_certify(&spec)?;
            write_csv(&spec, &(), "certify.csv", &rows)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
