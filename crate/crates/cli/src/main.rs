use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wfgl::evaluation::FprTarget;
use wfgl::triangle::TriangleCorrection;
use wfgl::weights::PsiEstimator;

mod benchmark;
mod commands;
mod config;
mod error;

use config::{RunConfig, WeightMode};
use error::CliResult;

#[derive(Parser)]
#[command(name = "wfgl", version, about = "Joint sparse precision estimation for paired Gaussian data")]
struct Cli {
    /// TOML or JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for replicate-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a ground-truth model and paired samples.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit both networks to paired data.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
        /// Write the weight matrix used by the fit.
        #[arg(long)]
        export_weights: Option<PathBuf>,
    },
    /// Paired permutation distribution of the differential edge count.
    Permtest {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Connectivity and differential-correlation gene screens.
    Screen {
        /// Healthy-condition expression matrix.
        #[arg(long)]
        healthy: PathBuf,
        /// Tumor-condition expression matrix, rows paired with `--healthy`.
        #[arg(long)]
        tumor: PathBuf,
        /// Two-column gene/cluster table.
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Simulation tables.
    Benchmark {
        #[arg(long, value_enum)]
        table: benchmark::Table,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        fpr_target: Option<FprTargetArg>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FprTargetArg {
    Alpha1,
    Alpha2,
}

impl From<FprTargetArg> for FprTarget {
    fn from(a: FprTargetArg) -> Self {
        match a {
            FprTargetArg::Alpha1 => FprTarget::Alpha1,
            FprTargetArg::Alpha2 => FprTarget::Alpha2,
        }
    }
}

#[derive(Args)]
pub struct InputArgs {
    /// Condition X samples (rows) by variables (columns).
    #[arg(long, requires = "y", conflicts_with = "long")]
    x: Option<PathBuf>,
    /// Condition Y samples, rows paired with `--x`.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Single file with `subject` and `condition` columns.
    #[arg(long)]
    long: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    weights: Option<WeightMode>,
    #[arg(long)]
    weights_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_estimator)]
    psi_estimator: Option<PsiEstimator>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    no_triangle_prune: bool,
    #[arg(long)]
    triangle_alpha: Option<f64>,
    #[arg(long, value_parser = parse_correction)]
    triangle_correction: Option<TriangleCorrection>,
    /// Keep going when the solver hits `max_iter`.
    #[arg(long)]
    allow_nonconverged: bool,
}

fn parse_estimator(s: &str) -> Result<PsiEstimator, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected independence, reg-based or reg-based-sim".to_string())
}

fn parse_correction(s: &str) -> Result<TriangleCorrection, String> {
    s.parse().map_err(|_| "expected none or bh".to_string())
}

impl FitArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(w) = self.weights {
            cfg.weights.mode = w;
        }
        if let Some(f) = &self.weights_file {
            cfg.weights.file = Some(f.clone());
        }
        if let Some(e) = self.psi_estimator {
            cfg.weights.estimator = e;
        }
        if let Some(a) = self.alpha1 {
            cfg.tuning.alpha1 = a;
        }
        if let Some(a) = self.alpha2 {
            cfg.tuning.alpha2 = a;
        }
        if self.no_triangle_prune {
            cfg.triangle.prune = false;
        }
        if let Some(a) = self.triangle_alpha {
            cfg.triangle.alpha = Some(a);
        }
        if let Some(c) = self.triangle_correction {
            cfg.triangle.correction = c;
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?.resolve();
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let threads = cfg.threads;
    match cli.command {
        Command::Simulate { out, seed, p, n } => {
            if let Some(s) = seed {
                cfg.set_seed(s);
            }
            if let Some(p) = p {
                cfg.simulate.p = p;
            }
            if let Some(n) = n {
                cfg.simulate.n = n;
            }
            commands::simulate(&cfg, &out)
        }
        Command::Estimate { input, fit, out, export_weights } => {
            fit.apply(&mut cfg);
            let data = commands::read_input(&input)?;
            wfgl::exec::with_threads(threads, || {
                commands::estimate(&cfg, &data, &out, export_weights.as_deref(), fit.allow_nonconverged)
            })
        }
        Command::Permtest { input, fit, out, reps, seed } => {
            fit.apply(&mut cfg);
            if let Some(s) = seed {
                cfg.permtest.seed = s;
            }
            if let Some(r) = reps {
                cfg.permtest.reps = r;
            }
            let data = commands::read_input(&input)?;
            wfgl::exec::with_threads(threads, || commands::permtest(&cfg, &data, &out, fit.allow_nonconverged))
        }
        Command::Screen { healthy, tumor, clusters, out, seed, threshold } => {
            if let Some(s) = seed {
                cfg.screen.seed = s;
            }
            if let Some(t) = threshold {
                cfg.screen.threshold = t;
            }
            wfgl::exec::with_threads(threads, || commands::screen(&cfg, &healthy, &tumor, clusters.as_deref(), &out))
        }
        Command::Benchmark { table, out, reps, seed, fpr_target } => {
            if let Some(s) = seed {
                cfg.benchmark.data_seed = s;
            }
            if let Some(r) = reps {
                cfg.benchmark.replicates = r;
            }
            if let Some(t) = fpr_target {
                cfg.benchmark.fpr_target = t.into();
            }
            wfgl::exec::with_threads(threads, || benchmark::run(&cfg, table, &out))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wfgl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
