//! Batch experiment driver for conical-lab.
//!
//! Exit status: 0 on success, 1 when a computation fails (the library
//! error is printed with its name) or a lemma-check suite fails, 2 when the
//! configuration is invalid.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use conical_lab::limits::EscapeRadius;

use config::{parse_radius, resolve, ConfigInvalid, GridSpec, Inputs, ModelName, RawConfig, RawTolerances, SubcommandKind};
use run::RunError;

const THREADS_ENV: &str = "CONICAL_LAB_THREADS";

#[derive(Parser)]
#[command(
    name = "conical-lab",
    version,
    about = "Reproducible experiments on conical limit sets, sets of divergence and continued fractions",
    after_help = "Floats are written with 17 significant digits. CSV reports start with '# ' comment lines holding \
the resolved config and summary values. Set CONICAL_LAB_THREADS to fix the worker thread count; output does not \
depend on it."
)]
struct Cli {
    /// JSON experiment config; flags given alongside override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Default)]
struct Common {
    /// Ambient dimension m+1 of hyperbolic space.
    #[arg(long)]
    dim: Option<usize>,
    /// Seed for randomized probe sets.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct Sampling {
    /// Sequence length N (at least 10).
    #[arg(long = "N", alias = "n")]
    n: Option<usize>,
    /// Sample grid: circle:<n>, sphere:<n> or line:<lo>:<hi>:<n>.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Output model for coordinates: ball or half-space.
    #[arg(long)]
    model: Option<ModelName>,
    /// Convergence tolerance on the boundary.
    #[arg(long)]
    tol_lo: Option<f64>,
    /// Divergence tolerance; must exceed tol_lo.
    #[arg(long)]
    tol_hi: Option<f64>,
    /// Ascending cone radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Minimum number of shadow witnesses.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Escape radius: scaled:<c> (R = c·α) or fixed:<R>.
    #[arg(long = "R", value_parser = parse_radius)]
    radius: Option<EscapeRadius>,
}

#[derive(Args, Default)]
struct CfSource {
    /// Named coefficient preset: golden or oscillating.
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with a list of [a, b] pairs; entries are numbers or [re, im].
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Geometry identity and isometry suites; JSON with pass/fail and max residuals.
    LemmaCheck {
        #[command(flatten)]
        common: Common,
        /// Random configurations per identity.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Set of divergence against the conical limit set of the inverse orbit, on a grid.
    #[command(after_help = "CSV columns: index, sample coordinates (x0.. in the ball, v0.. in the half-space), \
status (Convergent, Divergent, Undecided), limit_ coordinates (Convergent rows only), tail_diameter, conical \
(Accepted, Rejected, Undecided), agrees (true, false, empty when undecided). Datasets: singleton, twelve, cantor; \
or --preset/--coefficients for a continued-fraction sequence in H³.")]
    DivergenceMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        cf: CfSource,
        /// Built-in conical dataset: singleton, twelve or cantor.
        #[arg(long)]
        dataset: Option<String>,
        /// Cantor dataset depth.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Classical and general convergence of a continued fraction.
    #[command(after_help = "CSV columns: n, re, im (of T_n(0); inf for the point at infinity), chordal_step \
(chordal distance to the previous convergent). Comment lines give the classical verdict and value and the general \
verdict.")]
    CfAnalyze {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
        /// Convergence tolerance on the boundary.
        #[arg(long)]
        tol_lo: Option<f64>,
        /// Divergence tolerance; must exceed tol_lo.
        #[arg(long)]
        tol_hi: Option<f64>,
        #[command(flatten)]
        cf: CfSource,
    },
    /// gd-rank iteration on a named oracle; JSON verdicts and witnesses.
    Rank {
        #[command(flatten)]
        common: Common,
        /// cantor, selfsimA, selfsimB, rationals01 or jalpha:<alpha>:<qmax>.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        max_rank: Option<usize>,
        /// Smallest probe radius (default 4× the truncation resolution).
        #[arg(long)]
        scale_min: Option<f64>,
        #[arg(long)]
        octaves: Option<usize>,
    },
    /// Run a construction; JSON point list and conical estimate on a grid.
    #[command(after_help = "Builders: cfconv and prescribed-limit-set (on S¹ or S²), cantor-circle (on S¹) and thm3, jalpha, \
gdelta-rationals, cantor-graph (on the half-plane). N is the sequence length for the continued-fraction builders \
and cantor-circle, and the number of emitted pairs for thm3; the other builders take their length from \
--depth/--qmax/--per-side.")]
    Construct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        builder: Option<String>,
        /// Target dataset for the continued-fraction builders.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        max_rank: Option<usize>,
        /// Exponent for the jalpha builder.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        qmax: Option<u64>,
        #[arg(long)]
        per_side: Option<u32>,
    },
}

fn tolerances(s: &Sampling) -> RawTolerances {
    RawTolerances { tol_lo: s.tol_lo, tol_hi: s.tol_hi, alphas: s.alphas.clone(), k: s.k, radius: s.radius }
}

fn raw_from_flags(cmd: Option<Command>) -> RawConfig {
    let Some(cmd) = cmd else { return RawConfig::default() };
    match cmd {
        Command::LemmaCheck { common, trials } => RawConfig {
            subcommand: Some(SubcommandKind::LemmaCheck),
            dim: common.dim,
            seed: common.seed,
            trials,
            ..Default::default()
        },
        Command::DivergenceMap { common, sampling, cf, dataset, depth } => RawConfig {
            subcommand: Some(SubcommandKind::DivergenceMap),
            dim: common.dim,
            seed: common.seed,
            model: sampling.model,
            n: sampling.n,
            grid: sampling.grid.clone(),
            tolerances: tolerances(&sampling),
            inputs: Inputs { preset: cf.preset, coefficients: cf.coefficients, dataset, depth, ..Default::default() },
            ..Default::default()
        },
        Command::CfAnalyze { common, n, tol_lo, tol_hi, cf } => RawConfig {
            subcommand: Some(SubcommandKind::CfAnalyze),
            dim: common.dim,
            seed: common.seed,
            n,
            tolerances: RawTolerances { tol_lo, tol_hi, ..Default::default() },
            inputs: Inputs { preset: cf.preset, coefficients: cf.coefficients, ..Default::default() },
            ..Default::default()
        },
        Command::Rank { common, oracle, depth, max_rank, scale_min, octaves } => RawConfig {
            subcommand: Some(SubcommandKind::Rank),
            dim: common.dim,
            seed: common.seed,
            inputs: Inputs { oracle, depth, max_rank, scale_min, octaves, ..Default::default() },
            ..Default::default()
        },
        Command::Construct { common, sampling, builder, dataset, oracle, depth, max_rank, alpha, qmax, per_side } => {
            RawConfig {
                subcommand: Some(SubcommandKind::Construct),
                dim: common.dim,
                seed: common.seed,
                model: sampling.model,
                n: sampling.n,
                grid: sampling.grid.clone(),
                tolerances: tolerances(&sampling),
                inputs: Inputs { builder, dataset, oracle, depth, max_rank, alpha, qmax, per_side, ..Default::default() },
                ..Default::default()
            }
        }
    }
}

fn thread_count() -> Result<Option<usize>, ConfigInvalid> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigInvalid(format!("{THREADS_ENV} must be a positive thread count, got {v:?}"))),
        },
        Err(e) => Err(ConfigInvalid(format!("{THREADS_ENV}: {e}"))),
    }
}

fn write_report(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = (|| {
        if let Some(n) = thread_count()? {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| ConfigInvalid(format!("thread pool: {e}")))?;
        }
        let base = match &cli.config {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        let mut flags = raw_from_flags(cli.command);
        flags.output = cli.output;
        resolve(base.merged(flags))
    })();
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run::run(&cfg) {
        Ok(report) => {
            if let Err(e) = write_report(cfg.output.as_ref(), &report.text) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: SuiteFailed: a residual exceeded its tolerance");
                ExitCode::from(1)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(RunError::Module(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
