//! `swe`: simulate the 3D stochastic wave equation on a torus and verify
//! the Gaussian-fluctuation behavior of its ball averages.
//!
//! Exit codes: 0 = run completed and all configured checks passed,
//! 2 = run completed with failed checks, 1 = execution error.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use swe_cli::{config::ExperimentKind, experiments, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "swe",
    version,
    about = "Stochastic wave equation fluctuation laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the path count M.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also emit the propagator/mollifier multiplier tables as CSV.
    #[arg(long)]
    dump_multipliers: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and emit the raw spatial-average samples.
    Simulate(RunArgs),
    /// Per-radius variance and distance-to-normal table.
    CltScan(RunArgs),
    /// Variance growth exponent fit over the radius ladder.
    VarianceScan(RunArgs),
    /// Normalized covariances against the limiting covariance targets.
    CovarianceLimit(RunArgs),
    /// Picard iterates against the fixed-point scheme on one noise path.
    PicardCheck(RunArgs),
    /// Second moments of time increments and their scaling.
    TightnessScan(RunArgs),
    /// Quadrature-only targets: variance growth, constants, Dalang check.
    Oracle(RunArgs),
    /// Verify an existing run directory: checksums and summary verdicts.
    Report {
        /// Run directory containing manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(args: &RunArgs, kind: ExperimentKind) -> Result<ExperimentConfig, String> {
    let mut config = ExperimentConfig::from_file(&args.config).map_err(|e| e.to_string())?;
    match config.kind {
        None => config.kind = Some(kind),
        Some(k) if k == kind => {}
        Some(k) => {
            return Err(swe_cli::ConfigError::KindMismatch {
                config: k,
                subcommand: kind.as_str().to_string(),
            }
            .to_string())
        }
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(paths) = args.paths {
        config.paths = paths;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if args.dump_multipliers {
        config.dump_multipliers = true;
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(config)
}

fn execute(args: &RunArgs, kind: ExperimentKind) -> ExitCode {
    let config = match load(args, kind) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match experiments::run(&config) {
        Ok((manifest, summary)) => {
            for check in &summary.checks {
                println!(
                    "check {}: {} (value {:.6}, threshold {:.6}) - {}",
                    check.name,
                    if check.passed { "pass" } else { "FAIL" },
                    check.value,
                    check.threshold,
                    check.detail
                );
            }
            println!(
                "{}: {} output file(s) in {} (config {})",
                summary.kind,
                manifest.outputs.len(),
                config.out_dir.display(),
                summary.config_hash
            );
            if summary.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(a) => execute(a, ExperimentKind::Simulate),
        Command::CltScan(a) => execute(a, ExperimentKind::CltScan),
        Command::VarianceScan(a) => execute(a, ExperimentKind::VarianceScan),
        Command::CovarianceLimit(a) => execute(a, ExperimentKind::CovarianceLimit),
        Command::PicardCheck(a) => execute(a, ExperimentKind::PicardCheck),
        Command::TightnessScan(a) => execute(a, ExperimentKind::TightnessScan),
        Command::Oracle(a) => execute(a, ExperimentKind::Oracle),
        Command::Report { out } => match experiments::verify_run_dir(out) {
            Ok((ok, lines)) => {
                for line in lines {
                    println!("{line}");
                }
                if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
