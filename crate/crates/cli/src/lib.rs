//! Experiment runner for the stochastic wave equation fluctuation harness.
//!
//! Wraps the simulation core with configuration ingestion, parallel
//! ensemble scheduling, CSV/JSON persistence with checksummed manifests,
//! and pass/fail summaries. The `swe` binary exposes each experiment kind
//! as a subcommand; this library exposes the same machinery to integration
//! tests.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Checks, ConfigError, ExperimentConfig, ExperimentKind, KernelSpec, SigmaSpec};
pub use experiments::{run, run_ensemble, EnsembleData, RunError};
pub use output::{CheckResult, RunManifest, RunSummary};
