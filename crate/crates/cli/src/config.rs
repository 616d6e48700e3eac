//! Experiment configuration: one JSON file drives one reproducible run.
//!
//! All CLI flags are overrides of config fields, so a config file plus a
//! seed fully determines every byte of output.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use swe_core::kernels::{CorrelationKernel, KernelError};
use swe_core::solver::{SigmaFunction, SolverError};
use swe_core::{SigmaFunction as Sigma, TorusGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config violates `{invariant}`: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("grid: {0}")]
    Grid(#[from] swe_core::grid::GridError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("could not read config {path:?}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("could not parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config kind {config:?} does not match the `{subcommand}` subcommand")]
    KindMismatch {
        config: ExperimentKind,
        subcommand: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    CltScan,
    VarianceScan,
    CovarianceLimit,
    PicardCheck,
    TightnessScan,
    Oracle,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::CltScan => "clt-scan",
            Self::VarianceScan => "variance-scan",
            Self::CovarianceLimit => "covariance-limit",
            Self::PicardCheck => "picard-check",
            Self::TightnessScan => "tightness-scan",
            Self::Oracle => "oracle",
        }
    }

    /// Kinds that exercise the fluctuation theorems and therefore require
    /// an admissible kernel and nonlinearity.
    pub fn is_fluctuation_experiment(&self) -> bool {
        matches!(
            self,
            Self::CltScan | Self::VarianceScan | Self::CovarianceLimit | Self::TightnessScan
        )
    }
}

/// Kernel specification as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum KernelSpec {
    Riesz { beta: f64 },
    Gaussian { scale: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> Result<CorrelationKernel, KernelError> {
        match self {
            Self::Riesz { beta } => CorrelationKernel::riesz(*beta),
            Self::Gaussian { scale } => CorrelationKernel::gaussian(*scale),
        }
    }
}

/// Nonlinearity specification as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SigmaSpec {
    Constant { value: f64 },
    Linear { a: f64, b: f64 },
    SineShift { eps: f64 },
}

impl SigmaSpec {
    pub fn build(&self) -> SigmaFunction {
        match self {
            Self::Constant { value } => Sigma::Constant(*value),
            Self::Linear { a, b } => Sigma::Linear { a: *a, b: *b },
            Self::SineShift { eps } => Sigma::SineShift { eps: *eps },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub len: f64,
}

/// Pass/fail thresholds applied by the experiment kinds. Defaults are the
/// acceptance values; configs may tighten or relax them.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Checks {
    /// Largest admissible W1-to-normal at the biggest radius (CLT scan).
    pub w1_max: f64,
    /// Allowance for one Monte Carlo violation of ladder monotonicity.
    pub w1_ladder_slack: f64,
    /// Expected variance-growth exponent window (variance scan).
    pub slope_range: Option<(f64, f64)>,
    /// Minimum r^2 of the variance fit.
    pub r2_min: f64,
    /// Relative tolerance of measured vs limiting covariance.
    pub covariance_tol: f64,
    /// Minimum log-log slope of the increment second moment.
    pub increment_slope_min: f64,
    /// Picard: error(n_max) must fall below this fraction of error(1).
    pub picard_ratio_max: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            w1_max: 0.10,
            w1_ladder_slack: 0.01,
            slope_range: None,
            r2_min: 0.98,
            covariance_tol: 0.15,
            increment_slope_min: 1.7,
            picard_ratio_max: 0.25,
        }
    }
}

fn default_paths() -> usize {
    2000
}

fn default_dt() -> f64 {
    1.0 / 64.0
}

fn default_horizon() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, fully specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Optional in the file; the CLI subcommand supplies or confirms it.
    pub kind: Option<ExperimentKind>,
    pub kernel: KernelSpec,
    pub sigma: SigmaSpec,
    pub grid: GridSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Defaults to the sixteenth-of-horizon grid when omitted.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Time at which scan statistics are evaluated; defaults to `horizon`.
    #[serde(default)]
    pub target_time: Option<f64>,
    /// Covariance-limit observation pairs; defaults to a standard triple.
    #[serde(default)]
    pub covariance_pairs: Vec<(f64, f64)>,
    #[serde(default)]
    pub picard_iterations: Option<usize>,
    /// Tightness scan: base time s and the increment sizes t - s.
    #[serde(default)]
    pub increment_base: Option<f64>,
    #[serde(default)]
    pub increment_deltas: Vec<f64>,
    /// Emit per-snapshot binary field dumps (simulate kind).
    #[serde(default)]
    pub dump_fields: bool,
    /// Emit the wave/mollifier multiplier tables as CSV (debug aid).
    #[serde(default)]
    pub dump_multipliers: bool,
    #[serde(default)]
    pub checks: Checks,
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn torus(&self) -> Result<TorusGrid, ConfigError> {
        Ok(TorusGrid::new(self.grid.n, self.grid.len)?)
    }

    /// Snapshot times, with the default sixteenth grid when unspecified.
    pub fn snapshots(&self) -> Vec<f64> {
        if !self.snapshot_times.is_empty() {
            return self.snapshot_times.clone();
        }
        (0..=16).map(|i| self.horizon * i as f64 / 16.0).collect()
    }

    pub fn scan_time(&self) -> f64 {
        self.target_time.unwrap_or(self.horizon)
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        if !self.covariance_pairs.is_empty() {
            return self.covariance_pairs.clone();
        }
        let t = self.horizon;
        vec![(0.5 * t, 0.5 * t), (0.5 * t, t), (t, t)]
    }

    pub fn deltas(&self) -> (f64, Vec<f64>) {
        let base = self.increment_base.unwrap_or(0.5 * self.horizon);
        let deltas = if self.increment_deltas.is_empty() {
            [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0]
                .iter()
                .map(|d| d * self.horizon)
                .collect()
        } else {
            self.increment_deltas.clone()
        };
        (base, deltas)
    }

    /// Structural validation; every violated invariant is named.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.torus()?;
        let kind = self.kind.unwrap_or(ExperimentKind::Simulate);
        let h = grid.h();
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(ConfigError::Invariant {
                invariant: "dt > 0",
                detail: format!("dt = {}", self.dt),
            });
        }
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(ConfigError::Invariant {
                invariant: "horizon > 0",
                detail: format!("horizon = {}", self.horizon),
            });
        }
        if kind != ExperimentKind::Oracle && kind != ExperimentKind::PicardCheck {
            if self.radii.is_empty() {
                return Err(ConfigError::Invariant {
                    invariant: "radii nonempty",
                    detail: "no averaging radii configured".into(),
                });
            }
            // Statistics kinds need at least two paths; a bare simulate
            // run may emit a single path.
            let need = if kind == ExperimentKind::Simulate {
                1
            } else {
                2
            };
            if self.paths < need {
                return Err(ConfigError::Invariant {
                    invariant: "paths sufficient for the experiment kind",
                    detail: format!("paths = {}, need >= {need}", self.paths),
                });
            }
        }
        let r_max = self.radii.iter().cloned().fold(0.0, f64::max);
        if kind != ExperimentKind::Oracle && grid.len() < 2.0 * (r_max + self.horizon) + 4.0 * h {
            return Err(ConfigError::Invariant {
                invariant: "L >= 2 (R_max + T) + 4h",
                detail: format!(
                    "L = {}, R_max = {r_max}, T = {}, h = {h}",
                    grid.len(),
                    self.horizon
                ),
            });
        }
        let sigma = self.sigma.build();
        if kind.is_fluctuation_experiment() {
            let kernel = self.kernel.build()?;
            if !kernel.clt_admissible() {
                return Err(ConfigError::Invariant {
                    invariant: "kernel Dalang-admissible",
                    detail: format!("{} fails the admissibility range", kernel.description()),
                });
            }
            let report = kernel.check_dalang();
            if !report.converged {
                return Err(ConfigError::Invariant {
                    invariant: "kernel Dalang-admissible",
                    detail: format!(
                        "Dalang integral did not converge (last value {})",
                        report.integral_value
                    ),
                });
            }
            if sigma.at_one() == 0.0 {
                return Err(ConfigError::Invariant {
                    invariant: "sigma(1) != 0",
                    detail: "the flat solution would be frozen".into(),
                });
            }
            if !sigma.lipschitz().is_finite() {
                return Err(ConfigError::Invariant {
                    invariant: "Lipschitz constant finite",
                    detail: format!("L = {}", sigma.lipschitz()),
                });
            }
        }
        for &t in &self.snapshots() {
            let steps = (t / self.dt).round();
            if (t - steps * self.dt).abs() > 1e-9 {
                return Err(ConfigError::Invariant {
                    invariant: "dt divides snapshot times",
                    detail: format!("snapshot {t} vs dt {}", self.dt),
                });
            }
        }
        Ok(())
    }

    /// Hash of the physics-relevant fields (output paths and thread counts
    /// excluded): FNV-1a over the canonical serialization.
    pub fn physics_hash(&self) -> u64 {
        #[derive(Serialize)]
        struct Physics<'a> {
            kind: &'a Option<ExperimentKind>,
            kernel: &'a KernelSpec,
            sigma: &'a SigmaSpec,
            grid: &'a GridSpec,
            dt: f64,
            horizon: f64,
            snapshots: Vec<f64>,
            radii: &'a [f64],
            paths: usize,
            master_seed: u64,
            target_time: f64,
            pairs: Vec<(f64, f64)>,
            picard_iterations: &'a Option<usize>,
            increments: (f64, Vec<f64>),
        }
        let canon = serde_json::to_string(&Physics {
            kind: &self.kind,
            kernel: &self.kernel,
            sigma: &self.sigma,
            grid: &self.grid,
            dt: self.dt,
            horizon: self.horizon,
            snapshots: self.snapshots(),
            radii: &self.radii,
            paths: self.paths,
            master_seed: self.master_seed,
            target_time: self.scan_time(),
            pairs: self.pairs(),
            picard_iterations: &self.picard_iterations,
            increments: self.deltas(),
        })
        .expect("physics subset serializes");
        fnv1a(canon.as_bytes())
    }
}

/// FNV-1a 64-bit.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
                "kind": "clt-scan",
                "kernel": {"type": "gaussian", "scale": 0.4},
                "sigma": {"type": "sine-shift", "eps": 0.5},
                "grid": {"n": 32, "len": 24.0},
                "radii": [2.0, 4.0],
                "paths": 16,
                "master_seed": 7
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_tagged_kernel_records() {
        let cfg = base();
        assert_eq!(cfg.kernel, KernelSpec::Gaussian { scale: 0.4 });
        assert_eq!(cfg.dt, 1.0 / 64.0);
        let riesz: KernelSpec = serde_json::from_str(r#"{"type":"riesz","beta":1.0}"#).unwrap();
        assert_eq!(riesz, KernelSpec::Riesz { beta: 1.0 });
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn names_violated_invariants() {
        let mut cfg = base();
        cfg.radii = vec![12.0];
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("L >= 2 (R_max + T) + 4h"), "{err}");

        let mut cfg = base();
        cfg.kernel = KernelSpec::Riesz { beta: 2.5 };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("Dalang"), "{err}");

        let mut cfg = base();
        cfg.sigma = SigmaSpec::Linear { a: 1.0, b: -1.0 };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("sigma(1) != 0"), "{err}");

        let mut cfg = base();
        cfg.snapshot_times = vec![0.33];
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("dt divides"), "{err}");
    }

    #[test]
    fn hash_tracks_physics_not_plumbing() {
        let cfg = base();
        let h0 = cfg.physics_hash();
        let mut moved = cfg.clone();
        moved.out_dir = PathBuf::from("elsewhere");
        assert_eq!(h0, moved.physics_hash());
        let mut reseeded = cfg.clone();
        reseeded.master_seed = 8;
        assert_ne!(h0, reseeded.physics_hash());
        let mut rescaled = cfg.clone();
        rescaled.kernel = KernelSpec::Gaussian { scale: 0.5 };
        assert_ne!(h0, rescaled.physics_hash());
        let mut regrid = cfg;
        regrid.grid.n = 64;
        assert_ne!(h0, regrid.physics_hash());
    }
}
