//! Ensemble estimators for the fluctuation experiments.
//!
//! The central quantity is the per-path sample `F_R(t)`; everything here
//! reduces ensembles of those samples (and of field snapshots) to the
//! numbers the limit theorems speak about: variances with standard errors,
//! the Wasserstein-1 distance to the standard normal (computed by quantile
//! coupling, which is exact optimal transport in one dimension), power-law
//! exponent fits, paired covariances, the mean `eta(r) = E[sigma(u(r,.))]`,
//! spatial covariance lag curves, and second moments of time increments.

use crate::fft::{CField, Fft3};
use crate::grid::TorusGrid;
use crate::math::FloatExt;
use crate::rng::CounterRng;
use crate::solver::{FieldState, SigmaFunction};
use crate::special::{normal_cdf, normal_quantile};
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("ensemble has {got} samples, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("degenerate ensemble: zero variance")]
    DegenerateEnsemble,
    #[error("ensembles are not paired (path sets or metadata differ)")]
    Unpaired,
    #[error("scaling fit needs positive radii and values")]
    NonpositiveFitInput,
    #[error("scaling fit needs at least 3 strictly increasing radii")]
    BadFitGrid,
    #[error("ensemble of fields is empty")]
    EmptyEnsemble,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("lag is not an integer multiple of the cell size")]
    LagOffGrid,
}

/// Identifies the experiment slice an ensemble came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMeta {
    pub radius: f64,
    pub t: f64,
    pub config_hash: u64,
    pub seed: u64,
}

/// Per-path samples of one scalar statistic (one `F_R(t)` per path).
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub samples: Vec<f64>,
    pub meta: EnsembleMeta,
}

impl Ensemble {
    pub fn new(samples: Vec<f64>, meta: EnsembleMeta) -> Self {
        Self { samples, meta }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    fn paired_with(&self, other: &Ensemble) -> Result<(), StatsError> {
        let a = &self.meta;
        let b = &other.meta;
        if self.samples.len() != other.samples.len()
            || a.radius != b.radius
            || a.config_hash != b.config_hash
            || a.seed != b.seed
        {
            return Err(StatsError::Unpaired);
        }
        Ok(())
    }
}

/// Center by the sample mean, scale by the sample standard deviation.
pub fn normalize(e: &Ensemble) -> Result<Ensemble, StatsError> {
    if e.samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            got: e.samples.len(),
            need: 2,
        });
    }
    let mean = e.mean();
    // Population variance: the sample is the law being standardized.
    let var = e
        .samples
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / e.samples.len() as f64;
    if var <= 0.0 {
        return Err(StatsError::DegenerateEnsemble);
    }
    let sd = var.sqrt();
    Ok(Ensemble {
        samples: e.samples.iter().map(|x| (x - mean) / sd).collect(),
        meta: e.meta.clone(),
    })
}

/// Unbiased sample variance and its standard error (fourth-moment formula).
pub fn variance_with_ci(e: &Ensemble) -> Result<(f64, f64), StatsError> {
    let m = e.samples.len();
    if m < 2 {
        return Err(StatsError::TooFewSamples { got: m, need: 2 });
    }
    let mean = e.mean();
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in &e.samples {
        let d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let mf = m as f64;
    let var = m2 / (mf - 1.0);
    let m4 = m4 / mf;
    let se2 = (m4 - (mf - 3.0) / (mf - 1.0) * var * var).max(0.0) / mf;
    Ok((var, se2.sqrt()))
}

/// Distances of an ensemble's law to the standard normal.
#[derive(Debug, Clone)]
pub struct DistanceReport {
    /// Wasserstein-1 by quantile coupling against `Phi^-1((i - 1/2)/M)`.
    pub w1: f64,
    /// Kolmogorov-Smirnov statistic against the normal CDF.
    pub kolmogorov: f64,
    /// Sample count.
    pub m: usize,
    /// Average W1 a true standard normal sample of this size shows
    /// (32 synthetic replicas), the Monte Carlo resolution floor.
    pub mc_floor: f64,
}

/// Average quantile-coupling W1 of synthetic standard-normal samples of
/// size `m`; deterministic (fixed internal seed).
pub fn w1_mc_floor(m: usize) -> f64 {
    let replicas = 32;
    let mut rng = CounterRng::new(0x9c67_21aa_59d3_1e07);
    let mut acc = 0.0;
    let mut buf = vec![0.0; m];
    for _ in 0..replicas {
        for slot in buf.iter_mut() {
            *slot = rng.normal();
        }
        acc += w1_sorted_to_normal(&mut buf);
    }
    acc / replicas as f64
}

/// Sorts in place, returns the quantile-coupled W1 to the standard normal.
fn w1_sorted_to_normal(samples: &mut [f64]) -> f64 {
    samples.sort_unstable_by(f64::total_cmp);
    let m = samples.len() as f64;
    let mut acc = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let q = normal_quantile((i as f64 + 0.5) / m);
        acc += (x - q).abs();
    }
    acc / m
}

/// W1 and Kolmogorov distance of the ensemble law to N(0,1). With
/// `normalized`, the ensemble is standardized first.
pub fn wasserstein1_to_normal(
    e: &Ensemble,
    normalized: bool,
) -> Result<DistanceReport, StatsError> {
    if e.samples.len() < 100 {
        return Err(StatsError::TooFewSamples {
            got: e.samples.len(),
            need: 100,
        });
    }
    let mut samples = if normalized {
        normalize(e)?.samples
    } else {
        e.samples.clone()
    };
    let w1 = w1_sorted_to_normal(&mut samples);
    let m = samples.len();
    let mf = m as f64;
    let mut kol = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = normal_cdf(x);
        kol = kol.max((cdf - i as f64 / mf).abs());
        kol = kol.max((cdf - (i as f64 + 1.0) / mf).abs());
    }
    Ok(DistanceReport {
        w1,
        kolmogorov: kol,
        m,
        mc_floor: w1_mc_floor(m),
    })
}

/// Least-squares power-law fit in log-log coordinates.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn scaling_exponent_fit(points: &[(f64, f64)]) -> Result<ScalingFit, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::BadFitGrid);
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(StatsError::BadFitGrid);
    }
    if points.iter().any(|&(r, v)| r <= 0.0 || v <= 0.0) {
        return Err(StatsError::NonpositiveFitInput);
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(r, v)| (r.ln(), v.ln())).collect();
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in &logs {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(ScalingFit {
        radii: points.iter().map(|p| p.0).collect(),
        values: points.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        r_squared,
    })
}

/// Sample covariance of two path-paired ensembles, with standard error.
pub fn covariance_estimate(e1: &Ensemble, e2: &Ensemble) -> Result<(f64, f64), StatsError> {
    e1.paired_with(e2)?;
    let m = e1.samples.len();
    if m < 2 {
        return Err(StatsError::TooFewSamples { got: m, need: 2 });
    }
    let mf = m as f64;
    let mean1 = e1.mean();
    let mean2 = e2.mean();
    let mut c = 0.0;
    let mut c22 = 0.0;
    for (x, y) in e1.samples.iter().zip(&e2.samples) {
        let dx = x - mean1;
        let dy = y - mean2;
        c += dx * dy;
        c22 += dx * dx * dy * dy;
    }
    let cov = c / (mf - 1.0);
    let se = ((c22 / mf - cov * cov).max(0.0) / mf).sqrt();
    Ok((cov, se))
}

/// Second moment of the increment `F_R(t) - F_R(s)` over paired paths,
/// with standard error.
pub fn increment_moment(e_s: &Ensemble, e_t: &Ensemble) -> Result<(f64, f64), StatsError> {
    e_s.paired_with(e_t)?;
    let m = e_s.samples.len();
    if m < 2 {
        return Err(StatsError::TooFewSamples { got: m, need: 2 });
    }
    let mf = m as f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (x, y) in e_s.samples.iter().zip(&e_t.samples) {
        let d2 = (y - x) * (y - x);
        s1 += d2;
        s2 += d2 * d2;
    }
    let mean = s1 / mf;
    let se = ((s2 / mf - mean * mean).max(0.0) / mf).sqrt();
    Ok((mean, se))
}

/// `eta(r) = E[sigma(u(r, .))]`, pooled over paths and grid points
/// (stationarity makes the spatial pooling an unbiased variance reduction).
pub fn eta_estimate(fields: &[FieldState], sigma: &SigmaFunction) -> Result<f64, StatsError> {
    if fields.is_empty() {
        return Err(StatsError::EmptyEnsemble);
    }
    let grid = fields[0].grid;
    let mut acc = 0.0;
    for f in fields {
        if f.grid != grid {
            return Err(StatsError::GridMismatch);
        }
        for &u in &f.u {
            acc += sigma.eval(u);
        }
    }
    Ok(acc / (fields.len() * grid.points()) as f64)
}

/// Pooled spatial covariance `Cov(u(t1, x + lag), u(t2, x))` at physical
/// lags (each component an integer multiple of `h`).
pub fn spatial_covariance_lag(
    fields_t1: &[FieldState],
    fields_t2: &[FieldState],
    lags: &[[f64; 3]],
) -> Result<Vec<f64>, StatsError> {
    if fields_t1.is_empty() || fields_t1.len() != fields_t2.len() {
        return Err(StatsError::EmptyEnsemble);
    }
    let grid = fields_t1[0].grid;
    for f in fields_t1.iter().chain(fields_t2.iter()) {
        if f.grid != grid {
            return Err(StatsError::GridMismatch);
        }
    }
    let h = grid.h();
    let n = grid.n() as i64;
    let mut cell_lags = Vec::with_capacity(lags.len());
    for lag in lags {
        let mut cells = [0i64; 3];
        for d in 0..3 {
            let c = lag[d] / h;
            if (c - c.round()).abs() > 1e-9 {
                return Err(StatsError::LagOffGrid);
            }
            cells[d] = c.round() as i64;
        }
        cell_lags.push(cells);
    }
    let points = grid.points() as f64;
    let paths = fields_t1.len() as f64;
    let mean1: f64 = fields_t1
        .iter()
        .map(|f| f.u.iter().sum::<f64>())
        .sum::<f64>()
        / (points * paths);
    let mean2: f64 = fields_t2
        .iter()
        .map(|f| f.u.iter().sum::<f64>())
        .sum::<f64>()
        / (points * paths);
    let nn = grid.n();
    let wrap = |a: i64| -> usize { (a.rem_euclid(n)) as usize };
    let mut out = Vec::with_capacity(cell_lags.len());
    for cells in &cell_lags {
        let mut acc = 0.0;
        for (f1, f2) in fields_t1.iter().zip(fields_t2.iter()) {
            for i in 0..nn {
                let ii = wrap(i as i64 + cells[0]);
                for j in 0..nn {
                    let jj = wrap(j as i64 + cells[1]);
                    for l in 0..nn {
                        let ll = wrap(l as i64 + cells[2]);
                        acc += f1.u[grid.flat(ii, jj, ll)] * f2.u[grid.flat(i, j, l)];
                    }
                }
            }
        }
        out.push(acc / (points * paths) - mean1 * mean2);
    }
    Ok(out)
}

/// Streaming cross-correlation accumulator: one spectral cross product per
/// path, finalized into the full covariance lag field. Equivalent to
/// [`spatial_covariance_lag`] at every lattice lag, at transform cost.
pub struct LagCovarianceAccumulator {
    grid: TorusGrid,
    plan: Fft3,
    conj: Vec<u32>,
    cross: CField,
    sum_cross: Vec<f64>,
    sum_mean1: f64,
    sum_mean2: f64,
    paths: usize,
    spec1: CField,
    spec2: CField,
    scratch: CField,
}

impl LagCovarianceAccumulator {
    pub fn new(grid: TorusGrid) -> Self {
        let points = grid.points();
        Self {
            grid,
            plan: Fft3::new(grid.n()),
            conj: grid.conj_index_table(),
            cross: CField::zeros(points),
            sum_cross: vec![0.0; points],
            sum_mean1: 0.0,
            sum_mean2: 0.0,
            paths: 0,
            spec1: CField::zeros(points),
            spec2: CField::zeros(points),
            scratch: CField::zeros(points),
        }
    }

    /// Add one path's `(u(t1), u(t2))` field pair.
    pub fn add_path(&mut self, u1: &[f64], u2: &[f64]) {
        let points = self.grid.points() as f64;
        self.plan.forward_two_real(
            u1,
            u2,
            &self.conj,
            &mut self.spec1,
            &mut self.spec2,
            &mut self.scratch,
        );
        let scale = 1.0 / (points * points);
        for m in 0..self.grid.points() {
            // F1 conj(F2) / N^6; the inverse synthesis then yields the
            // spatial mean of u1(x + lag) u2(x).
            let re =
                (self.spec1.re[m] * self.spec2.re[m] + self.spec1.im[m] * self.spec2.im[m]) * scale;
            let im =
                (self.spec1.im[m] * self.spec2.re[m] - self.spec1.re[m] * self.spec2.im[m]) * scale;
            self.cross.re[m] = re;
            self.cross.im[m] = im;
        }
        self.plan
            .transform(&mut self.cross.re, &mut self.cross.im, true);
        for m in 0..self.grid.points() {
            self.sum_cross[m] += self.cross.re[m];
        }
        self.sum_mean1 += u1.iter().sum::<f64>() / points;
        self.sum_mean2 += u2.iter().sum::<f64>() / points;
        self.paths += 1;
    }

    /// Merge another accumulator (same grid) into this one; addition order
    /// of path blocks is the caller's contract for reproducibility.
    pub fn merge(&mut self, other: &LagCovarianceAccumulator) {
        assert_eq!(self.grid, other.grid);
        for m in 0..self.sum_cross.len() {
            self.sum_cross[m] += other.sum_cross[m];
        }
        self.sum_mean1 += other.sum_mean1;
        self.sum_mean2 += other.sum_mean2;
        self.paths += other.paths;
    }

    pub fn finalize(&self) -> CovarianceLagField {
        let mf = self.paths as f64;
        let m1 = self.sum_mean1 / mf;
        let m2 = self.sum_mean2 / mf;
        CovarianceLagField {
            grid: self.grid,
            values: self.sum_cross.iter().map(|&s| s / mf - m1 * m2).collect(),
        }
    }
}

/// The pooled covariance at every lattice lag.
#[derive(Debug, Clone)]
pub struct CovarianceLagField {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl CovarianceLagField {
    /// Covariance at an integer cell lag (periodic).
    pub fn value_at_cells(&self, lag: [i64; 3]) -> f64 {
        let n = self.grid.n() as i64;
        let idx = self.grid.flat(
            lag[0].rem_euclid(n) as usize,
            lag[1].rem_euclid(n) as usize,
            lag[2].rem_euclid(n) as usize,
        );
        self.values[idx]
    }

    /// `h^3 sum over |lag| <= radius` of the covariance: the lag-curve
    /// integral entering the integrable-case limit.
    pub fn integrate_ball(&self, radius: f64) -> f64 {
        let n = self.grid.n();
        let mut acc = 0.0;
        for i in 0..n {
            let x = self.grid.coord(i);
            for j in 0..n {
                let y = self.grid.coord(j);
                for l in 0..n {
                    let z = self.grid.coord(l);
                    if x * x + y * y + z * z <= radius * radius {
                        acc += self.values[self.grid.flat(i, j, l)];
                    }
                }
            }
        }
        acc * self.grid.cell_volume()
    }

    /// Largest meaningful truncation radius on this torus.
    pub fn max_radius(&self) -> f64 {
        0.5 * self.grid.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> EnsembleMeta {
        EnsembleMeta {
            radius: 2.0,
            t: 1.0,
            config_hash: 42,
            seed: 7,
        }
    }

    fn synthetic_normal(m: usize, seed: u64, loc: f64, scale: f64) -> Ensemble {
        let mut rng = CounterRng::new(seed);
        Ensemble::new((0..m).map(|_| loc + scale * rng.normal()).collect(), meta())
    }

    #[test]
    fn normalize_examples() {
        let e = Ensemble::new(vec![-1.0, 1.0], meta());
        let n = normalize(&e).unwrap();
        assert_eq!(n.samples, vec![-1.0, 1.0]);
        let constant = Ensemble::new(vec![3.0; 50], meta());
        assert!(matches!(
            normalize(&constant),
            Err(StatsError::DegenerateEnsemble)
        ));
        // Affine invariance: normalize(a X + b) = normalize(X), a > 0.
        let x = synthetic_normal(500, 1, 0.0, 1.0);
        let y = Ensemble::new(x.samples.iter().map(|v| 2.5 * v - 7.0).collect(), meta());
        let nx = normalize(&x).unwrap();
        let ny = normalize(&y).unwrap();
        for (a, b) in nx.samples.iter().zip(&ny.samples) {
            assert!((a - b).abs() < 1e-12);
        }
        // Idempotence.
        let nnx = normalize(&nx).unwrap();
        for (a, b) in nx.samples.iter().zip(&nnx.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_examples() {
        let e = Ensemble::new(vec![0.0, 2.0], meta());
        let (var, _) = variance_with_ci(&e).unwrap();
        assert!((var - 2.0).abs() < 1e-15);
        // Synthetic N(0, 4): variance within 3 standard errors of 4.
        let e = synthetic_normal(10_000, 3, 0.0, 2.0);
        let (var, se) = variance_with_ci(&e).unwrap();
        assert!((var - 4.0).abs() < 3.0 * se, "var {var}, se {se}");
        // Scaling: c^2.
        let scaled = Ensemble::new(e.samples.iter().map(|x| 3.0 * x).collect(), meta());
        let (var9, _) = variance_with_ci(&scaled).unwrap();
        assert!((var9 - 9.0 * var).abs() < 1e-9 * var9);
    }

    #[test]
    fn w1_of_exact_quantiles_is_small() {
        let m = 10_000;
        let samples: Vec<f64> = (0..m)
            .map(|i| normal_quantile((i as f64 + 0.5) / m as f64))
            .collect();
        let e = Ensemble::new(samples, meta());
        let report = wasserstein1_to_normal(&e, false).unwrap();
        assert!(report.w1 < 1e-3, "w1 = {}", report.w1);
        assert!(report.kolmogorov <= 1.0);
    }

    #[test]
    fn w1_of_point_mass_is_mean_abs_normal() {
        let e = Ensemble::new(vec![0.0; 10_000], meta());
        let report = wasserstein1_to_normal(&e, false).unwrap();
        let want = (2.0 / crate::math::PI).sqrt();
        assert!(
            (report.w1 - want).abs() < 2e-3,
            "w1 {} vs E|Z| {want}",
            report.w1
        );
    }

    #[test]
    fn w1_shift_detection() {
        let m = 20_000;
        let samples: Vec<f64> = (0..m)
            .map(|i| 3.0 + normal_quantile((i as f64 + 0.5) / m as f64))
            .collect();
        let e = Ensemble::new(samples, meta());
        let report = wasserstein1_to_normal(&e, false).unwrap();
        assert!((report.w1 - 3.0).abs() < 0.01 * 3.0);
    }

    #[test]
    fn w1_floor_calibration() {
        // Synthetic standard-normal ensembles of size 10^4: w1 below 0.03
        // in at least 95 of 100 trials.
        let mut below = 0;
        for trial in 0..100u64 {
            let e = synthetic_normal(10_000, 1000 + trial, 0.0, 1.0);
            let mut s = e.samples.clone();
            let w1 = w1_sorted_to_normal(&mut s);
            if w1 < 0.03 {
                below += 1;
            }
        }
        assert!(below >= 95, "only {below}/100 trials below 0.03");
        // And too-small ensembles are rejected.
        let tiny = synthetic_normal(50, 1, 0.0, 1.0);
        assert!(matches!(
            wasserstein1_to_normal(&tiny, false),
            Err(StatsError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn scaling_fit_examples() {
        let fit = scaling_exponent_fit(&[(2.0, 8.0), (4.0, 64.0), (8.0, 512.0)]).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = scaling_exponent_fit(&[(2.0, 32.0), (4.0, 1024.0), (8.0, 32768.0)]).unwrap();
        assert!((fit.slope - 5.0).abs() < 1e-12);
        // A gross outlier degrades r^2 detectably.
        let fit =
            scaling_exponent_fit(&[(2.0, 8.0), (4.0, 64.0), (6.0, 2000.0), (8.0, 512.0)]).unwrap();
        assert!(fit.r_squared < 0.999);
        // Errors.
        assert!(scaling_exponent_fit(&[(2.0, 8.0), (4.0, 64.0)]).is_err());
        assert!(matches!(
            scaling_exponent_fit(&[(2.0, 8.0), (4.0, -1.0), (8.0, 512.0)]),
            Err(StatsError::NonpositiveFitInput)
        ));
        assert!(matches!(
            scaling_exponent_fit(&[(2.0, 8.0), (2.0, 9.0), (8.0, 512.0)]),
            Err(StatsError::BadFitGrid)
        ));
    }

    #[test]
    fn covariance_examples() {
        let e = synthetic_normal(5000, 11, 0.0, 1.5);
        // Self-covariance equals the variance.
        let (cov, _) = covariance_estimate(&e, &e).unwrap();
        let (var, _) = variance_with_ci(&e).unwrap();
        assert!((cov - var).abs() < 1e-12 * var);
        // Independent ensembles: zero within 4 standard errors.
        let f = synthetic_normal(5000, 12, 0.0, 1.5);
        let (cov, se) = covariance_estimate(&e, &f).unwrap();
        assert!(cov.abs() < 4.0 * se);
        // Symmetry.
        let (cov_ab, _) = covariance_estimate(&e, &f).unwrap();
        let (cov_ba, _) = covariance_estimate(&f, &e).unwrap();
        assert!((cov_ab - cov_ba).abs() < 1e-14);
        // t = 0 ensemble: all zeros (u(0,.) = 1), covariance exactly 0.
        let zero = Ensemble::new(vec![0.0; 5000], meta());
        let (cov, _) = covariance_estimate(&e, &zero).unwrap();
        assert_eq!(cov, 0.0);
        // Unpaired: different path counts.
        let short = Ensemble::new(vec![1.0; 100], meta());
        assert!(matches!(
            covariance_estimate(&e, &short),
            Err(StatsError::Unpaired)
        ));
    }

    #[test]
    fn increment_examples() {
        let e = synthetic_normal(2000, 13, 0.0, 1.0);
        let (mom, _) = increment_moment(&e, &e).unwrap();
        assert_eq!(mom, 0.0);
        let f = Ensemble::new(e.samples.iter().map(|x| x + 0.5).collect(), meta());
        let (mom, se) = increment_moment(&e, &f).unwrap();
        assert!((mom - 0.25).abs() < 4.0 * se + 1e-12);
    }

    #[test]
    fn eta_examples() {
        let grid = TorusGrid::new(8, 4.0).unwrap();
        let sigma = SigmaFunction::SineShift { eps: 0.5 };
        // u(0,.) = 1 exactly: eta(0) = sigma(1).
        let fields = vec![FieldState::initial(grid); 3];
        let eta = eta_estimate(&fields, &sigma).unwrap();
        assert!((eta - sigma.at_one()).abs() < 1e-12);
        assert!(eta_estimate(&[], &sigma).is_err());
    }

    #[test]
    fn lag_covariance_direct_and_spectral_agree() {
        let grid = TorusGrid::new(8, 4.0).unwrap();
        let mut rng = CounterRng::new(91);
        let paths = 6;
        let mut fields1 = Vec::new();
        let mut fields2 = Vec::new();
        let mut acc = LagCovarianceAccumulator::new(grid);
        for _ in 0..paths {
            let mut f1 = FieldState::initial(grid);
            let mut f2 = FieldState::initial(grid);
            for m in 0..grid.points() {
                f1.u[m] = 1.0 + rng.normal();
                f2.u[m] = 1.0 + 0.5 * rng.normal() + 0.3 * (f1.u[m] - 1.0);
            }
            acc.add_path(&f1.u, &f2.u);
            fields1.push(f1);
            fields2.push(f2);
        }
        let lag_field = acc.finalize();
        let h = grid.h();
        let lags = [
            [0.0, 0.0, 0.0],
            [h, 0.0, 0.0],
            [0.0, 2.0 * h, 0.0],
            [h, h, -h],
        ];
        let direct = spatial_covariance_lag(&fields1, &fields2, &lags).unwrap();
        let cells = [[0i64, 0, 0], [1, 0, 0], [0, 2, 0], [1, 1, -1]];
        for (d, c) in direct.iter().zip(&cells) {
            let s = lag_field.value_at_cells(*c);
            assert!((d - s).abs() < 1e-10, "direct {d} vs spectral {s}");
        }
        // Off-grid lag is an error.
        assert!(matches!(
            spatial_covariance_lag(&fields1, &fields2, &[[0.3 * h, 0.0, 0.0]]),
            Err(StatsError::LagOffGrid)
        ));
    }

    #[test]
    fn lag_symmetry_at_equal_times() {
        let grid = TorusGrid::new(8, 4.0).unwrap();
        let mut rng = CounterRng::new(92);
        let mut fields = Vec::new();
        for _ in 0..8 {
            let mut f = FieldState::initial(grid);
            for m in 0..grid.points() {
                f.u[m] = 1.0 + rng.normal();
            }
            fields.push(f);
        }
        let h = grid.h();
        let lags = [[h, 0.0, 0.0], [-h, 0.0, 0.0], [0.0, h, h], [0.0, -h, -h]];
        let v = spatial_covariance_lag(&fields, &fields, &lags).unwrap();
        // value(lag) = value(-lag) when t1 = t2 (same field set): exact for
        // the pooled estimator on the torus.
        assert!((v[0] - v[1]).abs() < 1e-12);
        assert!((v[2] - v[3]).abs() < 1e-12);
        // Lag 0 at equal times is a variance: nonnegative.
        let v0 = spatial_covariance_lag(&fields, &fields, &[[0.0; 3]]).unwrap()[0];
        assert!(v0 >= 0.0);
        // Zero-noise fields are identically 1: every lag covariance is 0
        // exactly, in particular beyond the light-cone support.
        let flat = vec![FieldState::initial(grid); 4];
        let far = spatial_covariance_lag(&flat, &flat, &[[h, h, h], [0.0; 3]]).unwrap();
        assert!(far.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lag_field_ball_integration() {
        let grid = TorusGrid::new(8, 4.0).unwrap();
        // Covariance concentrated at lag 0: integral picks exactly h^3 c0.
        let mut acc = LagCovarianceAccumulator::new(grid);
        let mut rng = CounterRng::new(93);
        for _ in 0..4 {
            let u: Vec<f64> = (0..grid.points()).map(|_| rng.normal()).collect();
            acc.add_path(&u, &u);
        }
        let field = acc.finalize();
        let just_zero = field.integrate_ball(0.4 * grid.h());
        assert!((just_zero - grid.cell_volume() * field.value_at_cells([0, 0, 0])).abs() < 1e-12);
        assert!(field.max_radius() == 2.0);
    }
}
