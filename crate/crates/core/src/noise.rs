//! Spatially correlated white-in-time Gaussian increments on the torus.
//!
//! One time slab of the driving noise is the real field
//!
//! ```text
//! dW(x) = sum_k A_k exp(2 pi i k x / L),   E|A_k|^2 = dt lambda_k,
//! ```
//!
//! with mode weights `lambda_k = L^-3 f(k/L)` given by the spectral density
//! `f` of the correlation kernel, so that `E[dW(x) dW(y)] = dt gamma_per(x-y)`
//! with `gamma_per` the periodized kernel. The zero mode is removed
//! (`lambda_0 = 0`): for the Riesz family the density blows up there, and
//! for integrable kernels the spectral measure puts no atom at the origin,
//! which is what makes the solution spatially ergodic. Modes on the Nyquist
//! shell enter at half weight per axis, the midpoint-rule convention for the
//! symmetric frequency cube.
//!
//! Draws are keyed by `(seed, path, step, mode)` through the counter RNG, so
//! increments are reproducible bit for bit regardless of scheduling.

use crate::fft::{CField, Fft3};
use crate::grid::TorusGrid;
use crate::kernels::{CorrelationKernel, KernelError};
use crate::math::FloatExt;
use crate::rng::{GaussianStream, SeedPolicy, StreamTag};
use alloc::vec;
use alloc::vec::Vec;

/// One time-step's integrated noise, as a real field over the grid.
#[derive(Debug, Clone)]
pub struct NoiseIncrement {
    pub grid: TorusGrid,
    pub dt: f64,
    pub values: Vec<f64>,
}

/// Mode weights `lambda_k` for a kernel on a grid: `L^-3 f(k/L)` away from
/// the origin, zero at the zero mode, half weight per Nyquist axis.
pub fn spectral_weights(
    grid: &TorusGrid,
    kernel: &CorrelationKernel,
) -> Result<Vec<f64>, KernelError> {
    let vol_factor = 1.0 / (grid.len() * grid.len() * grid.len());
    let mut weights = Vec::with_capacity(grid.points());
    for flat in 0..grid.points() {
        if flat == 0 {
            weights.push(0.0);
            continue;
        }
        let density = kernel.spectral_radial(grid.xi_norm(flat))?;
        weights.push(vol_factor * density * grid.nyquist_weight(flat));
    }
    Ok(weights)
}

/// Reusable sampler: weights, Hermitian pairing and transform plan built
/// once, then pure draws per `(path, step)`.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    grid: TorusGrid,
    /// Per-mode amplitude `sqrt(lambda_k)`, with the `1/sqrt(2)` split for
    /// paired modes folded in.
    amps: Vec<f64>,
    conj: Vec<u32>,
    weight_sum: f64,
}

impl NoiseSampler {
    pub fn new(grid: TorusGrid, kernel: &CorrelationKernel) -> Result<Self, KernelError> {
        let weights = spectral_weights(&grid, kernel)?;
        Ok(Self::from_weights(grid, &weights))
    }

    /// Build from explicit weights (used for degenerate and test kernels).
    pub fn from_weights(grid: TorusGrid, weights: &[f64]) -> Self {
        let conj = grid.conj_index_table();
        let amps = weights
            .iter()
            .zip(conj.iter())
            .enumerate()
            .map(|(m, (&w, &p))| {
                let amp = w.sqrt();
                if p as usize == m {
                    amp
                } else {
                    amp * core::f64::consts::FRAC_1_SQRT_2
                }
            })
            .collect();
        Self {
            grid,
            amps,
            conj,
            weight_sum: weights.iter().sum(),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// `sum_k lambda_k`, the exact lag-0 variance per unit `dt`.
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// Fill `out` with the Hermitian spectral coefficients of one increment:
    /// `A_k = sqrt(dt lambda_k) Z_k` with `Z` complex standard normal on the
    /// half spectrum, real on self-conjugate modes.
    pub fn fill_spectral(&self, dt: f64, stream: &GaussianStream, out: &mut CField) {
        let sqrt_dt = dt.sqrt();
        let n = self.amps.len();
        for m in 0..n {
            let p = self.conj[m] as usize;
            if p < m {
                continue;
            }
            let s = self.amps[m] * sqrt_dt;
            if s == 0.0 {
                out.re[m] = 0.0;
                out.im[m] = 0.0;
                if p != m {
                    out.re[p] = 0.0;
                    out.im[p] = 0.0;
                }
                continue;
            }
            let (a, b) = stream.pair(m as u32);
            if p == m {
                out.re[m] = s * a;
                out.im[m] = 0.0;
            } else {
                out.re[m] = s * a;
                out.im[m] = s * b;
                out.re[p] = s * a;
                out.im[p] = -(s * b);
            }
        }
    }

    /// One real increment field, together with the relative imaginary
    /// residue left by the synthesis transform (a health number: Hermitian
    /// symmetry makes it pure roundoff).
    pub fn sample_with_residue(
        &self,
        dt: f64,
        seed: &SeedPolicy,
        path: u32,
        step: u32,
    ) -> (NoiseIncrement, f64) {
        let len = self.grid.points();
        let plan = Fft3::new(self.grid.n());
        let mut spec = CField::zeros(len);
        let stream = seed.stream(StreamTag::Noise, path, step);
        self.fill_spectral(dt, &stream, &mut spec);
        plan.transform(&mut spec.re, &mut spec.im, true);
        let mut norm2 = 0.0;
        let mut max_im = 0.0_f64;
        for m in 0..len {
            norm2 += spec.re[m] * spec.re[m];
            max_im = max_im.max(spec.im[m].abs());
        }
        let rms = (norm2 / len as f64).sqrt();
        let residue = if rms > 0.0 { max_im / rms } else { max_im };
        (
            NoiseIncrement {
                grid: self.grid,
                dt,
                values: spec.re,
            },
            residue,
        )
    }

    /// One real increment field for `(path, step)`.
    pub fn sample(&self, dt: f64, seed: &SeedPolicy, path: u32, step: u32) -> NoiseIncrement {
        self.sample_with_residue(dt, seed, path, step).0
    }
}

/// Convenience form matching the one-shot call signature: builds the
/// sampler, draws one increment.
pub fn sample_increment(
    grid: TorusGrid,
    kernel: &CorrelationKernel,
    dt: f64,
    seed: &SeedPolicy,
    path: u32,
    step: u32,
) -> Result<NoiseIncrement, KernelError> {
    Ok(NoiseSampler::new(grid, kernel)?.sample(dt, seed, path, step))
}

impl NoiseIncrement {
    /// A zero increment (used by the deterministic solver modes and tests).
    pub fn zero(grid: TorusGrid, dt: f64) -> Self {
        Self {
            grid,
            dt,
            values: vec![0.0; grid.points()],
        }
    }
}
