//! Fourier multipliers of the wave propagator and its mollifications.
//!
//! The fundamental solution `G(t)` of the 3D wave equation is the uniform
//! measure on the sphere of radius `t` scaled by `1/(4 pi t)`; everything
//! here works with its transform
//!
//! ```text
//! FG(t)(xi) = sin(2 pi t |xi|) / (2 pi |xi|),
//! ```
//!
//! extended continuously by `t` at `xi = 0`. The mollified kernels
//! `G_n = rho_n * G(t)` (with `rho_n(x) = a_n^3 rho(a_n x)` built from the
//! standard bump supported in the unit ball) factorize in Fourier variables
//! as `FG_n = Frho(. / a_n) FG`, which is how the Picard iteration uses
//! them. `Frho` has no closed form; it is computed once by radial
//! quadrature, tabulated on a log-spaced grid, and interpolated.

use crate::math::{sinc, FloatExt, PI, TWO_PI};
use crate::quad;
use alloc::sync::Arc;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PropagatorError {
    #[error("mollifier sequence must be positive and strictly increasing")]
    BadMollifierSequence,
    #[error("mollifier index {0} out of range 1..={1}")]
    MollifierIndex(usize, usize),
}

/// `FG(t)(xi) = sin(2 pi t |xi|)/(2 pi |xi|)`, continuous extension `t` at
/// the origin. Bounded by `t` in magnitude.
#[inline]
pub fn fourier_g(t: f64, xi: [f64; 3]) -> f64 {
    fourier_g_radial(t, xi[0].hypot3(xi[1], xi[2]))
}

/// Radial form of [`fourier_g`], taking `|xi|` directly.
#[inline]
pub fn fourier_g_radial(t: f64, xi_norm: f64) -> f64 {
    t * sinc(TWO_PI * t * xi_norm)
}

/// `F 1_{B_R}(xi)`, the transform of the ball indicator:
/// `4 pi R^3 (sin z - z cos z)/z^3` at `z = 2 pi R |xi|`, with continuous
/// extension `|B_R|` at the origin.
#[inline]
pub fn fourier_indicator_ball(radius: f64, xi: [f64; 3]) -> f64 {
    fourier_indicator_ball_radial(radius, xi[0].hypot3(xi[1], xi[2]))
}

/// Radial form of [`fourier_indicator_ball`].
#[inline]
pub fn fourier_indicator_ball_radial(radius: f64, xi_norm: f64) -> f64 {
    let z = TWO_PI * radius * xi_norm;
    4.0 * PI * radius * radius * radius * ball_shape(z)
}

/// `(sin z - z cos z)/z^3` with series near 0 (value 1/3).
#[inline]
fn ball_shape(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0
    } else {
        (z.sin() - z * z.cos()) / (z * z * z)
    }
}

/// Radial transform profile of the unit bump
/// `rho(x) = c exp(-1/(1-|x|^2))` on `|x| < 1`, tabulated once.
///
/// `eval(q)` returns `Frho` at radius `q`: quadratic Taylor below the first
/// grid point, cubic interpolation on the log-spaced grid, and 0 beyond the
/// table (the transform decays faster than any polynomial; at the table
/// edge it is far below roundoff).
#[derive(Debug, Clone)]
pub struct BumpTransform {
    q_min: f64,
    q_max: f64,
    log_step_inv: f64,
    values: Vec<f64>,
    curvature: f64,
}

const BUMP_TABLE_SIZE: usize = 2048;
const BUMP_Q_MIN: f64 = 1e-3;
const BUMP_Q_MAX: f64 = 64.0;

impl BumpTransform {
    pub fn build() -> Self {
        let c = bump_normalization();
        // Second moment gives the small-q Taylor coefficient:
        // Frho(q) = 1 - (2 pi q)^2 m2 / 6 + O(q^4).
        let m2 = 4.0
            * PI
            * c
            * quad::adaptive_simpson(&|r: f64| bump_profile_raw(r) * r.powi(4), 0.0, 1.0, 1e-12);
        let curvature = -(TWO_PI * TWO_PI) * m2 / 6.0;
        let log_min = BUMP_Q_MIN.ln();
        let log_max = BUMP_Q_MAX.ln();
        let step = (log_max - log_min) / (BUMP_TABLE_SIZE - 1) as f64;
        let values = (0..BUMP_TABLE_SIZE)
            .map(|i| Self::quadrature(c, (log_min + step * i as f64).exp()))
            .collect();
        Self {
            q_min: BUMP_Q_MIN,
            q_max: BUMP_Q_MAX,
            log_step_inv: 1.0 / step,
            values,
            curvature,
        }
    }

    /// Direct quadrature of the radial transform at radius `q`, used to
    /// build the table (and by tests to check the interpolation).
    pub fn quadrature_at(&self, q: f64) -> f64 {
        Self::quadrature(bump_normalization(), q)
    }

    fn quadrature(c: f64, q: f64) -> f64 {
        // 4 pi int_0^1 rho(r) r^2 sinc(2 pi q r) dr, resolved against the
        // oscillation wavelength 1/q.
        let panels = 64usize.max((q.abs() * 32.0) as usize);
        4.0 * PI
            * c
            * quad::composite_simpson(
                &|r: f64| bump_profile_raw(r) * r * r * sinc(TWO_PI * q * r),
                0.0,
                1.0,
                panels,
            )
    }

    /// `Frho` at radius `q` (even in `q`).
    pub fn eval(&self, q: f64) -> f64 {
        let q = q.abs();
        if q < self.q_min {
            return 1.0 + self.curvature * q * q;
        }
        if q >= self.q_max {
            return 0.0;
        }
        let pos = (q / self.q_min).ln() * self.log_step_inv;
        let idx = (pos as usize).min(BUMP_TABLE_SIZE - 2);
        let frac = pos - idx as f64;
        // Catmull-Rom in log-radius; linearly extended end slopes.
        let p1 = self.values[idx];
        let p2 = self.values[idx + 1];
        let p0 = if idx == 0 {
            2.0 * p1 - p2
        } else {
            self.values[idx - 1]
        };
        let p3 = if idx + 2 >= BUMP_TABLE_SIZE {
            2.0 * p2 - p1
        } else {
            self.values[idx + 2]
        };
        let t = frac;
        let t2 = t * t;
        let t3 = t2 * t;
        0.5 * ((2.0 * p1)
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
            + (3.0 * p1 - 3.0 * p2 + p3 - p0) * t3)
    }
}

#[inline]
fn bump_profile_raw(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

fn bump_normalization() -> f64 {
    1.0 / (4.0
        * PI
        * quad::adaptive_simpson(&|r: f64| bump_profile_raw(r) * r * r, 0.0, 1.0, 1e-12))
}

/// The scaling sequence `{a_n}` of the mollifiers `rho_n(x) = a_n^3 rho(a_n x)`,
/// constrained to `sum 1/a_n = 1`; the default geometric choice `a_n = 2^n`
/// satisfies that exactly. Owns the tabulated bump transform.
#[derive(Debug, Clone)]
pub struct MollifierSequence {
    a: Vec<f64>,
    bump: Arc<BumpTransform>,
}

impl MollifierSequence {
    /// Default sequence `a_n = 2^n`, `n = 1..=n_max`.
    pub fn geometric(n_max: usize) -> Self {
        let a = (1..=n_max).map(|n| (1u64 << n) as f64).collect();
        Self {
            a,
            bump: Arc::new(BumpTransform::build()),
        }
    }

    /// Custom positive strictly increasing sequence. The caller owns the
    /// `sum 1/a_n = 1` normalization (only finitely many terms are ever
    /// representable here).
    pub fn custom(a: Vec<f64>) -> Result<Self, PropagatorError> {
        if a.is_empty() || a[0] <= 0.0 || a.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PropagatorError::BadMollifierSequence);
        }
        Ok(Self {
            a,
            bump: Arc::new(BumpTransform::build()),
        })
    }

    pub fn n_max(&self) -> usize {
        self.a.len()
    }

    pub fn scale(&self, n: usize) -> Result<f64, PropagatorError> {
        if n == 0 {
            return Err(PropagatorError::MollifierIndex(n, self.a.len()));
        }
        self.a
            .get(n - 1)
            .copied()
            .ok_or(PropagatorError::MollifierIndex(n, self.a.len()))
    }

    pub fn bump(&self) -> &BumpTransform {
        &self.bump
    }

    /// `Frho_n(xi) = Frho(xi / a_n)`; equals 1 at the origin, bounded by 1.
    pub fn fourier_rho(&self, n: usize, xi: [f64; 3]) -> Result<f64, PropagatorError> {
        let a_n = self.scale(n)?;
        Ok(self.bump.eval(xi[0].hypot3(xi[1], xi[2]) / a_n))
    }

    /// Radial form of [`Self::fourier_rho`].
    pub fn fourier_rho_radial(&self, n: usize, xi_norm: f64) -> Result<f64, PropagatorError> {
        Ok(self.bump.eval(xi_norm / self.scale(n)?))
    }

    /// `FG_n(t)(xi) = Frho_n(xi) FG(t)(xi)`.
    pub fn fourier_g_n(&self, n: usize, t: f64, xi: [f64; 3]) -> Result<f64, PropagatorError> {
        Ok(self.fourier_rho(n, xi)? * fourier_g(t, xi))
    }
}

/// The multiplier `FG(t)` as a value type.
#[derive(Debug, Clone, Copy)]
pub struct WaveMultiplier {
    pub t: f64,
}

impl WaveMultiplier {
    pub fn new(t: f64) -> Self {
        assert!(t >= 0.0);
        Self { t }
    }

    #[inline]
    pub fn eval(&self, xi: [f64; 3]) -> f64 {
        fourier_g(self.t, xi)
    }
}

/// The multiplier `FG_n(t) = Frho_n FG(t)`, factorized by construction.
#[derive(Debug, Clone)]
pub struct MollifiedMultiplier {
    pub n: usize,
    pub t: f64,
    seq: MollifierSequence,
}

impl MollifiedMultiplier {
    pub fn new(n: usize, t: f64, seq: &MollifierSequence) -> Result<Self, PropagatorError> {
        seq.scale(n)?;
        assert!(t >= 0.0);
        Ok(Self {
            n,
            t,
            seq: seq.clone(),
        })
    }

    #[inline]
    pub fn eval(&self, xi: [f64; 3]) -> f64 {
        self.seq
            .fourier_rho(self.n, xi)
            .expect("index validated at construction")
            * fourier_g(self.t, xi)
    }
}
