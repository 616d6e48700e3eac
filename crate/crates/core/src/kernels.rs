//! Spatial correlation kernels and their spectral measures.
//!
//! The noise covariance is `E[dW(t,x) dW(s,y)] = delta(t-s) gamma(x-y)`
//! where `gamma` is nonnegative definite with spectral measure `mu`
//! (`gamma = F mu`). Two concrete families are provided:
//!
//! - `Riesz { beta }`: `gamma(x) = |x|^-beta`, spectral density
//!   `c_beta |xi|^(beta-3)` with `c_beta` from the Gamma-function formula
//!   under the `exp(-2 pi i xi . x)` transform convention;
//! - `Gaussian { scale }`: `gamma(x) = exp(-|x|^2 / (2 scale^2))`, positive
//!   and integrable, with closed-form transform.
//!
//! plus an escape hatch for custom radial kernels. The module also hosts the
//! Dalang integrability check `int <xi>^-2 mu(dxi) < inf` and the ball
//! geometry constant `tau_beta`.

use crate::math::{FloatExt, PI};
use crate::quad;
use crate::special::gamma_fn;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("riesz exponent beta = {0} outside (0, 3)")]
    RieszBetaOutOfRange(f64),
    #[error("gaussian kernel scale must be positive")]
    NonpositiveScale,
    #[error("kernel is singular at the origin")]
    SingularAtOrigin,
    #[error("custom spectral density returned a negative value at |xi| = {0}")]
    NegativeDensity(f64),
    #[error("tau_beta diverges for beta = {0} >= 3")]
    TauBetaDomain(f64),
}

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A custom radial kernel: both sides of the transform pair are supplied by
/// the caller together with a declared integrability flag for `gamma`.
#[derive(Clone)]
pub struct CustomKernel {
    pub gamma_radial: RadialFn,
    pub spectral_radial: RadialFn,
    pub gamma_integrable: bool,
    pub description: String,
}

impl core::fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CustomKernel")
            .field("gamma_integrable", &self.gamma_integrable)
            .field("description", &self.description)
            .finish()
    }
}

/// The spatial correlation `gamma` together with its spectral measure.
#[derive(Debug, Clone)]
pub enum CorrelationKernel {
    /// `gamma(x) = |x|^-beta`, `beta` in `(0, 3)`. Dalang-admissible (and
    /// hence usable for fluctuation experiments) only for `beta` in `(0, 2)`.
    Riesz {
        beta: f64,
    },
    /// `gamma(x) = exp(-|x|^2 / (2 scale^2))`, normalized to `gamma(0) = 1`.
    Gaussian {
        scale: f64,
    },
    Custom(CustomKernel),
}

impl CorrelationKernel {
    pub fn riesz(beta: f64) -> Result<Self, KernelError> {
        if beta <= 0.0 || beta >= 3.0 || !beta.is_finite() {
            return Err(KernelError::RieszBetaOutOfRange(beta));
        }
        Ok(Self::Riesz { beta })
    }

    pub fn gaussian(scale: f64) -> Result<Self, KernelError> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(KernelError::NonpositiveScale);
        }
        Ok(Self::Gaussian { scale })
    }

    pub fn description(&self) -> String {
        use alloc::format;
        match self {
            Self::Riesz { beta } => format!("riesz(beta={beta})"),
            Self::Gaussian { scale } => format!("gaussian(scale={scale})"),
            Self::Custom(c) => c.description.clone(),
        }
    }

    /// Whether the kernel satisfies the conditions of the fluctuation
    /// theorems without further checks: Riesz needs `beta < 2`, an
    /// integrable kernel qualifies directly.
    pub fn clt_admissible(&self) -> bool {
        match self {
            Self::Riesz { beta } => *beta < 2.0,
            Self::Gaussian { .. } => true,
            Self::Custom(c) => c.gamma_integrable,
        }
    }

    /// `gamma(x)`; radially symmetric, so only `|x|` matters.
    pub fn gamma_eval(&self, x: [f64; 3]) -> Result<f64, KernelError> {
        self.gamma_radial(x[0].hypot3(x[1], x[2]))
    }

    /// Radial profile of `gamma`.
    pub fn gamma_radial(&self, r: f64) -> Result<f64, KernelError> {
        match self {
            Self::Riesz { beta } => {
                if r == 0.0 {
                    Err(KernelError::SingularAtOrigin)
                } else {
                    Ok(r.powf(-beta))
                }
            }
            Self::Gaussian { scale } => Ok((-0.5 * r * r / (scale * scale)).exp()),
            Self::Custom(c) => Ok((c.gamma_radial)(r)),
        }
    }

    /// Lebesgue density of the spectral measure `mu` at `xi`.
    pub fn spectral_density(&self, xi: [f64; 3]) -> Result<f64, KernelError> {
        self.spectral_radial(xi[0].hypot3(xi[1], xi[2]))
    }

    /// Radial profile of the spectral density.
    pub fn spectral_radial(&self, r: f64) -> Result<f64, KernelError> {
        match self {
            Self::Riesz { beta } => {
                if r == 0.0 {
                    Err(KernelError::SingularAtOrigin)
                } else {
                    Ok(riesz_constant(*beta)? * r.powf(beta - 3.0))
                }
            }
            Self::Gaussian { scale } => {
                let s2 = scale * scale;
                let norm = (2.0 * PI * s2).powf(1.5);
                Ok(norm * (-2.0 * PI * PI * s2 * r * r).exp())
            }
            Self::Custom(c) => {
                let v = (c.spectral_radial)(r);
                if v < 0.0 {
                    Err(KernelError::NegativeDensity(r))
                } else {
                    Ok(v)
                }
            }
        }
    }

    /// `int gamma(x) dx` when available in closed form.
    pub fn gamma_l1_norm(&self) -> Option<f64> {
        match self {
            Self::Gaussian { scale } => Some((2.0 * PI * scale * scale).powf(1.5)),
            _ => None,
        }
    }

    /// Numerical check of Dalang's condition `int <xi>^-2 mu(dxi) < inf`
    /// by radial quadrature with doubling cutoffs. Non-convergence is
    /// reported, not raised.
    pub fn check_dalang(&self) -> DalangReport {
        let integrand = |r: f64| {
            let f = self.spectral_radial(r).unwrap_or(0.0);
            4.0 * PI * f * r * r / (1.0 + r * r)
        };
        let inner = quad::integrate_singular_origin(&integrand, 1.0, 1e-9);
        let (tail, converged, tail_hist) =
            quad::integrate_doubling_cutoff(&integrand, 1.0, 1e-9, 0.01, 48);
        let cutoff_history: Vec<(f64, f64)> = tail_hist
            .into_iter()
            .map(|(cutoff, partial)| (cutoff, inner + partial))
            .collect();
        DalangReport {
            integral_value: inner + tail,
            converged,
            cutoff_history,
        }
    }
}

/// Outcome of the Dalang-condition quadrature.
#[derive(Debug, Clone)]
pub struct DalangReport {
    /// Value of `int <xi>^-2 mu(dxi)` at the final cutoff.
    pub integral_value: f64,
    /// True when the last two cutoff doublings each changed the value by
    /// less than 1% relative.
    pub converged: bool,
    /// `(cutoff radius, partial value)` per doubling.
    pub cutoff_history: Vec<(f64, f64)>,
}

/// The constant `c_beta` with `F(|.|^-beta) = c_beta |xi|^(beta-3)` under
/// the `exp(-2 pi i xi . x)` convention:
/// `c_beta = pi^(beta - 3/2) Gamma((3-beta)/2) / Gamma(beta/2)`.
pub fn riesz_constant(beta: f64) -> Result<f64, KernelError> {
    if beta <= 0.0 || beta >= 3.0 || !beta.is_finite() {
        return Err(KernelError::RieszBetaOutOfRange(beta));
    }
    Ok(PI.powf(beta - 1.5) * gamma_fn(0.5 * (3.0 - beta)) / gamma_fn(0.5 * beta))
}

/// Probability density of the distance between two independent uniform
/// points of the unit ball, supported on `[0, 2]`.
#[inline]
pub fn ball_distance_density(r: f64) -> f64 {
    if !(0.0..=2.0).contains(&r) {
        return 0.0;
    }
    3.0 * r * r - 2.25 * r * r * r + 0.1875 * r.powi(5)
}

/// `tau_beta = int over B_1 x B_1 of |x - y|^-beta`, computed by reducing
/// the six-dimensional integral to the radial distance density:
/// `tau_beta = |B_1|^2 int_0^2 r^-beta p(r) dr`.
pub fn tau_beta(beta: f64) -> Result<f64, KernelError> {
    if beta >= 3.0 {
        return Err(KernelError::TauBetaDomain(beta));
    }
    if beta <= 0.0 {
        return Err(KernelError::RieszBetaOutOfRange(beta));
    }
    let ball = 4.0 * PI / 3.0;
    let integrand = |r: f64| ball_distance_density(r) * r.powf(-beta);
    Ok(ball * ball * quad::integrate_singular_origin(&integrand, 2.0, 1e-10))
}
