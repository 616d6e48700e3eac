//! Spectral simulation core for the three-dimensional stochastic wave
//! equation
//!
//! ```text
//! (d^2/dt^2 - Laplacian) u(t,x) = sigma(u(t,x)) dW(t,x),   u(0,.) = 1,  du/dt(0,.) = 0,
//! ```
//!
//! driven by Gaussian noise white in time with spatially homogeneous
//! correlation `gamma` (integrable or Riesz `|x|^-beta`). The crate provides
//! everything needed to simulate the field on a periodic torus and to test
//! the Gaussian-fluctuation behavior of ball averages
//! `F_R(t) = integral over B_R of (u(t,x) - 1) dx`:
//!
//! - [`kernels`]: correlation functions, spectral densities, the Dalang
//!   integrability check, and the geometric constants of the Riesz case;
//! - [`propagator`]: Fourier multipliers of the wave fundamental solution,
//!   the mollifier sequence, and ball-indicator transforms;
//! - [`noise`]: spatially correlated white-in-time increments with
//!   counter-based seeding;
//! - [`solver`]: the stochastic trigonometric integrator and the mollified
//!   Picard iteration;
//! - [`averages`]: ball averaging weights and the spatial functional;
//! - [`stats`]: ensemble estimators (variance, quantile-coupling Wasserstein
//!   distance, scaling fits, lag covariances, increment moments);
//! - [`oracle`]: semi-analytic quadrature targets for the additive case and
//!   the limiting covariance formulas.
//!
//! The crate is `no_std` (alloc only); all host-dependent math goes through
//! `libm` so results are reproducible bit for bit.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod averages;
pub mod fft;
pub mod grid;
pub mod kernels;
pub mod math;
pub mod noise;
pub mod oracle;
pub mod propagator;
pub mod quad;
pub mod rng;
pub mod solver;
pub mod special;
pub mod stats;

pub use grid::TorusGrid;
pub use kernels::CorrelationKernel;
pub use rng::SeedPolicy;
pub use solver::{FieldState, SigmaFunction, SolverConfig, SolverMode};
