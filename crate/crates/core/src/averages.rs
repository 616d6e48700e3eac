//! Ball averages: quadrature weights for `F_R(t) = int_{B_R} (u(t,x) - 1) dx`.
//!
//! Cells fully inside the ball carry weight `h^3`, outside cells carry 0,
//! and boundary cells are resolved by 3x3x3 subsampling, which removes the
//! dominant staircase bias of a hard threshold at small `R/h`. The ball is
//! centered at the torus origin; the solution is strictly stationary in
//! space, so the center is irrelevant in law.

use crate::fft::{CField, Fft3};
use crate::grid::TorusGrid;
use crate::math::FloatExt;
use crate::solver::FieldState;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AveragesError {
    #[error("ball radius {radius} does not fit: need 2R + 4h <= L (L = {len})")]
    RadiusTooLarge { radius: f64, len: f64 },
    #[error("radius must be positive")]
    BadRadius,
    #[error("field and weights live on different grids")]
    GridMismatch,
}

/// Quadrature weights of one averaging ball, stored sparsely.
#[derive(Debug, Clone)]
pub struct BallWeights {
    pub grid: TorusGrid,
    pub radius: f64,
    /// `(flat cell index, weight in [0, h^3])`, inside and boundary cells.
    pub entries: Vec<(u32, f64)>,
    total: f64,
}

/// Build the averaging weights for radius `R`.
pub fn ball_weights(grid: &TorusGrid, radius: f64) -> Result<BallWeights, AveragesError> {
    if radius <= 0.0 || !radius.is_finite() {
        return Err(AveragesError::BadRadius);
    }
    let h = grid.h();
    if 2.0 * radius + 4.0 * h > grid.len() {
        return Err(AveragesError::RadiusTooLarge {
            radius,
            len: grid.len(),
        });
    }
    let n = grid.n();
    let cell = grid.cell_volume();
    let half_diag = 0.5 * h * 3.0_f64.sqrt();
    let r2_in = (radius - half_diag).max(0.0);
    let r2_in = r2_in * r2_in;
    let r_out = radius + half_diag;
    let r2_out = r_out * r_out;
    let sub = [-h / 3.0, 0.0, h / 3.0];
    let mut entries = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        let x = grid.coord(i);
        for j in 0..n {
            let y = grid.coord(j);
            for l in 0..n {
                let z = grid.coord(l);
                let d2 = x * x + y * y + z * z;
                let w = if d2 <= r2_in {
                    cell
                } else if d2 >= r2_out {
                    continue;
                } else {
                    let mut count = 0u32;
                    for dx in sub {
                        for dy in sub {
                            for dz in sub {
                                let px = x + dx;
                                let py = y + dy;
                                let pz = z + dz;
                                if px * px + py * py + pz * pz <= radius * radius {
                                    count += 1;
                                }
                            }
                        }
                    }
                    if count == 0 {
                        continue;
                    }
                    cell * count as f64 / 27.0
                };
                entries.push((grid.flat(i, j, l) as u32, w));
                total += w;
            }
        }
    }
    Ok(BallWeights {
        grid: *grid,
        radius,
        entries,
        total,
    })
}

impl BallWeights {
    /// `sum of weights`, the discrete ball volume.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Weights as a dense field (for spectral use).
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.points()];
        for &(idx, w) in &self.entries {
            out[idx as usize] = w;
        }
        out
    }

    /// Forward transform of the dense weights: the lattice counterpart of
    /// the ball-indicator transform, used by the lattice variance oracle.
    pub fn spectrum(&self, plan: &Fft3) -> CField {
        let dense = self.dense();
        let mut out = CField::zeros(self.grid.points());
        plan.forward_real(&dense, &mut out);
        out
    }
}

/// `F_R(t) = sum_x w(x) (u(t,x) - 1)`.
pub fn spatial_average(field: &FieldState, weights: &BallWeights) -> Result<f64, AveragesError> {
    if field.grid != weights.grid {
        return Err(AveragesError::GridMismatch);
    }
    let mut acc = 0.0;
    for &(idx, w) in &weights.entries {
        acc += w * (field.u[idx as usize] - 1.0);
    }
    Ok(acc)
}
