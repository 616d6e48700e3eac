//! Periodic torus discretization.
//!
//! The simulation domain is the torus `[0, L)^3` sampled at `N` points per
//! axis. Mode `k` of the discrete spectrum carries the continuum frequency
//! `k / L` with integer `k` in the centered cube `(-N/2, N/2]^3`, so the
//! angular frequency of the wave propagator at that mode is
//! `omega = 2*pi*|k|/L`.

use crate::math::FloatExt;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid size {0} is not a power of two >= 8")]
    BadSize(usize),
    #[error("torus side length must be positive and finite")]
    BadLength,
}

/// The periodic grid: `n` points per axis on a torus of side `len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
    len: f64,
}

impl TorusGrid {
    pub fn new(n: usize, len: f64) -> Result<Self, GridError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        if len <= 0.0 || !len.is_finite() {
            return Err(GridError::BadLength);
        }
        Ok(Self { n, len })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.len
    }

    /// Cell size `h = L / N`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.len / self.n as f64
    }

    /// Total number of grid points `N^3`.
    #[inline]
    pub fn points(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Cell volume `h^3`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        h * h * h
    }

    /// Centered integer frequency of axis index `i`, in `(-N/2, N/2]`.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Centered physical coordinate of axis index `i`, in `(-L/2, L/2]`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.freq(i) as f64 * self.h()
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.n + l
    }

    /// Continuum frequency vector `k / L` of the flat mode index.
    #[inline]
    pub fn xi(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        let l = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        [
            self.freq(i) as f64 / self.len,
            self.freq(j) as f64 / self.len,
            self.freq(l) as f64 / self.len,
        ]
    }

    /// `|k| / L` of the flat mode index.
    #[inline]
    pub fn xi_norm(&self, flat: usize) -> f64 {
        let x = self.xi(flat);
        x[0].hypot3(x[1], x[2])
    }

    /// Flat index of the Hermitian partner `-k mod N` of each mode.
    pub fn conj_index_table(&self) -> Vec<u32> {
        let n = self.n;
        let neg = |i: usize| if i == 0 { 0 } else { n - i };
        let mut table = Vec::with_capacity(self.points());
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    table.push(self.flat(neg(i), neg(j), neg(l)) as u32);
                }
            }
        }
        table
    }

    /// Midpoint quadrature weight of the mode in the spectral sum, `1/2` per
    /// axis sitting on the Nyquist frequency `N/2`.
    #[inline]
    pub fn nyquist_weight(&self, flat: usize) -> f64 {
        let n = self.n;
        let l = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        let mut w = 1.0;
        for idx in [i, j, l] {
            if idx == n / 2 {
                w *= 0.5;
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(7, 1.0).is_err());
        assert!(TorusGrid::new(12, 1.0).is_err());
        assert!(TorusGrid::new(4, 1.0).is_err());
        assert!(TorusGrid::new(16, 0.0).is_err());
        assert!(TorusGrid::new(16, -2.0).is_err());
        assert!(TorusGrid::new(16, 2.0).is_ok());
    }

    #[test]
    fn frequencies_are_centered() {
        let g = TorusGrid::new(8, 4.0).unwrap();
        let freqs: Vec<i64> = (0..8).map(|i| g.freq(i)).collect();
        assert_eq!(freqs, [0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.coord(0), 0.0);
        assert_eq!(g.coord(4), 2.0);
        assert_eq!(g.coord(7), -0.5);
    }

    #[test]
    fn conj_table_is_involutive() {
        let g = TorusGrid::new(8, 1.0).unwrap();
        let t = g.conj_index_table();
        for (m, &p) in t.iter().enumerate() {
            assert_eq!(t[p as usize] as usize, m);
            let a = g.xi(m);
            let b = g.xi(p as usize);
            // Partner frequency is the negative, except on the Nyquist shell
            // where -N/2 is identified with +N/2.
            for d in 0..3 {
                assert!((a[d] + b[d]).abs() < 1e-12 || (a[d] - b[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nyquist_weight_counts_axes() {
        let g = TorusGrid::new(8, 1.0).unwrap();
        assert_eq!(g.nyquist_weight(g.flat(0, 0, 0)), 1.0);
        assert_eq!(g.nyquist_weight(g.flat(4, 0, 0)), 0.5);
        assert_eq!(g.nyquist_weight(g.flat(4, 4, 0)), 0.25);
        assert_eq!(g.nyquist_weight(g.flat(4, 4, 4)), 0.125);
    }
}
