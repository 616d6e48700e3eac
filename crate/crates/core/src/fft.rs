//! Three-dimensional complex FFT on the torus grid.
//!
//! Unnormalized transform pair, matching the analysis/synthesis conventions
//! used throughout the crate:
//!
//! ```text
//! forward:  F[k] = sum_j f[j] exp(-2 pi i j k / N)      (per axis)
//! inverse:  f[j] = sum_k F[k] exp(+2 pi i j k / N)
//! ```
//!
//! so `inverse(forward(f)) = N^3 f`. Fields are stored split re/im, and all
//! three axes are reduced to one kernel: a radix-2 decimation-in-time FFT
//! across `n` rows, whose butterflies are whole-row operations with a
//! constant twiddle. Rows are contiguous, so every inner loop streams:
//!
//! - axis 0 treats the cube as `n` rows of length `n^2`, with the stage
//!   loop cache-blocked along the row;
//! - axis 1 treats each i-slab as `n` rows of length `n`;
//! - axis 2 transposes each slab in place, reuses the axis-1 kernel, and
//!   transposes back.
//!
//! Hand-rolled rather than pulled in as a dependency: the core must stay
//! `no_std`, and a fixed in-crate kernel keeps transform results bit-stable
//! across hosts, which the reproducibility contract relies on.

use crate::math::{FloatExt, TWO_PI};
use alloc::vec;
use alloc::vec::Vec;

/// Complex field over the grid, split storage.
#[derive(Debug, Clone)]
pub struct CField {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CField {
    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn fill_zero(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
    }
}

/// Cache block width (in f64 lanes) for the long-row stages of axis 0.
const BLOCK: usize = 256;

/// FFT plan for an `n x n x n` cube, `n` a power of two.
#[derive(Debug, Clone)]
pub struct Fft3 {
    n: usize,
    tw_re: Vec<f64>,
    tw_im: Vec<f64>,
    bitrev: Vec<u32>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        assert!(
            n.is_power_of_two() && n >= 2,
            "fft size must be a power of two"
        );
        let mut tw_re = Vec::with_capacity(n / 2);
        let mut tw_im = Vec::with_capacity(n / 2);
        for k in 0..n / 2 {
            let ang = -TWO_PI * k as f64 / n as f64;
            tw_re.push(ang.cos());
            tw_im.push(ang.sin());
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
        Self {
            n,
            tw_re,
            tw_im,
            bitrev,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place transform of a length-`n^3` field; `inverse` flips the
    /// twiddle sign (no normalization either way).
    pub fn transform(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(re.len(), n * n * n);
        debug_assert_eq!(im.len(), n * n * n);
        let sign = if inverse { -1.0 } else { 1.0 };
        let slab = n * n;
        // Axis 2 and axis 1, one in-cache slab at a time.
        for s in 0..n {
            let re_s = &mut re[s * slab..(s + 1) * slab];
            let im_s = &mut im[s * slab..(s + 1) * slab];
            transpose_square(re_s, n);
            transpose_square(im_s, n);
            self.rows(re_s, im_s, n, sign);
            transpose_square(re_s, n);
            transpose_square(im_s, n);
            self.rows(re_s, im_s, n, sign);
        }
        // Axis 0: n rows of length n^2.
        self.rows(re, im, slab, sign);
    }

    /// Radix-2 DIT across `n` rows of length `rowlen`; butterflies apply
    /// elementwise over whole rows with one twiddle per row pair. Long rows
    /// are processed in cache blocks so every stage reads warm data.
    fn rows(&self, re: &mut [f64], im: &mut [f64], rowlen: usize, sign: f64) {
        let n = self.n;
        debug_assert_eq!(re.len(), n * rowlen);
        for i in 0..n {
            let r = self.bitrev[i] as usize;
            if r > i {
                swap_rows(re, i, r, rowlen);
                swap_rows(im, i, r, rowlen);
            }
        }
        let mut col = 0;
        while col < rowlen {
            let width = BLOCK.min(rowlen - col);
            let mut len = 2;
            while len <= n {
                let half = len / 2;
                let step = n / len;
                let mut base = 0;
                while base < n {
                    for t in 0..half {
                        let wr = self.tw_re[t * step];
                        let wi = sign * self.tw_im[t * step];
                        let a = base + t;
                        let b = a + half;
                        // Split at row b so rows a and b borrow disjointly.
                        let (re_lo, re_hi) = re.split_at_mut(b * rowlen);
                        let (im_lo, im_hi) = im.split_at_mut(b * rowlen);
                        let off_a = a * rowlen + col;
                        let ar = &mut re_lo[off_a..off_a + width];
                        let ai = &mut im_lo[off_a..off_a + width];
                        let br = &mut re_hi[col..col + width];
                        let bi = &mut im_hi[col..col + width];
                        butterfly_row(ar, ai, br, bi, wr, wi);
                    }
                    base += len;
                }
                len *= 2;
            }
            col += width;
        }
    }

    /// Forward transform of a real field.
    pub fn forward_real(&self, src: &[f64], out: &mut CField) {
        out.re.copy_from_slice(src);
        out.im.fill(0.0);
        self.transform(&mut out.re, &mut out.im, false);
    }

    /// Synthesize two real fields from two Hermitian spectra with one
    /// complex transform: `inverse(a + i b)` separates as `re -> a`,
    /// `im -> b`.
    pub fn inverse_two_real(
        &self,
        spec_a: &CField,
        spec_b: &CField,
        out_a: &mut [f64],
        out_b: &mut [f64],
        scratch: &mut CField,
    ) {
        let len = spec_a.len();
        for m in 0..len {
            scratch.re[m] = spec_a.re[m] - spec_b.im[m];
            scratch.im[m] = spec_a.im[m] + spec_b.re[m];
        }
        self.transform(&mut scratch.re, &mut scratch.im, true);
        out_a.copy_from_slice(&scratch.re);
        out_b.copy_from_slice(&scratch.im);
    }

    /// Synthesize one real field from one Hermitian spectrum.
    pub fn inverse_real(&self, spec: &CField, out: &mut [f64], scratch: &mut CField) {
        scratch.re.copy_from_slice(&spec.re);
        scratch.im.copy_from_slice(&spec.im);
        self.transform(&mut scratch.re, &mut scratch.im, true);
        out.copy_from_slice(&scratch.re);
    }

    /// Forward transforms of two real fields with one complex transform,
    /// separated through the Hermitian split using the conjugate-index
    /// table of the grid.
    pub fn forward_two_real(
        &self,
        a: &[f64],
        b: &[f64],
        conj: &[u32],
        out_a: &mut CField,
        out_b: &mut CField,
        scratch: &mut CField,
    ) {
        scratch.re.copy_from_slice(a);
        scratch.im.copy_from_slice(b);
        self.transform(&mut scratch.re, &mut scratch.im, false);
        for m in 0..a.len() {
            let p = conj[m] as usize;
            let (zr, zi) = (scratch.re[m], scratch.im[m]);
            let (qr, qi) = (scratch.re[p], scratch.im[p]);
            out_a.re[m] = 0.5 * (zr + qr);
            out_a.im[m] = 0.5 * (zi - qi);
            out_b.re[m] = 0.5 * (zi + qi);
            out_b.im[m] = 0.5 * (qr - zr);
        }
    }
}

#[inline]
fn butterfly_row(ar: &mut [f64], ai: &mut [f64], br: &mut [f64], bi: &mut [f64], wr: f64, wi: f64) {
    let w = ar.len();
    for m in 0..w {
        let tr = wr * br[m] - wi * bi[m];
        let ti = wr * bi[m] + wi * br[m];
        br[m] = ar[m] - tr;
        bi[m] = ai[m] - ti;
        ar[m] += tr;
        ai[m] += ti;
    }
}

fn swap_rows(data: &mut [f64], i: usize, j: usize, rowlen: usize) {
    let (lo, hi) = data.split_at_mut(j * rowlen);
    lo[i * rowlen..i * rowlen + rowlen].swap_with_slice(&mut hi[..rowlen]);
}

/// In-place transpose of an `n x n` row-major matrix.
fn transpose_square(data: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn naive_dft3(n: usize, re: &[f64], im: &[f64], inverse: bool) -> (Vec<f64>, Vec<f64>) {
        let sgn = if inverse { 1.0 } else { -1.0 };
        let mut out_re = vec![0.0; n * n * n];
        let mut out_im = vec![0.0; n * n * n];
        for ki in 0..n {
            for kj in 0..n {
                for kl in 0..n {
                    let (mut sr, mut si) = (0.0, 0.0);
                    for ji in 0..n {
                        for jj in 0..n {
                            for jl in 0..n {
                                let phase = sgn * TWO_PI * ((ki * ji + kj * jj + kl * jl) as f64)
                                    / n as f64;
                                let (c, s) = (phase.cos(), phase.sin());
                                let idx = (ji * n + jj) * n + jl;
                                sr += re[idx] * c - im[idx] * s;
                                si += re[idx] * s + im[idx] * c;
                            }
                        }
                    }
                    out_re[(ki * n + kj) * n + kl] = sr;
                    out_im[(ki * n + kj) * n + kl] = si;
                }
            }
        }
        (out_re, out_im)
    }

    #[test]
    fn matches_naive_dft() {
        let n = 8;
        let mut rng = CounterRng::new(1);
        let mut re: Vec<f64> = (0..n * n * n).map(|_| rng.normal()).collect();
        let mut im: Vec<f64> = (0..n * n * n).map(|_| rng.normal()).collect();
        let (want_re, want_im) = naive_dft3(n, &re, &im, false);
        let plan = Fft3::new(n);
        plan.transform(&mut re, &mut im, false);
        for m in 0..n * n * n {
            assert!((re[m] - want_re[m]).abs() < 1e-9, "re mismatch at {m}");
            assert!((im[m] - want_im[m]).abs() < 1e-9, "im mismatch at {m}");
        }
    }

    #[test]
    fn roundtrip_scales_by_volume() {
        let n = 16;
        let mut rng = CounterRng::new(2);
        let orig: Vec<f64> = (0..n * n * n).map(|_| rng.normal()).collect();
        let mut re = orig.clone();
        let mut im = vec![0.0; n * n * n];
        let plan = Fft3::new(n);
        plan.transform(&mut re, &mut im, false);
        plan.transform(&mut re, &mut im, true);
        let vol = (n * n * n) as f64;
        for m in 0..n * n * n {
            assert!((re[m] / vol - orig[m]).abs() < 1e-12);
            assert!((im[m] / vol).abs() < 1e-9);
        }
    }

    #[test]
    fn block_boundary_sizes_roundtrip() {
        // Row lengths around the cache block width exercise the blocked
        // stage loop (n^2 = 64, 1024, 4096 vs BLOCK = 256).
        for n in [8usize, 32, 64] {
            let mut rng = CounterRng::new(4 + n as u64);
            let orig: Vec<f64> = (0..n * n * n).map(|_| rng.normal()).collect();
            let mut re = orig.clone();
            let mut im = vec![0.0; n * n * n];
            let plan = Fft3::new(n);
            plan.transform(&mut re, &mut im, false);
            plan.transform(&mut re, &mut im, true);
            let vol = (n * n * n) as f64;
            for m in 0..n * n * n {
                assert!((re[m] / vol - orig[m]).abs() < 1e-11, "n = {n}");
            }
        }
    }

    #[test]
    fn packed_pair_transforms_match_single() {
        let n = 8;
        let grid = crate::grid::TorusGrid::new(n, 1.0).unwrap();
        let conj = grid.conj_index_table();
        let mut rng = CounterRng::new(3);
        let a: Vec<f64> = (0..n * n * n).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..n * n * n).map(|_| rng.normal()).collect();
        let plan = Fft3::new(n);
        let mut sa = CField::zeros(n * n * n);
        let mut sb = CField::zeros(n * n * n);
        let mut scratch = CField::zeros(n * n * n);
        plan.forward_two_real(&a, &b, &conj, &mut sa, &mut sb, &mut scratch);
        let mut ra = CField::zeros(n * n * n);
        let mut rb = CField::zeros(n * n * n);
        plan.forward_real(&a, &mut ra);
        plan.forward_real(&b, &mut rb);
        for m in 0..n * n * n {
            assert!((sa.re[m] - ra.re[m]).abs() < 1e-10);
            assert!((sa.im[m] - ra.im[m]).abs() < 1e-10);
            assert!((sb.re[m] - rb.re[m]).abs() < 1e-10);
            assert!((sb.im[m] - rb.im[m]).abs() < 1e-10);
        }
        // And back: one packed inverse returns both real fields.
        let mut out_a = vec![0.0; n * n * n];
        let mut out_b = vec![0.0; n * n * n];
        plan.inverse_two_real(&sa, &sb, &mut out_a, &mut out_b, &mut scratch);
        let vol = (n * n * n) as f64;
        for m in 0..n * n * n {
            assert!((out_a[m] / vol - a[m]).abs() < 1e-11);
            assert!((out_b[m] / vol - b[m]).abs() < 1e-11);
        }
    }
}
