//! One-dimensional quadrature helpers.
//!
//! Everything the crate integrates is radial: spectral measures, bump
//! transforms, ball-distance densities, oscillatory variance integrands.
//! Three primitives cover those shapes:
//!
//! - [`adaptive_simpson`] for smooth integrands on a finite interval,
//! - [`integrate_singular_origin`] for integrable power singularities at 0,
//!   handled by geometric panels toward the origin,
//! - [`integrate_doubling_cutoff`] for improper integrals over `[a, inf)`,
//!   extended by doubling panels until the tail stops mattering.

use alloc::vec::Vec;

/// Adaptive Simpson quadrature with Richardson acceptance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson_rule(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    recurse(f, a, fa, m, fm, b, fb, whole, rel_tol * scale, 24)
}

#[inline]
fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // The tolerance is deliberately not halved per level: halving drives it
    // below the f64 rounding floor of the panel sums, where the acceptance
    // test can never pass and the recursion tree explodes. A noise-floor
    // guard accepts once the correction is pure roundoff.
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 4e-15 * (left.abs() + right.abs())
    {
        left + right + delta / 15.0
    } else {
        recurse(f, a, fa, lm, flm, m, fm, left, tol, depth - 1)
            + recurse(f, m, fm, rm, frm, b, fb, right, tol, depth - 1)
    }
}

/// Composite Simpson with a fixed (even) number of panels; used for
/// oscillatory integrands where the caller knows the needed resolution.
pub fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1) * 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Integral over `(0, b]` of an integrand with an integrable singularity at
/// the origin: geometric panels `[b 2^-(k+1), b 2^-k]`, each integrated
/// adaptively, summed until the panel contribution is negligible.
pub fn integrate_singular_origin<F: Fn(f64) -> f64>(f: &F, b: f64, rel_tol: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..200 {
        let lo = 0.5 * hi;
        let piece = adaptive_simpson(f, lo, hi, rel_tol);
        total += piece;
        if piece.abs() < 0.25 * rel_tol * total.abs() && total != 0.0 {
            break;
        }
        hi = lo;
    }
    total
}

/// Improper integral over `[a, inf)` by cutoff doubling. Returns the value,
/// a convergence flag (last two doublings each moved the total by less than
/// `conv_tol` relative), and the `(cutoff, partial value)` history.
pub fn integrate_doubling_cutoff<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    rel_tol: f64,
    conv_tol: f64,
    max_doublings: u32,
) -> (f64, bool, Vec<(f64, f64)>) {
    let mut history = Vec::new();
    let mut total = adaptive_simpson(f, a, 2.0 * a, rel_tol);
    let mut cutoff = 2.0 * a;
    history.push((cutoff, total));
    let mut small_steps = 0u32;
    for _ in 0..max_doublings {
        let next = 2.0 * cutoff;
        let piece = adaptive_simpson(f, cutoff, next, rel_tol);
        total += piece;
        cutoff = next;
        history.push((cutoff, total));
        let denom = total.abs().max(1e-300);
        if piece.abs() < conv_tol * denom {
            small_steps += 1;
            if small_steps >= 2 {
                return (total, true, history);
            }
        } else {
            small_steps = 0;
        }
    }
    (total, false, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{FloatExt, PI};

    #[test]
    fn simpson_exact_on_cubics() {
        let f = |x: f64| 3.0 * x * x * x - x + 2.0;
        let got = adaptive_simpson(&f, -1.0, 2.0, 1e-12);
        let want = 3.0 / 4.0 * (16.0 - 1.0) - 0.5 * (4.0 - 1.0) + 2.0 * 3.0;
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let f = |x: f64| (10.0 * x).sin();
        let got = adaptive_simpson(&f, 0.0, PI, 1e-10);
        let want = (1.0 - (10.0 * PI).cos()) / 10.0;
        assert!((got - want).abs() < 1e-8);
    }

    #[test]
    fn singular_origin_power_law() {
        // integral of r^(-1/2) over (0,1] = 2.
        let f = |r: f64| 1.0 / r.sqrt();
        let got = integrate_singular_origin(&f, 1.0, 1e-10);
        assert!((got - 2.0).abs() < 1e-7);
    }

    #[test]
    fn doubling_cutoff_converges_on_decaying_tail() {
        let f = |r: f64| (-r).exp();
        let (v, converged, hist) = integrate_doubling_cutoff(&f, 1.0, 1e-10, 0.01, 40);
        assert!(converged);
        assert!((v - (-1.0_f64).exp()).abs() < 1e-6);
        assert!(hist.len() >= 2);
    }

    #[test]
    fn doubling_cutoff_flags_divergence() {
        let f = |r: f64| 1.0 / r;
        let (_, converged, _) = integrate_doubling_cutoff(&f, 1.0, 1e-8, 0.01, 30);
        assert!(!converged);
    }
}
