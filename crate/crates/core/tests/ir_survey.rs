//! Ignored survey: how much of the additive-case variance the finite torus
//! can actually carry, per grid preset. Run with
//! `cargo test -p swe-core --test ir_survey -- --ignored --nocapture`.

use swe_core::averages::ball_weights;
use swe_core::fft::Fft3;
use swe_core::kernels::CorrelationKernel;
use swe_core::noise::spectral_weights;
use swe_core::oracle::{lattice_duhamel_covariance, linear_covariance_above, linear_variance};
use swe_core::stats::scaling_exponent_fit;
use swe_core::TorusGrid;

fn survey(kernel: &CorrelationKernel, n: usize, len: f64, radii: &[f64], t: f64) {
    let grid = TorusGrid::new(n, len).unwrap();
    let plan = Fft3::new(n);
    let lambda = spectral_weights(&grid, kernel).unwrap();
    let dt = 1.0 / 64.0;
    let steps = (t / dt).round() as usize;
    let mut lattice_pts = Vec::new();
    let mut full_pts = Vec::new();
    println!("kernel {} N={n} L={len} t={t}:", kernel.description());
    for &r in radii {
        let w = ball_weights(&grid, r).unwrap();
        let spec = w.spectrum(&plan);
        let lattice = lattice_duhamel_covariance(&grid, &lambda, &spec, dt, steps, steps, 1.0);
        let full = linear_variance(r, t, kernel, 1.0).unwrap();
        let trunc = linear_covariance_above(r, t, t, kernel, 1.0, 0.5 / len).unwrap();
        println!(
            "  R={r}: lattice {lattice:.4}  truncated {trunc:.4}  full {full:.4}  deficit {:.1}%  quantization {:.1}%",
            100.0 * (1.0 - lattice / full),
            100.0 * (1.0 - lattice / trunc),
        );
        lattice_pts.push((r, lattice));
        full_pts.push((r, full));
    }
    if radii.len() >= 3 {
        let fl = scaling_exponent_fit(&lattice_pts).unwrap();
        let ff = scaling_exponent_fit(&full_pts).unwrap();
        println!(
            "  slopes: lattice {:.3} (r2 {:.4})  full {:.3}",
            fl.slope, fl.r_squared, ff.slope
        );
    }
}

#[test]
#[ignore]
fn infrared_deficit_survey() {
    let radii = [2.0, 3.0, 4.0, 6.0, 8.0];
    let riesz = CorrelationKernel::riesz(1.0).unwrap();
    survey(&riesz, 32, 32.0, &radii, 1.0);
    survey(&riesz, 32, 36.0, &radii, 1.0);
    survey(&riesz, 32, 40.0, &radii, 1.0);
    let gauss = CorrelationKernel::gaussian(0.4).unwrap();
    survey(&gauss, 32, 24.0, &radii, 1.0);
    survey(&gauss, 32, 40.0, &radii, 1.0);
    survey(&gauss, 32, 40.0, &[8.0], 0.5);
}

#[test]
#[ignore]
fn riesz_covariance_pairs_survey() {
    // Criterion-style comparison in the additive proxy: R^(beta-6) lattice
    // covariance vs the flat-eta limit tau_beta int (t1-r)(t2-r) dr.
    let beta = 1.0;
    let kernel = CorrelationKernel::riesz(beta).unwrap();
    let tau = swe_core::kernels::tau_beta(beta).unwrap();
    for (n, len) in [(32usize, 24.0f64), (64, 40.0), (64, 64.0)] {
        let grid = TorusGrid::new(n, len).unwrap();
        let plan = Fft3::new(n);
        let lambda = spectral_weights(&grid, &kernel).unwrap();
        let dt = 1.0 / 64.0;
        let r = 8.0;
        let w = ball_weights(&grid, r).unwrap();
        let spec = w.spectrum(&plan);
        println!("N={n} L={len} R={r}:");
        for (t1, t2) in [(0.5f64, 0.5f64), (0.5, 1.0), (1.0, 1.0)] {
            let s1 = (t1 / dt).round() as usize;
            let s2 = (t2 / dt).round() as usize;
            let lattice = lattice_duhamel_covariance(&grid, &lambda, &spec, dt, s1, s2, 1.0);
            let m = t1.min(t2);
            let flat = t1 * t2 * m - 0.5 * (t1 + t2) * m * m + m * m * m / 3.0;
            let limit = tau * flat;
            let normalized = lattice * r.powf(beta - 6.0);
            println!(
                "  (t1,t2)=({t1},{t2}): normalized {normalized:.4} vs limit {limit:.4}  ratio {:.3}",
                normalized / limit
            );
        }
    }
}
