//! Ignored by default: rough throughput numbers for the transform and the
//! Gaussian sampler, used when sizing ensemble experiments.
//! Run with `cargo test -p swe-core --test perf_probe -- --ignored --nocapture`.

use std::time::Instant;
use swe_core::fft::{CField, Fft3};
use swe_core::rng::{SeedPolicy, StreamTag};

#[test]
#[ignore]
fn transform_throughput() {
    for n in [32usize, 64] {
        let plan = Fft3::new(n);
        let len = n * n * n;
        let mut f = CField::zeros(len);
        for m in 0..len {
            f.re[m] = (m % 17) as f64 - 8.0;
            f.im[m] = (m % 5) as f64;
        }
        let reps = if n == 32 { 60 } else { 12 };
        let start = Instant::now();
        for i in 0..reps {
            plan.transform(&mut f.re, &mut f.im, i % 2 == 0);
        }
        let per = start.elapsed().as_secs_f64() / reps as f64;
        println!("fft {n}^3: {:.3} ms per transform", per * 1e3);
    }
}

#[test]
#[ignore]
fn gaussian_throughput() {
    let policy = SeedPolicy::new(99);
    let stream = policy.stream(StreamTag::Auxiliary, 0, 0);
    let draws = 2_000_000u32;
    let start = Instant::now();
    let mut acc = 0.0;
    for m in 0..draws {
        let (a, b) = stream.pair(m);
        acc += a + b;
    }
    let per = start.elapsed().as_secs_f64() / draws as f64;
    println!(
        "gaussian pairs: {:.1} ns per pair (acc {acc:.3e})",
        per * 1e9
    );
}
