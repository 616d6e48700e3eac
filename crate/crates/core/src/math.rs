//! Float math routed through `libm`.
//!
//! The crate is `no_std`, so the usual `f64` inherent methods from `std` are
//! unavailable. Beyond that, going through `libm` everywhere makes every
//! transcendental evaluation a pure-Rust computation with one fixed result,
//! which is what lets identical seeds reproduce fields bit for bit on any
//! host.

pub const PI: f64 = core::f64::consts::PI;
pub const TWO_PI: f64 = 2.0 * PI;

/// Extension trait delegating `f64` math to `libm`.
pub trait FloatExt {
    fn sqrt(self) -> f64;
    fn sin(self) -> f64;
    fn cos(self) -> f64;
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn powf(self, e: f64) -> f64;
    fn powi(self, e: i32) -> f64;
    fn abs(self) -> f64;
    fn floor(self) -> f64;
    fn round(self) -> f64;
    fn hypot3(self, b: f64, c: f64) -> f64;
    fn erf(self) -> f64;
    fn erfc(self) -> f64;
}

impl FloatExt for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn powf(self, e: f64) -> f64 {
        libm::pow(self, e)
    }
    #[inline]
    fn powi(self, e: i32) -> f64 {
        let mut acc = 1.0;
        let mut base = if e < 0 { 1.0 / self } else { self };
        let mut n = e.unsigned_abs();
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base *= base;
            n >>= 1;
        }
        acc
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn round(self) -> f64 {
        libm::round(self)
    }
    #[inline]
    fn hypot3(self, b: f64, c: f64) -> f64 {
        libm::sqrt(self * self + b * b + c * c)
    }
    #[inline]
    fn erf(self) -> f64 {
        libm::erf(self)
    }
    #[inline]
    fn erfc(self) -> f64 {
        libm::erfc(self)
    }
}

/// sin(x)/x with its continuous extension at 0.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if FloatExt::abs(x) < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        FloatExt::sin(x) / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_powf() {
        for &(b, e) in &[(2.0_f64, 10), (1.7, 3), (0.5, -4), (3.0, 0)] {
            let via_pow = libm::pow(b, e as f64);
            assert!((FloatExt::powi(b, e) - via_pow).abs() < 1e-12 * via_pow.abs().max(1.0));
        }
    }

    #[test]
    fn sinc_limit() {
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc(1e-9) - 1.0).abs() < 1e-17);
        assert!((sinc(1.0) - FloatExt::sin(1.0)).abs() < 1e-15);
    }
}
