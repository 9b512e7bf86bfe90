//! Float helpers over `libm` so results do not depend on the platform `std`.

pub(crate) use libm::{erf, exp, fabs as abs, log as ln, pow, sqrt, tgamma};

pub(crate) const PI: f64 = core::f64::consts::PI;
pub(crate) const SQRT_2: f64 = core::f64::consts::SQRT_2;
pub(crate) const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// pi^{-1/4}
pub(crate) const PI_POW_NEG_QUARTER: f64 = 0.751_125_544_464_942_5;

#[inline]
pub(crate) fn square(x: f64) -> f64 {
    x * x
}

/// (2 pi s)^{-d/2}
#[inline]
pub(crate) fn gaussian_normalizer(s: f64, dimension: usize) -> f64 {
    pow(2.0 * PI * s, -0.5 * dimension as f64)
}
