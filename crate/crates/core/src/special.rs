//! Upper incomplete gamma function `Gamma(a, x) = int_x^inf y^{a-1} e^{-y} dy`
//! for real `a` in `[-10, 10]` and `x > 0`, and the closed form of the
//! singular time integral it governs.
//!
//! Evaluation strategy:
//! * `x >= a + 1` (any `a`, and every `x > 1.5` when `a <= 0`): Legendre
//!   continued fraction, modified Lentz.
//! * `0 < a`, `x < a + 1`: `Gamma(a) - gamma(a, x)` with the lower function
//!   from its power series.
//! * `a <= 0`, `x <= 1.5`: downward recurrence
//!   `Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a` from a starting
//!   parameter in `(0, 1)`, or from `Gamma(0, x) = E_1(x)` when `a` is an
//!   integer. For small `x` the subtraction adds magnitudes of the same sign
//!   and is benign; for large `x` it cancels, hence the switch to the
//!   continued fraction there.

use crate::math::{abs, exp, ln, pow, sqrt, tgamma, EULER_GAMMA};
use crate::{Error, Result};

pub const MIN_PARAMETER: f64 = -10.0;
pub const MAX_PARAMETER: f64 = 10.0;

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;
/// Above this `x`, non-positive parameters go straight to the continued fraction.
const RECURRENCE_LIMIT: f64 = 1.5;

pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            what: "x",
            requirement: "finite and > 0",
            value: x,
        });
    }
    if !(MIN_PARAMETER..=MAX_PARAMETER).contains(&a) {
        return Err(Error::UnsupportedParameter { a });
    }
    Ok(if a > 0.0 {
        positive_parameter(a, x)
    } else if x > RECURRENCE_LIMIT {
        continued_fraction(a, x)
    } else {
        downward_recurrence(a, x)
    })
}

fn positive_parameter(a: f64, x: f64) -> f64 {
    if x >= a + 1.0 {
        continued_fraction(a, x)
    } else {
        tgamma(a) - lower_series(a, x)
    }
}

fn downward_recurrence(a: f64, x: f64) -> f64 {
    let steps = libm::ceil(-a) as usize;
    let start = a + steps as f64;
    let (mut value, mut param) = if start == 0.0 {
        (exponential_integral_e1(x), 0.0)
    } else {
        (positive_parameter(start, x), start)
    };
    let log_x = ln(x);
    while param > a {
        param -= 1.0;
        value = (value - exp(param * log_x - x)) / param;
    }
    value
}

/// Modified Lentz evaluation of
/// `Gamma(a, x) = e^{-x} x^a / (x + 1 - a - 1 (1 - a) / (x + 3 - a - 2 (2 - a) / ...))`.
fn continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        let an = -fi * (fi - a);
        b += 2.0;
        d = an * d + b;
        if abs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if abs(delta - 1.0) < EPS {
            break;
        }
    }
    exp(a * ln(x) - x) * h
}

/// Lower incomplete gamma `gamma(a, x)` by its power series, `a > 0`.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if abs(term) < abs(sum) * EPS {
            break;
        }
    }
    sum * exp(a * ln(x) - x)
}

/// Exponential integral `E_1(x) = Gamma(0, x)`, `x > 0`.
pub fn exponential_integral_e1(x: f64) -> f64 {
    if x > 1.0 {
        return continued_fraction(0.0, x);
    }
    // E_1(x) = -gamma - ln x - sum_{n>=1} (-x)^n / (n n!)
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..MAX_ITER {
        let nf = n as f64;
        term *= -x / nf;
        let contribution = term / nf;
        sum += contribution;
        if abs(contribution) < EPS * abs(sum) {
            break;
        }
    }
    -EULER_GAMMA - ln(x) - sum
}

/// `int_0^T t^{-d/2} exp(-r^2 / 2t) dt = 2^{d/2-1} r^{2-d} Gamma(d/2 - 1, r^2 / 2T)`.
///
/// Finite for every `d` once `r > 0`. At `r = 0` the identity is void; see
/// [`crate::diagnostics`] for the behaviour there.
pub fn singular_mass_closed(dimension: usize, r: f64, horizon: f64) -> Result<f64> {
    if dimension == 0 {
        return Err(Error::InvalidParams("dimension must be at least 1".into()));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain {
            what: "|x|",
            requirement: "finite and > 0",
            value: r,
        });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain {
            what: "T",
            requirement: "finite and > 0",
            value: horizon,
        });
    }
    let half_d = 0.5 * dimension as f64;
    let gamma = upper_incomplete_gamma(half_d - 1.0, r * r / (2.0 * horizon))?;
    Ok(pow(2.0, half_d - 1.0) * pow(r, 2.0 - dimension as f64) * gamma)
}

/// `sqrt(pi) erfc(sqrt(x)) = Gamma(1/2, x)`; used by tests.
#[doc(hidden)]
pub fn half_gamma_via_erfc(x: f64) -> f64 {
    sqrt(core::f64::consts::PI) * libm::erfc(sqrt(x))
}
