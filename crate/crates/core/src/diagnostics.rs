//! Blow-up analysis of the first-chaos time mass at the origin,
//! `m(delta) = int_delta^T t^{-d/2} dt`, as the cutoff `delta -> 0`.
//!
//! The masses are exact; what is tested is the rate fit. Two models compete
//! on the tail of the cutoff grid, `a + b ln(1/delta)` and `a + b delta^p`,
//! and the one with the smaller residual wins.

use alloc::vec::Vec;

use crate::math::{abs, ln, pow};
use crate::{Error, Result};

/// Share of the grid (smallest cutoffs) used by the fit.
pub const TAIL_FRACTION: f64 = 0.6;
pub const MIN_CUTOFFS: usize = 4;
const EXPONENT_RANGE: (f64, f64) = (-5.0, 3.0);
/// Exponents this close to zero are indistinguishable from a logarithm.
const EXCLUDED_EXPONENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Verdict {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum ModelKind {
    /// `a + b ln(1/delta)`.
    Logarithmic,
    /// `a + b delta^p`.
    Power,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FittedModel {
    pub kind: ModelKind,
    pub intercept: f64,
    pub coefficient: f64,
    /// `p` for the power model; `None` for the logarithm.
    pub exponent: Option<f64>,
    /// Root-mean-square residual on the tail.
    pub residual: f64,
    /// Residual of the losing model, for comparison.
    pub rival_residual: f64,
}

impl FittedModel {
    /// `lim_{delta -> 0} m(delta)` when finite.
    pub fn limit(&self) -> Option<f64> {
        match (self.kind, self.exponent) {
            (ModelKind::Power, Some(p)) if p > 0.0 => Some(self.intercept),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DivergenceReport {
    pub dimension: usize,
    pub horizon: f64,
    pub cutoffs: Vec<f64>,
    pub masses: Vec<f64>,
    pub model: FittedModel,
    pub verdict: Verdict,
    pub limit: Option<f64>,
}

impl DivergenceReport {
    /// `(delta, mass)` pairs in grid order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cutoffs.iter().copied().zip(self.masses.iter().copied())
    }
}

/// `T 10^{-k/2}` for `k = 4, ..., 16`.
pub fn default_cutoffs(horizon: f64) -> Vec<f64> {
    (4..=16).map(|k| horizon * pow(10.0, -0.5 * k as f64)).collect()
}

/// `int_delta^T t^{-d/2} dt`.
pub fn truncated_mass(dimension: usize, horizon: f64, delta: f64) -> f64 {
    if dimension == 2 {
        ln(horizon / delta)
    } else {
        let e = 1.0 - 0.5 * dimension as f64;
        (pow(horizon, e) - pow(delta, e)) / e
    }
}

pub fn divergence_scan(dimension: usize, horizon: f64, cutoffs: &[f64]) -> Result<DivergenceReport> {
    if dimension == 0 {
        return Err(Error::InvalidParams("dimension must be at least 1".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain {
            what: "T",
            requirement: "finite and > 0",
            value: horizon,
        });
    }
    validate_grid(horizon, cutoffs)?;

    let masses: Vec<f64> = cutoffs
        .iter()
        .map(|&delta| truncated_mass(dimension, horizon, delta))
        .collect();
    if masses.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::MalformedGrid(
            "cutoffs too close together for the masses to separate".into(),
        ));
    }

    let tail_len = (libm::ceil(TAIL_FRACTION * cutoffs.len() as f64) as usize).max(3);
    let start = cutoffs.len() - tail_len;
    let xs = &cutoffs[start..];
    let ys = &masses[start..];

    let log = fit_logarithmic(xs, ys);
    let power = fit_power(xs, ys);
    let model = if power.residual < log.residual {
        FittedModel {
            rival_residual: log.residual,
            ..power
        }
    } else {
        FittedModel {
            rival_residual: power.residual,
            ..log
        }
    };
    let limit = model.limit();
    let verdict = if limit.is_some() {
        Verdict::Convergent
    } else {
        Verdict::Divergent
    };
    Ok(DivergenceReport {
        dimension,
        horizon,
        cutoffs: cutoffs.to_vec(),
        masses,
        model,
        verdict,
        limit,
    })
}

fn validate_grid(horizon: f64, cutoffs: &[f64]) -> Result<()> {
    if cutoffs.len() < MIN_CUTOFFS {
        return Err(Error::MalformedGrid(alloc::format!(
            "need at least {MIN_CUTOFFS} cutoffs, got {}",
            cutoffs.len()
        )));
    }
    if cutoffs.iter().any(|&c| !(c > 0.0 && c < horizon)) {
        return Err(Error::MalformedGrid("cutoffs must lie in (0, T)".into()));
    }
    if cutoffs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::MalformedGrid("cutoffs must be strictly decreasing".into()));
    }
    Ok(())
}

/// Ordinary least squares of `y` on `(1, u)`: intercept, slope and RMS residual.
fn linear_fit(us: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = us.len() as f64;
    let mu = us.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut suu = 0.0;
    let mut suy = 0.0;
    for (u, y) in us.iter().zip(ys) {
        suu += (u - mu) * (u - mu);
        suy += (u - mu) * (y - my);
    }
    let slope = if suu > 0.0 { suy / suu } else { 0.0 };
    let intercept = my - slope * mu;
    let rss: f64 = us
        .iter()
        .zip(ys)
        .map(|(u, y)| {
            let r = y - intercept - slope * u;
            r * r
        })
        .sum();
    (intercept, slope, libm::sqrt(rss / n))
}

fn fit_logarithmic(deltas: &[f64], ys: &[f64]) -> FittedModel {
    let us: Vec<f64> = deltas.iter().map(|d| -ln(*d)).collect();
    let (intercept, coefficient, residual) = linear_fit(&us, ys);
    FittedModel {
        kind: ModelKind::Logarithmic,
        intercept,
        coefficient,
        exponent: None,
        residual,
        rival_residual: f64::NAN,
    }
}

fn fit_power(deltas: &[f64], ys: &[f64]) -> FittedModel {
    let residual_at = |p: f64| {
        let us: Vec<f64> = deltas.iter().map(|d| pow(*d, p)).collect();
        linear_fit(&us, ys)
    };
    // Residuals are compared relative to the data scale so that the search is
    // not dominated by the largest masses.
    let scale = ys.iter().map(|y| abs(*y)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let objective = |p: f64| residual_at(p).2 / scale;

    let step = 0.01;
    let count = libm::round((EXPONENT_RANGE.1 - EXPONENT_RANGE.0) / step) as usize;
    let mut best = (f64::INFINITY, EXPONENT_RANGE.0);
    for k in 0..=count {
        let p = EXPONENT_RANGE.0 + step * k as f64;
        if abs(p) < EXCLUDED_EXPONENT {
            continue;
        }
        let r = objective(p);
        if r < best.0 {
            best = (r, p);
        }
    }
    let mut lo = (best.1 - step).max(EXPONENT_RANGE.0);
    let mut hi = (best.1 + step).min(EXPONENT_RANGE.1);
    if best.1 > 0.0 {
        lo = lo.max(EXCLUDED_EXPONENT);
    } else {
        hi = hi.min(-EXCLUDED_EXPONENT);
    }
    let p = golden_section(objective, lo, hi, 1e-13);
    let (intercept, coefficient, residual) = residual_at(p);
    FittedModel {
        kind: ModelKind::Power,
        intercept,
        coefficient,
        exponent: Some(p),
        residual,
        rival_residual: f64::NAN,
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decades() -> Vec<f64> {
        (2..=8).map(|k| pow(10.0, -(k as f64))).collect()
    }

    #[test]
    fn one_dimension_converges_to_two_sqrt_t() {
        let r = divergence_scan(1, 1.0, &decades()).unwrap();
        assert_eq!(r.verdict, Verdict::Convergent);
        assert!((r.limit.unwrap() - 2.0).abs() < 1e-9);
        assert!((r.model.exponent.unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn two_dimensions_are_logarithmic() {
        let r = divergence_scan(2, 1.0, &decades()).unwrap();
        assert_eq!(r.verdict, Verdict::Divergent);
        assert_eq!(r.model.kind, ModelKind::Logarithmic);
        assert_relative_eq!(r.model.coefficient, 1.0, max_relative = 1e-10);
        for (delta, m) in r.points() {
            assert_relative_eq!(m, -delta.ln(), max_relative = 1e-14);
        }
    }

    #[test]
    fn higher_dimensions_follow_the_power_law() {
        for d in 3..=6 {
            let r = divergence_scan(d, 1.0, &default_cutoffs(1.0)).unwrap();
            assert_eq!(r.verdict, Verdict::Divergent);
            assert_eq!(r.model.kind, ModelKind::Power);
            assert!((r.model.exponent.unwrap() - (1.0 - 0.5 * d as f64)).abs() < 0.02);
        }
        let r = divergence_scan(3, 1.0, &decades()).unwrap();
        assert_relative_eq!(r.model.coefficient, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn masses_increase_as_the_cutoff_shrinks() {
        for d in 1..=6 {
            let r = divergence_scan(d, 2.0, &default_cutoffs(2.0)).unwrap();
            assert!(r.masses.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn malformed_grids_are_rejected() {
        assert!(matches!(
            divergence_scan(2, 1.0, &[0.1, 0.01, 0.001]),
            Err(Error::MalformedGrid(_))
        ));
        assert!(matches!(
            divergence_scan(2, 1.0, &[0.1, 0.2, 0.01, 0.001]),
            Err(Error::MalformedGrid(_))
        ));
        assert!(matches!(
            divergence_scan(2, 1.0, &[2.0, 0.1, 0.01, 0.001]),
            Err(Error::MalformedGrid(_))
        ));
    }
}
