//! Chaos kernels of the current.
//!
//! The `n`-th chaos pairing `<Psi^(n), phi^{(x) n}>` is the `n`-th Taylor
//! coefficient of `U(s) = S Psi(s phi)` at `s = 0`. It is extracted
//! numerically from any [`UFunctional`] and, for the current, also evaluated
//! from the closed-form kernels
//!
//! ```text
//! xi_i^(1)(x)        = (2 pi)^{-d/2} int_0^T t^{-d/2} e^{-|x|^2/2t} delta_t dt          (slot i)
//! (xi_i^(2)(x))_{jk} = w(t) (Id_{ki} x_j eta_t (x) delta_t + Id_{ji} x_k delta_t (x) eta_t)
//! ```
//!
//! For the second kernel two weights are offered, see [`Convention`].

use num_complex::Complex64;

use crate::math::{abs, exp, gaussian_normalizer, square};
use crate::quad::{self, QuadOptions, QuadResult};
use crate::schwartz::TestFunction;
use crate::stransform::{CurrentParams, UFunctional};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// Weight of the second-order kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Convention {
    /// `w(t) = -(1/4) (2 pi)^{-d/2} t^{-d/2-1} e^{-|x|^2/2t}`, as printed in
    /// the chaos expansion of the current.
    Paper,
    /// `w(t) = (1/2) (2 pi)^{-d/2} t^{-d/2-1} e^{-|x|^2/2t}`, the coefficient
    /// obtained by expanding `U(s)` to second order.
    Derivative,
}

impl Convention {
    fn factor(self) -> f64 {
        match self {
            Convention::Paper => -0.25,
            Convention::Derivative => 0.5,
        }
    }
}

/// Tensor shape of one term of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Atom {
    /// `delta_t` in slot `i`.
    Delta,
    /// `x_j eta_t (x) delta_t` with the second slot equal to `i`.
    EtaDelta,
    /// `x_k delta_t (x) eta_t` with the first slot equal to `i`.
    DeltaEta,
}

/// A chaos kernel of `xi_i(x)` written as a `t`-density against atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRankKernel {
    order: usize,
    component: usize,
    params: CurrentParams,
    convention: Convention,
}

impl FiniteRankKernel {
    pub fn new(
        params: CurrentParams,
        component: usize,
        order: usize,
        convention: Convention,
    ) -> Result<Self> {
        if order > 2 {
            return Err(Error::InvalidParams(alloc::format!(
                "kernels are available up to order 2, not {order}"
            )));
        }
        if component >= params.dimension() {
            return Err(Error::IndexOutOfRange {
                index: component,
                dimension: params.dimension(),
            });
        }
        if order > 0 && !params.exists() {
            return Err(Error::Nonexistence {
                dimension: params.dimension(),
            });
        }
        Ok(FiniteRankKernel {
            order,
            component,
            params,
            convention,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn component(&self) -> usize {
        self.component
    }

    pub fn params(&self) -> &CurrentParams {
        &self.params
    }

    pub fn atoms(&self) -> &'static [Atom] {
        match self.order {
            0 => &[],
            1 => &[Atom::Delta],
            _ => &[Atom::EtaDelta, Atom::DeltaEta],
        }
    }

    /// The scalar weight multiplying the atoms at time `t > 0`.
    pub fn density(&self, t: f64) -> f64 {
        let d = self.params.dimension();
        let base = gaussian_normalizer(t, d) * exp(-square(self.params.x_norm()) / (2.0 * t));
        match self.order {
            0 => 0.0,
            1 => base,
            _ => self.convention.factor() * base / t,
        }
    }

    /// `<kernel, phi^{(x) n}>` by quadrature to absolute tolerance `tol`.
    pub fn pair(&self, phi: &TestFunction, tol: f64) -> Result<QuadResult> {
        if phi.dimension() != self.params.dimension() {
            return Err(Error::InvalidParams("test function dimension mismatch".into()));
        }
        let zero = QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            node_count: 0,
        };
        let i = self.component;
        if self.order == 0 || phi.coefficients(i)?.iter().all(|&c| c == 0.0) {
            return Ok(zero);
        }
        let opts = QuadOptions::with_tol(tol);
        let horizon = self.params.horizon();
        if self.order == 1 {
            let f = |t: f64| self.density(t) * phi.eval(t, i).unwrap_or(f64::NAN);
            return quad::integrate_singular(f, horizon, self.params.singularity(0.0), opts);
        }
        // Both atoms pair to (x . c(t)) phi_i(t), hence the factor 2.
        if self.params.at_origin() {
            return Ok(zero);
        }
        let d = self.params.dimension();
        let x = self.params.x();
        let mut values = vec![0.0; d];
        let mut cums = vec![0.0; d];
        let f = |t: f64| {
            phi.sample(t, &mut values, &mut cums);
            let xc: f64 = x.iter().zip(&cums).map(|(a, b)| a * b).sum();
            2.0 * self.density(t) * xc * values[i]
        };
        quad::integrate_singular(f, horizon, self.params.singularity(1.0), opts)
    }
}

/// `<xi_i^(1)(x), phi>`.
pub fn first_chaos_pairing_closed(
    p: &CurrentParams,
    phi: &TestFunction,
    i: usize,
    tol: f64,
) -> Result<QuadResult> {
    FiniteRankKernel::new(p.clone(), i, 1, Convention::Derivative)?.pair(phi, tol)
}

/// `<xi_i^(2)(x), phi (x) phi>` under the chosen weight convention.
pub fn second_chaos_pairing_closed(
    p: &CurrentParams,
    phi: &TestFunction,
    i: usize,
    convention: Convention,
    tol: f64,
) -> Result<QuadResult> {
    FiniteRankKernel::new(p.clone(), i, 2, convention)?.pair(phi, tol)
}

/// A Taylor coefficient of `U(s)` with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChaosPairing {
    pub order: usize,
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeOptions {
    /// Largest step, in units of `1 / ||phi||`.
    pub initial_step: f64,
    /// Accepted disagreement, relative to `max(1, |value|)`.
    pub tolerance: f64,
    /// Imaginary step for order one, in units of `1 / ||phi||`.
    pub complex_step: f64,
    pub max_levels: usize,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        DerivativeOptions {
            initial_step: 0.4,
            tolerance: 1e-7,
            complex_step: 1e-20,
            max_levels: 8,
        }
    }
}

/// `(1/n!) d^n/ds^n F(s phi)` at `s = 0`, assuming `F(s phi)` is real for
/// real `s`.
///
/// Order one uses a complex step, higher orders Richardson-extrapolated
/// central differences.
pub fn extract_chaos_pairing(f: &UFunctional<'_>, phi: &TestFunction, n: usize) -> Result<ChaosPairing> {
    extract_chaos_pairing_with(f, phi, n, &DerivativeOptions::default())
}

pub fn extract_chaos_pairing_with(
    f: &UFunctional<'_>,
    phi: &TestFunction,
    n: usize,
    opts: &DerivativeOptions,
) -> Result<ChaosPairing> {
    let scale = phi.combined_norm();
    if n == 0 || scale == 0.0 {
        let value = if n == 0 {
            f.eval(Complex64::new(0.0, 0.0), phi)?.re
        } else {
            0.0
        };
        return Ok(ChaosPairing {
            order: n,
            value,
            error_estimate: 0.0,
            evaluations: usize::from(n == 0),
        });
    }
    if n == 1 {
        complex_step(f, phi, opts.complex_step / scale, opts.tolerance)
    } else {
        two_scale_richardson(f, phi, n, opts.initial_step / scale, opts)
    }
}

fn complex_step(f: &UFunctional<'_>, phi: &TestFunction, h: f64, tolerance: f64) -> Result<ChaosPairing> {
    let d1 = f.eval(Complex64::new(0.0, h), phi)?.im / h;
    let d2 = f.eval(Complex64::new(0.0, 0.5 * h), phi)?.im / (0.5 * h);
    let disagreement = abs(d1 - d2);
    if !(disagreement <= tolerance * d1.abs().max(1.0)) {
        return Err(Error::UnstableDerivative {
            order: 1,
            estimate: d1,
            disagreement,
        });
    }
    Ok(ChaosPairing {
        order: 1,
        value: d1,
        error_estimate: disagreement,
        evaluations: 2,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `delta_h^n U(0) / (n! h^n)` with the symmetric stencil at `(n/2 - k) h`.
fn central_difference(
    f: &UFunctional<'_>,
    phi: &TestFunction,
    n: usize,
    h: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for k in 0..=n {
        let s = (0.5 * n as f64 - k as f64) * h;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binomial(n, k) * f.eval(Complex64::new(s, 0.0), phi)?.re;
    }
    let factorial: f64 = (1..=n).map(|j| j as f64).product();
    Ok(sum / (factorial * libm::pow(h, n as f64)))
}

/// Two extrapolations from different initial steps; their spread is part of
/// the error estimate, which catches noise that a single tableau can hide.
fn two_scale_richardson(
    f: &UFunctional<'_>,
    phi: &TestFunction,
    n: usize,
    h0: f64,
    opts: &DerivativeOptions,
) -> Result<ChaosPairing> {
    let a = richardson(f, phi, n, h0, opts)?;
    let b = richardson(f, phi, n, 0.75 * h0, opts)?;
    let disagreement = a.error_estimate.max(b.error_estimate).max(abs(a.value - b.value));
    if !(disagreement <= opts.tolerance * a.value.abs().max(1.0)) {
        return Err(Error::UnstableDerivative {
            order: n,
            estimate: a.value,
            disagreement,
        });
    }
    Ok(ChaosPairing {
        order: n,
        value: a.value,
        error_estimate: disagreement,
        evaluations: a.evaluations + b.evaluations,
    })
}

/// Ridders' extrapolation of the central difference in `h^2`.
fn richardson(
    f: &UFunctional<'_>,
    phi: &TestFunction,
    n: usize,
    h0: f64,
    opts: &DerivativeOptions,
) -> Result<ChaosPairing> {
    let levels = opts.max_levels.max(2);
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    let mut best = (f64::INFINITY, f64::NAN);
    let mut evaluations = 0;
    for j in 0..levels {
        let h = h0 / libm::pow(2.0, j as f64);
        let mut row = Vec::with_capacity(j + 1);
        row.push(central_difference(f, phi, n, h)?);
        evaluations += n + 1;
        let mut factor = 1.0;
        for m in 1..=j {
            factor *= 4.0;
            let value = (factor * row[m - 1] - table[j - 1][m - 1]) / (factor - 1.0);
            let err = abs(value - row[m - 1]).max(abs(value - table[j - 1][m - 1]));
            if err <= best.0 {
                best = (err, value);
            }
            row.push(value);
        }
        let stalled = j > 1 && abs(row[j] - table[j - 1][j - 1]) >= 2.0 * best.0;
        table.push(row);
        if stalled {
            break;
        }
    }
    let (err, value) = best;
    if !(err <= opts.tolerance * value.abs().max(1.0)) {
        return Err(Error::UnstableDerivative {
            order: n,
            estimate: value,
            disagreement: err,
        });
    }
    Ok(ChaosPairing {
        order: n,
        value,
        error_estimate: err,
        evaluations,
    })
}

/// Central-difference counterpart of the complex step at order one, used to
/// cross-validate the two.
pub fn first_order_central(f: &UFunctional<'_>, phi: &TestFunction) -> Result<ChaosPairing> {
    let opts = DerivativeOptions::default();
    two_scale_richardson(f, phi, 1, opts.initial_step / phi.combined_norm(), &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{ln, sqrt, PI};
    use approx::assert_relative_eq;

    fn phi1() -> TestFunction {
        TestFunction::new(vec![vec![0.7, -0.2, 0.1]]).unwrap()
    }

    #[test]
    fn polynomial_coefficients_are_recovered() {
        let f = UFunctional::new("polynomial", |z: Complex64, _: &TestFunction| {
            Ok(1.0 + 2.0 * z - 3.0 * z * z + 0.5 * z * z * z)
        });
        let phi = TestFunction::single(1, 0, 0, 1.0).unwrap();
        let expected = [1.0, 2.0, -3.0, 0.5];
        for (n, e) in expected.iter().enumerate() {
            let got = extract_chaos_pairing(&f, &phi, n).unwrap();
            assert!((got.value - e).abs() < 1e-9, "{n}: {got:?}");
        }
    }

    #[test]
    fn donsker_first_order_has_closed_form() {
        let (x, t) = (0.6, 0.8);
        let phi = phi1();
        let f = UFunctional::donsker(vec![x], t);
        let q = phi.cumulative(t, 0).unwrap();
        let expected = exp(-x * x / (2.0 * t)) / sqrt(2.0 * PI * t) * (x / t) * q;
        let got = extract_chaos_pairing(&f, &phi, 1).unwrap();
        assert_relative_eq!(got.value, expected, max_relative = 1e-13);
    }

    #[test]
    fn exponential_taylor_coefficients() {
        let f = UFunctional::new("exp", |z: Complex64, _: &TestFunction| Ok(z.exp()));
        let phi = TestFunction::single(1, 0, 0, 1.0).unwrap();
        for n in 2..=4 {
            let got = extract_chaos_pairing(&f, &phi, n).unwrap();
            let factorial: f64 = (1..=n).map(|j| j as f64).product();
            assert!((got.value - 1.0 / factorial).abs() < 1e-8, "{n}: {got:?}");
        }
    }

    #[test]
    fn current_chaos_matches_kernels() {
        let p = CurrentParams::new(vec![0.8], 1.0).unwrap();
        let phi = phi1();
        let f = UFunctional::current(p.clone(), 0, 1e-13).unwrap();
        assert_eq!(extract_chaos_pairing(&f, &phi, 0).unwrap().value, 0.0);
        let first = first_chaos_pairing_closed(&p, &phi, 0, 1e-13).unwrap().value;
        assert!((extract_chaos_pairing(&f, &phi, 1).unwrap().value - first).abs() < 1e-10);
        let second = second_chaos_pairing_closed(&p, &phi, 0, Convention::Derivative, 1e-13)
            .unwrap()
            .value;
        assert!((extract_chaos_pairing(&f, &phi, 2).unwrap().value - second).abs() < 1e-7);
        let paper = second_chaos_pairing_closed(&p, &phi, 0, Convention::Paper, 1e-13)
            .unwrap()
            .value;
        assert_relative_eq!(second / paper, -2.0, max_relative = 1e-12);
    }

    #[test]
    fn second_kernel_vanishes_for_orthogonal_x() {
        let p = CurrentParams::new(vec![0.0, 1.0], 1.0).unwrap();
        let phi = TestFunction::new(vec![vec![0.5, 0.3], vec![]]).unwrap();
        for conv in [Convention::Paper, Convention::Derivative] {
            assert_eq!(second_chaos_pairing_closed(&p, &phi, 0, conv, 1e-12).unwrap().value, 0.0);
        }
    }

    #[test]
    fn first_kernel_at_origin_in_one_dimension() {
        // (2 pi)^{-1/2} int_0^1 t^{-1/2} h_0(t) dt by Gauss-Legendre after t = u^2
        let p = CurrentParams::new(vec![0.0], 1.0).unwrap();
        let phi = TestFunction::single(1, 0, 0, 1.0).unwrap();
        let got = first_chaos_pairing_closed(&p, &phi, 0, 1e-13).unwrap().value;
        let mut oracle = 0.0;
        let n = 2000;
        for k in 0..n {
            let u = (k as f64 + 0.5) / n as f64;
            oracle += 2.0 * crate::schwartz::hermite_function(0, u * u) / n as f64;
        }
        oracle /= sqrt(2.0 * PI);
        assert!((got - oracle).abs() < 1e-7);
        assert!(ln(got).is_finite());
    }

    #[test]
    fn origin_in_higher_dimensions_is_refused() {
        let p = CurrentParams::new(vec![0.0, 0.0], 1.0).unwrap();
        let phi = TestFunction::single(2, 0, 0, 1.0).unwrap();
        assert_eq!(
            first_chaos_pairing_closed(&p, &phi, 0, 1e-10),
            Err(Error::Nonexistence { dimension: 2 })
        );
    }

    #[test]
    fn noise_is_reported_as_instability() {
        let f = UFunctional::new("noisy", |z: Complex64, _: &TestFunction| {
            let jitter = libm::cos(1e9 * z.re) * 1e-6;
            Ok(z * z + jitter)
        });
        let phi = TestFunction::single(1, 0, 0, 1.0).unwrap();
        let r = extract_chaos_pairing(&f, &phi, 2);
        assert!(matches!(
            r,
            Err(Error::UnstableDerivative { .. })
        ), "{r:?}");
    }
}
