//! Closed-form S-transforms of the objects built on Brownian motion, the
//! Wick product as a pointwise combinator, and the growth-bound tools that
//! operationalise the characterization of Hida distributions by
//! U-functionals.
//!
//! With `c(t) = <eta_t, phi>` the vector of running integrals,
//!
//! ```text
//! S W_i(t)(phi)              = phi_i(t)
//! S delta(x - B(t))(z phi)   = (2 pi t)^{-d/2} exp(-sum_j (x_j - z c_j(t))^2 / 2t)
//! S xi_i(x)(phi)             = int_0^T S delta(x - B(t))(phi) phi_i(t) dt
//! ```
//!
//! The last one exists for `x != 0`, and for `x = 0` only when `d = 1`.
//! Replacing the delta by a Gaussian of variance `eps2` shifts `t -> t + eps2`
//! in the kernel, which gives the mollified current for every `x` and `d`.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::diagnostics::{self, DivergenceReport};
use crate::math::{abs, exp, gaussian_normalizer, ln, sqrt, square, PI};
use crate::quad::{self, QuadOptions, QuadResult, Singularity};
use crate::schwartz::TestFunction;
use crate::{Error, Result};

/// Parameters `(x, T)` of one current `xi(x) = int_0^T delta(x - B(t)) dB(t)`;
/// the dimension is `x.len()`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "CurrentParamsRepr", into = "CurrentParamsRepr")
)]
pub struct CurrentParams {
    x: Vec<f64>,
    horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurrentParamsRepr {
    pub x: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(rename = "T"))]
    pub horizon: f64,
}

impl TryFrom<CurrentParamsRepr> for CurrentParams {
    type Error = Error;

    fn try_from(repr: CurrentParamsRepr) -> Result<Self> {
        CurrentParams::new(repr.x, repr.horizon)
    }
}

impl From<CurrentParams> for CurrentParamsRepr {
    fn from(p: CurrentParams) -> Self {
        CurrentParamsRepr {
            x: p.x,
            horizon: p.horizon,
        }
    }
}

impl CurrentParams {
    pub fn new(x: Vec<f64>, horizon: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidParams("x must have at least one coordinate".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("x must be finite".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain {
                what: "T",
                requirement: "finite and > 0",
                value: horizon,
            });
        }
        Ok(CurrentParams { x, horizon })
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn x_norm(&self) -> f64 {
        sqrt(self.x.iter().map(|v| v * v).sum())
    }

    pub fn at_origin(&self) -> bool {
        self.x.iter().all(|&v| v == 0.0)
    }

    /// Whether `xi(x)` is a Hida distribution.
    pub fn exists(&self) -> bool {
        !self.at_origin() || self.dimension() == 1
    }

    fn require_existence(&self) -> Result<()> {
        if self.exists() {
            Ok(())
        } else {
            Err(Error::Nonexistence {
                dimension: self.dimension(),
            })
        }
    }

    fn check_test_function(&self, phi: &TestFunction) -> Result<()> {
        check_dimensions(self.dimension(), phi)
    }

    /// Endpoint behaviour of `t^{-d/2 - extra} e^{-|x|^2/2t}`-type kernels.
    pub(crate) fn singularity(&self, extra_power: f64) -> Singularity {
        let exponent = -0.5 * self.dimension() as f64 - extra_power;
        if self.at_origin() {
            Singularity::algebraic(exponent)
        } else {
            // |x - z c(t)|^2 -> |x|^2 as t -> 0; half the rate leaves slack for
            // the cross term x.c(t)/t.
            Singularity::damped(exponent, 0.25 * square(self.x_norm()))
        }
    }
}

fn check_dimensions(d: usize, phi: &TestFunction) -> Result<()> {
    if phi.dimension() != d {
        return Err(Error::InvalidParams(alloc::format!(
            "test function has dimension {} but x has dimension {d}",
            phi.dimension()
        )));
    }
    Ok(())
}

/// Component values and their quadrature diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VectorResult {
    pub value: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub node_count: usize,
}

impl VectorResult {
    fn from_components(parts: Vec<QuadResult>) -> Self {
        VectorResult {
            value: parts.iter().map(|r| r.value).collect(),
            abs_error: parts.iter().map(|r| r.abs_error_estimate).collect(),
            node_count: parts.iter().map(|r| r.node_count).sum(),
        }
    }
}

/// `S W_i(t)(phi) = phi_i(t)`.
pub fn s_white_noise(phi: &TestFunction, t: f64, i: usize) -> Result<f64> {
    phi.eval(t, i)
}

/// `S delta(x - B(t))(z phi)`.
pub fn s_donsker(x: &[f64], t: f64, phi: &TestFunction, z: Complex64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            what: "t",
            requirement: "> 0",
            value: t,
        });
    }
    check_dimensions(x.len(), phi)?;
    let mut exponent = Complex64::new(0.0, 0.0);
    for (j, xj) in x.iter().enumerate() {
        let c = phi.cumulative(t, j)?;
        let diff = Complex64::new(*xj, 0.0) - z * c;
        exponent += diff * diff;
    }
    Ok((-exponent / (2.0 * t)).exp() * gaussian_normalizer(t, x.len()))
}

/// Heat kernel `(2 pi s)^{-d/2} exp(-|x - z c|^2 / 2s)` at variance `s`,
/// complex in `z`.
#[inline]
fn kernel_complex(x: &[f64], c: &[f64], z: Complex64, s: f64) -> Complex64 {
    let mut exponent = Complex64::new(0.0, 0.0);
    for (xj, cj) in x.iter().zip(c) {
        let diff = Complex64::new(*xj, 0.0) - z * *cj;
        exponent += diff * diff;
    }
    (-exponent / (2.0 * s)).exp() * gaussian_normalizer(s, x.len())
}

#[inline]
fn kernel_real(x: &[f64], c: &[f64], s: f64) -> f64 {
    let mut r2 = 0.0;
    for (xj, cj) in x.iter().zip(c) {
        r2 += square(xj - cj);
    }
    exp(-r2 / (2.0 * s)) * gaussian_normalizer(s, x.len())
}

/// `S xi_i(x)(phi)` for every component.
///
/// Refuses `x = 0` in `d > 1` with [`Error::Nonexistence`].
pub fn s_current(p: &CurrentParams, phi: &TestFunction, tol: f64) -> Result<VectorResult> {
    p.require_existence()?;
    p.check_test_function(phi)?;
    let parts = (0..p.dimension())
        .map(|i| current_component_real(p, phi, i, 0.0, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorResult::from_components(parts))
}

/// `S xi^{eps2}_i(x)(phi)` for the current with the delta replaced by a
/// centred Gaussian density of variance `eps2`; defined for every `x`.
pub fn s_current_mollified(
    p: &CurrentParams,
    phi: &TestFunction,
    eps2: f64,
    tol: f64,
) -> Result<VectorResult> {
    check_eps2(eps2)?;
    p.check_test_function(phi)?;
    let parts = (0..p.dimension())
        .map(|i| current_component_real(p, phi, i, eps2, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorResult::from_components(parts))
}

fn check_eps2(eps2: f64) -> Result<()> {
    if !(eps2 > 0.0) || !eps2.is_finite() {
        return Err(Error::Domain {
            what: "eps2",
            requirement: "finite and > 0",
            value: eps2,
        });
    }
    Ok(())
}

fn current_component_real(
    p: &CurrentParams,
    phi: &TestFunction,
    i: usize,
    eps2: f64,
    tol: f64,
) -> Result<QuadResult> {
    if phi.coefficients(i)?.iter().all(|&c| c == 0.0) {
        return Ok(QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            node_count: 0,
        });
    }
    let d = p.dimension();
    let mut values = vec![0.0; d];
    let mut cums = vec![0.0; d];
    let integrand = |t: f64| {
        phi.sample(t, &mut values, &mut cums);
        kernel_real(p.x(), &cums, t + eps2) * values[i]
    };
    let opts = QuadOptions::with_tol(tol);
    if eps2 > 0.0 {
        quad::integrate(integrand, 0.0, p.horizon(), opts)
    } else {
        quad::integrate_singular(integrand, p.horizon(), p.singularity(0.0), opts)
    }
}

/// Component `i` of `S xi(x)(z phi)` for complex `z`, i.e. the entire
/// extension `z int_0^T K(t; z) phi_i(t) dt`.
///
/// `tol` bounds the error of the integral before it is multiplied by `z`,
/// so tiny imaginary steps `z = i h` keep their relative accuracy.
pub fn s_current_complex(
    p: &CurrentParams,
    phi: &TestFunction,
    z: Complex64,
    i: usize,
    tol: f64,
) -> Result<QuadResult<Complex64>> {
    p.require_existence()?;
    current_component_complex(p, phi, z, i, 0.0, tol)
}

/// Mollified counterpart of [`s_current_complex`].
pub fn s_current_mollified_complex(
    p: &CurrentParams,
    phi: &TestFunction,
    z: Complex64,
    i: usize,
    eps2: f64,
    tol: f64,
) -> Result<QuadResult<Complex64>> {
    check_eps2(eps2)?;
    current_component_complex(p, phi, z, i, eps2, tol)
}

fn current_component_complex(
    p: &CurrentParams,
    phi: &TestFunction,
    z: Complex64,
    i: usize,
    eps2: f64,
    tol: f64,
) -> Result<QuadResult<Complex64>> {
    p.check_test_function(phi)?;
    let zero = Complex64::new(0.0, 0.0);
    if z == zero || phi.coefficients(i)?.iter().all(|&c| c == 0.0) {
        return Ok(QuadResult {
            value: zero,
            abs_error_estimate: 0.0,
            node_count: 0,
        });
    }
    let d = p.dimension();
    let mut values = vec![0.0; d];
    let mut cums = vec![0.0; d];
    let integrand = |t: f64| {
        phi.sample(t, &mut values, &mut cums);
        kernel_complex(p.x(), &cums, z, t + eps2) * values[i]
    };
    let opts = QuadOptions::with_tol(tol);
    let mut r = if eps2 > 0.0 {
        quad::integrate(integrand, 0.0, p.horizon(), opts)?
    } else {
        quad::integrate_singular(integrand, p.horizon(), p.singularity(0.0), opts)?
    };
    r.value *= z;
    r.abs_error_estimate *= z.norm();
    Ok(r)
}

/// Integrand of the current: `S(delta(x - B(t)) <> W_i(t))(z phi)`.
pub fn s_current_integrand(
    x: &[f64],
    t: f64,
    phi: &TestFunction,
    z: Complex64,
    i: usize,
) -> Result<Complex64> {
    Ok(s_donsker(x, t, phi, z)? * z * s_white_noise(phi, t, i)?)
}

type EvalFn<'a> = dyn Fn(Complex64, &TestFunction) -> Result<Complex64> + Send + Sync + 'a;

/// A map `(z, phi) -> F(z phi)` with an entire extension in `z`; the image
/// of the S-transform.
pub struct UFunctional<'a> {
    label: String,
    eval: Box<EvalFn<'a>>,
}

impl core::fmt::Debug for UFunctional<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("UFunctional").field("label", &self.label).finish()
    }
}

impl<'a> UFunctional<'a> {
    pub fn new<F>(label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(Complex64, &TestFunction) -> Result<Complex64> + Send + Sync + 'a,
    {
        UFunctional {
            label: label.into(),
            eval: Box::new(eval),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `F(z phi)`.
    pub fn eval(&self, z: Complex64, phi: &TestFunction) -> Result<Complex64> {
        (self.eval)(z, phi)
    }

    /// S-transform of the constant `c`; `constant(1)` is the Wick unit.
    pub fn constant(c: Complex64) -> UFunctional<'static> {
        UFunctional::new(alloc::format!("constant({c})"), move |_, _| Ok(c))
    }

    pub fn donsker(x: Vec<f64>, t: f64) -> UFunctional<'static> {
        UFunctional::new(alloc::format!("S delta(x - B({t}))"), move |z, phi| {
            s_donsker(&x, t, phi, z)
        })
    }

    pub fn white_noise(t: f64, i: usize) -> UFunctional<'static> {
        UFunctional::new(alloc::format!("S W_{i}({t})"), move |z, phi| {
            Ok(z * s_white_noise(phi, t, i)?)
        })
    }

    /// `S xi_i(x)`, evaluated by quadrature to absolute tolerance `tol`.
    pub fn current(p: CurrentParams, i: usize, tol: f64) -> Result<UFunctional<'static>> {
        p.require_existence()?;
        if i >= p.dimension() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dimension: p.dimension(),
            });
        }
        Ok(UFunctional::new(alloc::format!("S xi_{i}"), move |z, phi| {
            Ok(s_current_complex(&p, phi, z, i, tol)?.value)
        }))
    }

    pub fn mollified_current(
        p: CurrentParams,
        i: usize,
        eps2: f64,
        tol: f64,
    ) -> Result<UFunctional<'static>> {
        check_eps2(eps2)?;
        if i >= p.dimension() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dimension: p.dimension(),
            });
        }
        Ok(UFunctional::new(alloc::format!("S xi^eps_{i}"), move |z, phi| {
            Ok(s_current_mollified_complex(&p, phi, z, i, eps2, tol)?.value)
        }))
    }
}

/// `S(Phi <> Psi) = S Phi * S Psi`.
pub fn wick_product<'a>(f: &'a UFunctional<'_>, g: &'a UFunctional<'_>) -> UFunctional<'a> {
    UFunctional::new(
        alloc::format!("({}) <> ({})", f.label(), g.label()),
        move |z, phi| Ok(f.eval(z, phi)? * g.eval(z, phi)?),
    )
}

/// Outcome of checking that the time mass `int_0^T t^{-d/2} e^{-|x|^2/2t} dt`
/// of the growth constant is finite.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Integrability {
    Finite { mass: f64 },
    Divergent(DivergenceReport),
}

pub fn check_integrability(p: &CurrentParams) -> Result<Integrability> {
    let d = p.dimension();
    let horizon = p.horizon();
    if !p.at_origin() {
        let mass = crate::special::singular_mass_closed(d, p.x_norm(), horizon)?;
        return Ok(Integrability::Finite { mass });
    }
    if d == 1 {
        let r = quad::integrate_singular(
            |t: f64| 1.0 / sqrt(t),
            horizon,
            Singularity::algebraic(-0.5),
            QuadOptions::with_tol(1e-13),
        )?;
        return Ok(Integrability::Finite { mass: r.value });
    }
    let report = diagnostics::divergence_scan(d, horizon, &diagnostics::default_cutoffs(horizon))?;
    Ok(Integrability::Divergent(report))
}

/// Growth constants `|F(z phi)| <= C1 exp(C2 |z|^2 ||phi||^2)` fitted on a
/// polar grid of `z`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundFit {
    pub c1: f64,
    pub c2: f64,
    pub norm_used: String,
    pub samples: usize,
}

/// Fits the U-functional growth bound.
///
/// For every radius the largest `ln |F|` over the angles is kept, and that
/// envelope is regressed on `s = r^2 ||phi||^2` with the growth model
/// `a + C2 s + b sqrt(s) + c ln s` (fewer terms when there are fewer distinct
/// radii). The quadratic coefficient is clamped at zero, and `C1` is then
/// raised until no sample violates the bound. `||phi||` is
/// [`TestFunction::combined_norm`].
pub fn fit_ufunctional_bound(
    f: &UFunctional<'_>,
    phi: &TestFunction,
    radii: &[f64],
    angles_per_radius: usize,
) -> Result<BoundFit> {
    if radii.is_empty() || angles_per_radius == 0 {
        return Err(Error::InvalidParams(
            "need at least one radius and one angle".into(),
        ));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParams("radii must be finite and positive".into()));
    }
    let norm2 = square(phi.combined_norm());
    let mut samples = Vec::with_capacity(radii.len() * angles_per_radius);
    let mut envelope: Vec<(f64, f64)> = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best = f64::NEG_INFINITY;
        for j in 0..angles_per_radius {
            let theta = 2.0 * PI * j as f64 / angles_per_radius as f64;
            let z = Complex64::from_polar(r, theta);
            let value = f.eval(z, phi)?;
            let y = ln(value.norm());
            if y.is_nan() {
                return Err(Error::InvalidParams("U-functional returned NaN".into()));
            }
            samples.push((r * r * norm2, y));
            best = best.max(y);
        }
        if best > f64::NEG_INFINITY && norm2 > 0.0 && !envelope.iter().any(|e| e.0 == r * r * norm2) {
            envelope.push((r * r * norm2, best));
        }
    }

    let c2 = growth_rate(&envelope).max(0.0);
    let log_c1 = samples
        .iter()
        .map(|(s, y)| y - c2 * s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundFit {
        c1: exp(log_c1),
        c2,
        norm_used: "combined: sqrt(|phi|^2 + |phi|_inf^2)".into(),
        samples: samples.len(),
    })
}

/// Coefficient of `s` in the least-squares growth model.
fn growth_rate(points: &[(f64, f64)]) -> f64 {
    let terms = points.len().min(4);
    if terms < 2 {
        return 0.0;
    }
    let basis = |k: usize, s: f64| match k {
        0 => 1.0,
        1 => s,
        2 => sqrt(s),
        _ => ln(s),
    };
    let mut columns: Vec<Vec<f64>> = (0..terms)
        .map(|k| points.iter().map(|p| basis(k, p.0)).collect())
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    least_squares(&mut columns, &y).map_or(0.0, |c| c[1])
}

/// Least squares by modified Gram-Schmidt; `None` when the columns are
/// numerically dependent.
fn least_squares(columns: &mut [Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = columns.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let mut r = vec![vec![0.0; n]; n];
    for k in 0..n {
        let original = sqrt(dot(&columns[k], &columns[k]));
        for j in 0..k {
            let (head, tail) = columns.split_at_mut(k);
            let proj = dot(&head[j], &tail[0]);
            r[j][k] = proj;
            for (v, q) in tail[0].iter_mut().zip(&head[j]) {
                *v -= proj * q;
            }
        }
        let norm = sqrt(dot(&columns[k], &columns[k]));
        if !(norm > 1e-10 * original) {
            return None;
        }
        r[k][k] = norm;
        for v in columns[k].iter_mut() {
            *v /= norm;
        }
    }
    let qty: Vec<f64> = columns.iter().map(|q| dot(q, y)).collect();
    let mut coef = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|j| r[k][j] * coef[j]).sum();
        coef[k] = (qty[k] - tail) / r[k][k];
    }
    Some(coef)
}

/// Natural logarithms of the successive majorants of
/// `|S(delta(x - B(t)) <> W_i(t))(z phi)|` in the existence proof:
///
/// ```text
/// [0] the value itself
/// [1] N e^{-|x|^2/2t} e^{|x||z||c|/t} e^{|z|^2|c|^2/2t} |z||phi_i(t)|
/// [2] N e^{-|x|^2/2t} e^{|x||z||phi|_inf} e^{|z|^2|phi|^2/2} e^{|z||phi|_inf}
/// [3] C N e^{-|x|^2/2t} e^{|x|^2/2} e^{|z|^2|phi|^2/2} e^{|z|^2|phi|_inf^2/2}
/// [4] C N e^{-|x|^2/2t} e^{|x|^2/2} e^{|z|^2 ||phi||^2 / 2}
/// ```
///
/// with `N = (2 pi t)^{-d/2}` and `C = e^{|x| + 1/2}`. Step 2 uses
/// `|c(t)| <= t |phi|_inf` and `|c(t)|^2 <= t |phi|^2`; step 3 uses
/// `(|x| + 1) a <= (|x| + 1)^2 / 2 + a^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofChain {
    pub log_bounds: [f64; 5],
    pub constant: f64,
}

pub fn proof_chain(
    x: &[f64],
    t: f64,
    phi: &TestFunction,
    z: Complex64,
    i: usize,
) -> Result<ProofChain> {
    let value = s_current_integrand(x, t, phi, z, i)?;
    let d = x.len();
    let xn = sqrt(x.iter().map(|v| v * v).sum());
    let zn = z.norm();
    let c_norm = sqrt(
        (0..d)
            .map(|j| phi.cumulative(t, j).map(square))
            .sum::<Result<f64>>()?,
    );
    let phi_i = abs(phi.eval(t, i)?);
    let l2 = phi.l2_norm();
    let sup = phi.sup_norm();
    let log_n = ln(gaussian_normalizer(t, d));
    let base = log_n - xn * xn / (2.0 * t);
    let log_c = xn + 0.5;

    let b0 = ln(value.norm());
    let b1 = base + xn * zn * c_norm / t + zn * zn * c_norm * c_norm / (2.0 * t) + ln(zn * phi_i);
    let b2 = base + xn * zn * sup + 0.5 * zn * zn * l2 * l2 + zn * sup;
    let b3 = log_c + base + 0.5 * xn * xn + 0.5 * zn * zn * l2 * l2 + 0.5 * zn * zn * sup * sup;
    let b4 = log_c + base + 0.5 * xn * xn + 0.5 * zn * zn * square(phi.combined_norm());
    Ok(ProofChain {
        log_bounds: [b0, b1, b2, b3, b4],
        constant: exp(log_c) * gaussian_normalizer(1.0, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI_POW_NEG_QUARTER;
    use approx::assert_relative_eq;

    fn h0(d: usize) -> TestFunction {
        TestFunction::single(d, 0, 0, 1.0).unwrap()
    }

    #[test]
    fn white_noise_is_evaluation() {
        assert_eq!(s_white_noise(&TestFunction::zero(1).unwrap(), 0.4, 0).unwrap(), 0.0);
        assert_relative_eq!(s_white_noise(&h0(1), 0.0, 0).unwrap(), PI_POW_NEG_QUARTER);
    }

    #[test]
    fn donsker_examples() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let v = s_donsker(&[0.0], 1.0, &h0(1), zero).unwrap();
        assert_relative_eq!(v.re, 1.0 / sqrt(2.0 * PI), max_relative = 1e-15);

        let x = [0.3, -1.1];
        let t = 0.7;
        let v = s_donsker(&x, t, &h0(2), zero).unwrap();
        let expected = exp(-(0.09 + 1.21) / (2.0 * t)) / (2.0 * PI * t);
        assert_relative_eq!(v.re, expected, max_relative = 1e-14);

        let q = 0.642_681_337_217_475_6;
        let v = s_donsker(&[1.0], 1.0, &h0(1), one).unwrap();
        assert_relative_eq!(v.re, exp(-square(1.0 - q) / 2.0) / sqrt(2.0 * PI), max_relative = 1e-14);
        assert_eq!(v.im, 0.0);

        assert!(matches!(
            s_donsker(&[1.0], 0.0, &h0(1), one),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn current_vanishes_for_zero_test_function() {
        let p = CurrentParams::new(vec![0.5, -0.2], 1.0).unwrap();
        let r = s_current(&p, &TestFunction::zero(2).unwrap(), 1e-10).unwrap();
        assert_eq!(r.value, vec![0.0, 0.0]);
    }

    #[test]
    fn current_at_origin_in_one_dimension() {
        // 30-digit reference quadrature of (2 pi)^{-1/2} int_0^1 t^{-1/2} e^{-c(t)^2/2t} h_0(t) dt
        let p = CurrentParams::new(vec![0.0], 1.0).unwrap();
        let r = s_current(&p, &h0(1), 1e-12).unwrap();
        assert_relative_eq!(r.value[0], 0.508_541_223_775_709_7, max_relative = 1e-11);
    }

    #[test]
    fn current_refuses_origin_in_higher_dimensions() {
        for d in 2..=3 {
            let p = CurrentParams::new(vec![0.0; d], 1.0).unwrap();
            assert_eq!(
                s_current(&p, &h0(d), 1e-8),
                Err(Error::Nonexistence { dimension: d })
            );
        }
    }

    #[test]
    fn mollified_current_at_origin_in_three_dimensions() {
        let p = CurrentParams::new(vec![0.0; 3], 1.0).unwrap();
        let r = s_current_mollified(&p, &h0(3), 0.01, 1e-12).unwrap();
        assert_relative_eq!(r.value[0], 0.828_867_663_050_031_9, max_relative = 1e-10);
        assert_eq!(r.value[1], 0.0);
    }

    #[test]
    fn complex_extension_agrees_on_the_real_line() {
        let p = CurrentParams::new(vec![0.4, 0.9], 1.5).unwrap();
        let phi = TestFunction::new(vec![vec![0.3, 0.2], vec![-0.5, 0.0, 0.1]]).unwrap();
        let real = s_current(&p, &phi.scaled(0.7).unwrap(), 1e-12).unwrap();
        for i in 0..2 {
            let c = s_current_complex(&p, &phi, Complex64::new(0.7, 0.0), i, 1e-12).unwrap();
            assert_relative_eq!(c.value.re, real.value[i], epsilon = 1e-11);
            assert!(c.value.im.abs() < 1e-15);
        }
    }

    #[test]
    fn wick_unit_and_commutativity() {
        let phi = TestFunction::new(vec![vec![0.3, -0.4, 0.2]]).unwrap();
        let donsker = UFunctional::donsker(vec![0.8], 0.6);
        let noise = UFunctional::white_noise(0.6, 0);
        let unit = UFunctional::constant(Complex64::new(1.0, 0.0));
        let fg = wick_product(&donsker, &noise);
        let gf = wick_product(&noise, &donsker);
        let with_unit = wick_product(&donsker, &unit);
        for &z in &[Complex64::new(0.3, 0.1), Complex64::new(-1.2, 2.0)] {
            let a = fg.eval(z, &phi).unwrap();
            assert_eq!(a, gf.eval(z, &phi).unwrap());
            assert_eq!(with_unit.eval(z, &phi).unwrap(), donsker.eval(z, &phi).unwrap());
            let direct = s_current_integrand(&[0.8], 0.6, &phi, z, 0).unwrap();
            assert_relative_eq!(a.re, direct.re, max_relative = 1e-15);
            assert_relative_eq!(a.im, direct.im, max_relative = 1e-15);
        }
    }

    #[test]
    fn integrability_examples() {
        let p = CurrentParams::new(vec![0.0], 1.0).unwrap();
        match check_integrability(&p).unwrap() {
            Integrability::Finite { mass } => assert_relative_eq!(mass, 2.0, max_relative = 1e-12),
            other => panic!("{other:?}"),
        }
        let p = CurrentParams::new(vec![1.0, 0.0, 0.0], 1.0).unwrap();
        match check_integrability(&p).unwrap() {
            Integrability::Finite { mass } => {
                assert_relative_eq!(mass, 0.795_379_490_846_702_9, max_relative = 1e-12)
            }
            other => panic!("{other:?}"),
        }
        let p = CurrentParams::new(vec![0.0, 0.0], 1.0).unwrap();
        match check_integrability(&p).unwrap() {
            Integrability::Divergent(report) => {
                assert_eq!(report.model.kind, diagnostics::ModelKind::Logarithmic)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bound_fit_trivial_cases() {
        let phi = TestFunction::single(1, 0, 0, 1.0).unwrap();
        let radii = [0.5, 1.0, 2.0, 4.0];
        let constant = UFunctional::constant(Complex64::new(-2.5, 0.0));
        let fit = fit_ufunctional_bound(&constant, &phi, &radii, 16).unwrap();
        assert_relative_eq!(fit.c1, 2.5, max_relative = 1e-12);
        assert!(fit.c2 < 1e-12);
        assert_eq!(fit.samples, 64);

        let n2 = square(phi.combined_norm());
        let gaussian = UFunctional::new("exp(z^2 / ||phi||^2)", move |z: Complex64, _| {
            Ok((z * z).exp())
        });
        // |F(z phi)| = e^{r^2 cos 2 theta} = e^{(r^2 ||phi||^2) cos 2 theta / ||phi||^2}
        let fit = fit_ufunctional_bound(&gaussian, &phi, &radii, 16).unwrap();
        assert_relative_eq!(fit.c2 * n2, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn bound_fit_majorizes_every_sample() {
        let phi = TestFunction::new(vec![vec![0.6, -0.3, 0.2]]).unwrap();
        let f = UFunctional::donsker(vec![0.7], 0.9);
        let radii = [0.25, 0.5, 1.0, 2.0, 3.0];
        let fit = fit_ufunctional_bound(&f, &phi, &radii, 24).unwrap();
        let n2 = square(phi.combined_norm());
        for &r in &radii {
            for j in 0..24 {
                let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / 24.0);
                let v = f.eval(z, &phi).unwrap().norm();
                assert!(v <= fit.c1 * exp(fit.c2 * r * r * n2) * (1.0 + 1e-12));
            }
        }
        assert!(fit.c2 <= 0.5);
    }

    #[test]
    fn params_validation() {
        assert!(CurrentParams::new(vec![], 1.0).is_err());
        assert!(CurrentParams::new(vec![1.0], 0.0).is_err());
        assert!(CurrentParams::new(vec![f64::NAN], 1.0).is_err());
        assert!(CurrentParams::new(vec![0.0, 0.0], 1.0).map(|p| !p.exists()).unwrap());
    }
}
