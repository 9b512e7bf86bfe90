//! Globally adaptive Gauss-Kronrod (G10/K21) quadrature, with a router for
//! integrands on `(0, T]` that are singular at the left endpoint.
//!
//! Two regimes occur in the time integrals of the current:
//!
//! * **algebraic**, `|f(t)| <= M t^alpha` with `alpha > -1` (the origin in
//!   `d = 1`): the substitution `t = T u^q`, `q = 1 / (1 + alpha)`, removes
//!   the power and the transformed integrand is bounded on `(0, 1]`;
//! * **damped**, `|f(t)| <= M t^alpha e^{-c/t}` with `c > 0` and any `alpha`
//!   (every `x != 0`): dyadic panels `[T 2^{-k-1}, T 2^{-k}]` are laid down
//!   until the bound `2 M delta^{alpha+1} e^{-c/delta}` on the remaining
//!   `(0, delta]` falls below a quarter of the tolerance, with `M` read off
//!   the innermost panel.
//!
//! Neither path evaluates `f` at `t = 0`.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::math::{abs, exp, ln, pow};
use crate::{Error, Result};

/// Default evaluation budget per call.
pub const DEFAULT_MAX_EVALS: usize = 1_000_000;

/// Values a quadrature rule can accumulate.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
    fn is_finite(self) -> bool;
    /// Real part, reported in budget errors.
    fn real_part(self) -> f64;
}

impl QuadValue for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        abs(self)
    }

    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    #[inline]
    fn real_part(self) -> f64 {
        self
    }
}

impl QuadValue for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        abs(self.re) + abs(self.im)
    }

    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    #[inline]
    fn real_part(self) -> f64 {
        self.re
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadResult<V = f64> {
    pub value: V,
    pub abs_error_estimate: f64,
    pub node_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Target absolute error.
    pub tol: f64,
    pub max_evals: usize,
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions {
            tol,
            max_evals: DEFAULT_MAX_EVALS,
        }
    }
}

/// Declared behaviour of an integrand at `t -> 0+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub exponent: f64,
    pub damping: Option<f64>,
}

impl Singularity {
    pub fn algebraic(exponent: f64) -> Self {
        Singularity {
            exponent,
            damping: None,
        }
    }

    /// `|f(t)| <= M t^exponent e^{-damping / t}`.
    pub fn damped(exponent: f64, damping: f64) -> Self {
        Singularity {
            exponent,
            damping: Some(damping),
        }
    }

    pub fn regular() -> Self {
        Self::algebraic(0.0)
    }
}

// Gauss-Kronrod 21-point abscissae and weights; the odd-indexed abscissae are
// the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_811_836,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
const RULE_NODES: usize = 21;

#[derive(Debug, Clone, Copy)]
struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
    abs_mass: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One G10/K21 application on `[a, b]`; `observe(t, |f(t)|)` sees every node.
fn kronrod<V, F, O>(f: &mut F, a: f64, b: f64, observe: &mut O) -> Result<Segment<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
    O: FnMut(f64, f64),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut call = |t: f64| -> Result<V> {
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::IntegrandFailure { t });
        }
        observe(t, v.magnitude());
        Ok(v)
    };
    let fc = call(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = V::default();
    let mut abs_mass = WGK[10] * fc.magnitude();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = call(center - dx)?;
        let f2 = call(center + dx)?;
        kronrod = kronrod + (f1 + f2) * WGK[j];
        abs_mass += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = (kronrod - gauss).magnitude() * abs(half);
    Ok(Segment {
        a,
        b,
        value,
        error,
        abs_mass: abs_mass * abs(half),
    })
}

struct Adaptive<V> {
    heap: BinaryHeap<Segment<V>>,
    settled: Vec<Segment<V>>,
    evals: usize,
}

impl<V: QuadValue> Adaptive<V> {
    fn new() -> Self {
        Adaptive {
            heap: BinaryHeap::new(),
            settled: Vec::new(),
            evals: 0,
        }
    }

    fn push(&mut self, segment: Segment<V>) {
        self.evals += RULE_NODES;
        let width = segment.b - segment.a;
        let scale = abs(segment.a) + abs(segment.b);
        if width <= 1e-13 * scale {
            self.settled.push(segment);
        } else {
            self.heap.push(segment);
        }
    }

    fn total_error(&self) -> f64 {
        self.heap.iter().chain(&self.settled).map(|s| s.error).sum()
    }

    fn total_abs_mass(&self) -> f64 {
        self.heap.iter().chain(&self.settled).map(|s| s.abs_mass).sum()
    }

    /// Bisects the worst segment until the summed error estimate is below
    /// `tol` (or the round-off floor), then returns value and error.
    fn run<F>(mut self, f: &mut F, tol: f64, max_evals: usize) -> Result<QuadResult<V>>
    where
        F: FnMut(f64) -> V,
    {
        let mut error = self.total_error();
        let mut mass = self.total_abs_mass();
        let mut refinements = 0usize;
        loop {
            let floor = 50.0 * f64::EPSILON * mass;
            if error <= tol.max(floor) || self.heap.is_empty() {
                break;
            }
            if self.evals + 2 * RULE_NODES > max_evals {
                let result = self.finish();
                return Err(Error::BudgetExceeded {
                    value: result.value.real_part(),
                    abs_error_estimate: result.abs_error_estimate,
                    node_count: result.node_count,
                });
            }
            let worst = self.heap.pop().expect("non-empty heap");
            let mid = 0.5 * (worst.a + worst.b);
            let left = kronrod(f, worst.a, mid, &mut |_, _| {})?;
            let right = kronrod(f, mid, worst.b, &mut |_, _| {})?;
            error += left.error + right.error - worst.error;
            mass += left.abs_mass + right.abs_mass - worst.abs_mass;
            self.push(left);
            self.push(right);
            refinements += 1;
            // Re-sum occasionally to keep the running totals honest.
            if refinements % 64 == 0 {
                error = self.total_error();
                mass = self.total_abs_mass();
            }
        }
        Ok(self.finish())
    }

    fn finish(self) -> QuadResult<V> {
        let mut segments: Vec<Segment<V>> = self.heap.into_vec();
        segments.extend(self.settled);
        segments.sort_by(|x, y| x.a.total_cmp(&y.a));
        let mut value = V::default();
        let mut error = 0.0;
        for s in &segments {
            value = value + s.value;
            error += s.error;
        }
        QuadResult {
            value,
            abs_error_estimate: error,
            node_count: self.evals,
        }
    }
}

fn check_options(opts: &QuadOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            requirement: "> 0",
            value: opts.tol,
        });
    }
    Ok(())
}

/// Adaptive integral of a regular integrand over `[a, b]`.
pub fn integrate<V, F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    check_options(&opts)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParams("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: V::default(),
            abs_error_estimate: 0.0,
            node_count: 0,
        });
    }
    let mut adaptive = Adaptive::new();
    adaptive.push(kronrod(&mut f, a, b, &mut |_, _| {})?);
    adaptive.run(&mut f, opts.tol, opts.max_evals)
}

/// `int_0^T f(t) dt` for an integrand singular at `t = 0` in the manner
/// described by `singularity`.
pub fn integrate_singular<V, F>(
    mut f: F,
    horizon: f64,
    singularity: Singularity,
    opts: QuadOptions,
) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    check_options(&opts)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain {
            what: "T",
            requirement: "finite and > 0",
            value: horizon,
        });
    }
    let alpha = singularity.exponent;
    if alpha > -1.0 {
        return algebraic(&mut f, horizon, alpha, opts);
    }
    match singularity.damping {
        Some(c) if c > 0.0 => damped(&mut f, horizon, alpha, c, opts),
        _ => Err(Error::NotIntegrable { exponent: alpha }),
    }
}

fn algebraic<V, F>(f: &mut F, horizon: f64, alpha: f64, opts: QuadOptions) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let q = 1.0 / (1.0 + alpha);
    if q == 1.0 {
        return integrate(f, 0.0, horizon, opts);
    }
    let mut g = |u: f64| {
        let uq1 = pow(u, q - 1.0);
        f(horizon * uq1 * u) * (horizon * q * uq1)
    };
    integrate(&mut g, 0.0, 1.0, opts)
}

fn damped<V, F>(
    f: &mut F,
    horizon: f64,
    alpha: f64,
    damping: f64,
    opts: QuadOptions,
) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    // The envelope t^alpha e^{-c/t} increases on (0, c / -alpha].
    let monotone_below = damping / -alpha;
    let mut adaptive = Adaptive::new();
    let mut hi = horizon;
    let tail;
    loop {
        let lo = 0.5 * hi;
        let mut log_ratio = f64::NEG_INFINITY;
        let segment = kronrod(f, lo, hi, &mut |t, m| {
            if m > 0.0 {
                let r = ln(m) - alpha * ln(t) + damping / t;
                if r > log_ratio {
                    log_ratio = r;
                }
            }
        })?;
        adaptive.push(segment);
        if adaptive.evals > opts.max_evals {
            let r = adaptive.finish();
            return Err(Error::BudgetExceeded {
                value: r.value.real_part(),
                abs_error_estimate: r.abs_error_estimate,
                node_count: r.node_count,
            });
        }
        hi = lo;
        if lo <= monotone_below {
            let log_tail = core::f64::consts::LN_2 + log_ratio + (alpha + 1.0) * ln(lo) - damping / lo;
            let bound = exp(log_tail);
            if bound <= 0.25 * opts.tol || log_ratio == f64::NEG_INFINITY {
                tail = if log_ratio == f64::NEG_INFINITY { 0.0 } else { bound };
                break;
            }
        }
        if lo < f64::MIN_POSITIVE {
            return Err(Error::NotIntegrable { exponent: alpha });
        }
    }
    let mut result = adaptive.run(f, opts.tol - tail, opts.max_evals)?;
    result.abs_error_estimate += tail;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;
    use approx::assert_relative_eq;

    const SQRT2_GAMMA_HALF_HALF: f64 = 0.795_379_490_846_702_9;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|t: f64| 3.0 * t * t - t + 2.0, -1.0, 2.0, QuadOptions::with_tol(1e-14))
            .unwrap();
        assert_relative_eq!(r.value, 9.0 - 1.5 + 6.0, max_relative = 1e-15);
        assert!(r.node_count >= 1);
    }

    #[test]
    fn constant_integrand() {
        let r = integrate_singular(|_t: f64| 1.0, 2.0, Singularity::regular(), QuadOptions::with_tol(1e-12))
            .unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn inverse_square_root() {
        let r = integrate_singular(
            |t: f64| 1.0 / sqrt(t),
            1.0,
            Singularity::algebraic(-0.5),
            QuadOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((r.value - 2.0).abs() <= 1e-12);
        assert!((r.value - 2.0).abs() <= r.abs_error_estimate.max(1e-15));
    }

    #[test]
    fn damped_power_matches_gamma_identity() {
        let r = integrate_singular(
            |t: f64| pow(t, -1.5) * exp(-0.5 / t),
            1.0,
            Singularity::damped(-1.5, 0.5),
            QuadOptions::with_tol(1e-12),
        )
        .unwrap();
        assert_relative_eq!(r.value, SQRT2_GAMMA_HALF_HALF, max_relative = 1e-12);
    }

    #[test]
    fn never_evaluates_the_origin() {
        let r = integrate_singular(
            |t: f64| {
                assert!(t > 0.0);
                pow(t, -0.9)
            },
            1.0,
            Singularity::algebraic(-0.9),
            QuadOptions::with_tol(1e-10),
        )
        .unwrap();
        assert_relative_eq!(r.value, 10.0, max_relative = 1e-10);
    }

    #[test]
    fn complex_integrand() {
        let r = integrate(
            |t: f64| Complex64::new(t, t * t),
            0.0,
            1.0,
            QuadOptions::with_tol(1e-13),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(r.value.im, 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn failure_modes() {
        assert!(matches!(
            integrate_singular(|t: f64| 1.0 / t, 1.0, Singularity::algebraic(-1.0), QuadOptions::with_tol(1e-8)),
            Err(Error::NotIntegrable { .. })
        ));
        assert!(matches!(
            integrate(|t: f64| if t > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, QuadOptions::with_tol(1e-8)),
            Err(Error::IntegrandFailure { .. })
        ));
        let tight = QuadOptions {
            tol: 1e-14,
            max_evals: 100,
        };
        assert!(matches!(
            integrate(|t: f64| (40.0 * t).sin() * exp(t), 0.0, 10.0, tight),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
