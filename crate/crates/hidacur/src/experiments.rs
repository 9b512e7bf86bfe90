//! One runner per experiment kind.
//!
//! Every runner returns a typed report (serialized as the `results` field of
//! the JSON record) and the tidy CSV tables that go with it. Reports contain
//! no timing or scheduling information, so identical configs give identical
//! reports.

use hidacur_core::chaos::{
    extract_chaos_pairing, first_chaos_pairing_closed, second_chaos_pairing_closed, ChaosPairing,
    Convention,
};
use hidacur_core::diagnostics::{default_cutoffs, divergence_scan, DivergenceReport, ModelKind};
use hidacur_core::montecarlo::{grid_bias_from, Estimator, GridBias, MCConfig, MCEstimate};
use hidacur_core::quad::{integrate_singular, QuadOptions, Singularity};
use hidacur_core::special::singular_mass_closed;
use hidacur_core::stransform::{
    fit_ufunctional_bound, proof_chain, s_current, s_current_integrand, s_current_mollified,
    BoundFit, VectorResult,
};
use hidacur_core::{Complex64, CurrentParams, TestFunction, UFunctional};
use serde::Serialize;

use crate::cases::{expand, Case, PhiRef};
use crate::config::{
    ChaosConfig, DivergeConfig, ExperimentConfig, GammaCheckConfig, McExperimentConfig,
    MollifiedConfig, Settings, StransformConfig, UboundConfig,
};
use crate::output::Table;
use crate::{parallel, RunError};

/// Closed-form magnitudes below this are too small for a relative stderr.
pub const MC_RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Stransform(StransformReport),
    Mollified(MollifiedReport),
    Chaos(ChaosReport),
    Mc(McReport),
    Diverge(DivergeReport),
    GammaCheck(GammaCheckReport),
    Ubound(UboundReport),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    match &cfg.settings {
        Settings::Stransform(s) => stransform(cfg, s),
        Settings::Mollified(s) => mollified(cfg, s),
        Settings::Chaos(s) => chaos(cfg, s),
        Settings::Mc(s) => {
            let threads = parallel::thread_budget()?;
            mc(cfg, s, threads)
        }
        Settings::Diverge(s) => diverge(s),
        Settings::GammaCheck(s) => gamma_check(s),
        Settings::Ubound(s) => ubound(cfg, s),
    }
}

fn cases_of(cfg: &ExperimentConfig, specs: &[crate::config::CaseSpec]) -> Result<Vec<Case>, RunError> {
    expand(specs, cfg.seed, &cfg.base_dir)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

// ---------------------------------------------------------------- stransform

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Finite,
    /// The expected nonexistence signal was raised.
    Nonexistence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StransformRecord {
    pub params: CurrentParams,
    pub phi_ref: PhiRef,
    pub value: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub tol: f64,
    pub node_count: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StransformReport {
    pub records: Vec<StransformRecord>,
    pub finite: usize,
    pub nonexistence: usize,
    pub max_abs_error: f64,
}

/// Evaluates `s_current` and reconciles a nonexistence signal with the case
/// expectation. `Ok(None)` means the expected signal was raised.
fn current_or_expected(case: &Case, k: usize, tol: f64) -> Result<Option<VectorResult>, RunError> {
    let context = || format!("case {k} (x = {:?}, T = {})", case.params.x(), case.params.horizon());
    match s_current(&case.params, &case.phi, tol) {
        Ok(r) if case.expect_nonexistence => Err(RunError::Reproduction(format!(
            "{}: nonexistence expected but the S-transform evaluated to {:?}",
            context(),
            r.value
        ))),
        Ok(r) => Ok(Some(r)),
        Err(hidacur_core::Error::Nonexistence { .. }) if case.expect_nonexistence => Ok(None),
        Err(e) => Err(RunError::from_core(context(), e)),
    }
}

fn stransform(cfg: &ExperimentConfig, s: &StransformConfig) -> Result<Outcome, RunError> {
    let cases = cases_of(cfg, &s.cases)?;
    let mut records = Vec::with_capacity(cases.len());
    let mut table = Table::new("values", &["case", "d", "component", "status", "value", "abs_error"]);
    for (k, case) in cases.iter().enumerate() {
        let record = match current_or_expected(case, k, s.tol)? {
            Some(r) => StransformRecord {
                params: case.params.clone(),
                phi_ref: case.phi_ref.clone(),
                value: r.value,
                abs_error: r.abs_error,
                tol: s.tol,
                node_count: r.node_count,
                status: Status::Finite,
            },
            None => StransformRecord {
                params: case.params.clone(),
                phi_ref: case.phi_ref.clone(),
                value: Vec::new(),
                abs_error: Vec::new(),
                tol: s.tol,
                node_count: 0,
                status: Status::Nonexistence,
            },
        };
        if record.status == Status::Nonexistence {
            table.push([k.to_string(), case.params.dimension().to_string(), String::new(), "nonexistence".into(), String::new(), String::new()]);
        }
        for (i, (v, e)) in record.value.iter().zip(&record.abs_error).enumerate() {
            table.push([k.to_string(), case.params.dimension().to_string(), i.to_string(), "finite".into(), num(*v), num(*e)]);
        }
        records.push(record);
    }
    let report = StransformReport {
        finite: records.iter().filter(|r| r.status == Status::Finite).count(),
        nonexistence: records.iter().filter(|r| r.status == Status::Nonexistence).count(),
        max_abs_error: max_of(records.iter().flat_map(|r| r.abs_error.iter().copied())),
        records,
    };
    Ok(Outcome {
        report: Report::Stransform(report),
        tables: vec![table],
    })
}

// ----------------------------------------------------------------- mollified

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifiedRow {
    pub eps2: f64,
    pub value: Vec<f64>,
    pub abs_error: Vec<f64>,
    /// Largest componentwise distance to the unmollified value, when it exists.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifiedRecord {
    pub params: CurrentParams,
    pub phi_ref: PhiRef,
    pub tol: f64,
    pub rows: Vec<MollifiedRow>,
    pub unmollified: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifiedReport {
    pub records: Vec<MollifiedRecord>,
}

fn mollified(cfg: &ExperimentConfig, s: &MollifiedConfig) -> Result<Outcome, RunError> {
    let cases = cases_of(cfg, &s.cases)?;
    let mut records = Vec::with_capacity(cases.len());
    let mut table = Table::new("values", &["case", "eps2", "component", "value", "unmollified"]);
    for (k, case) in cases.iter().enumerate() {
        let context = || format!("case {k}");
        let unmollified = if case.params.exists() {
            Some(s_current(&case.params, &case.phi, s.tol).map_err(|e| RunError::from_core(context(), e))?.value)
        } else {
            None
        };
        let mut rows = Vec::with_capacity(s.eps2.len());
        for &eps2 in &s.eps2 {
            let r = s_current_mollified(&case.params, &case.phi, eps2, s.tol)
                .map_err(|e| RunError::from_core(format!("{} at eps2 = {eps2}", context()), e))?;
            for (i, v) in r.value.iter().enumerate() {
                let reference = unmollified.as_ref().map_or(String::new(), |u| num(u[i]));
                table.push([k.to_string(), num(eps2), i.to_string(), num(*v), reference]);
            }
            let gap = unmollified
                .as_ref()
                .map(|u| max_of(u.iter().zip(&r.value).map(|(a, b)| (a - b).abs())));
            rows.push(MollifiedRow {
                eps2,
                value: r.value,
                abs_error: r.abs_error,
                gap,
            });
        }
        records.push(MollifiedRecord {
            params: case.params.clone(),
            phi_ref: case.phi_ref.clone(),
            tol: s.tol,
            rows,
            unmollified,
        });
    }
    Ok(Outcome {
        report: Report::Mollified(MollifiedReport { records }),
        tables: vec![table],
    })
}

// --------------------------------------------------------------------- chaos

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosComponent {
    pub component: usize,
    pub extracted: Vec<ChaosPairing>,
    pub first_closed: f64,
    pub second_derivative_convention: f64,
    pub second_paper_convention: f64,
    /// Extracted second-order pairing over the `Convention::Paper` value.
    pub ratio_to_paper_convention: Option<f64>,
}

impl ChaosComponent {
    pub fn extracted(&self, order: usize) -> Option<&ChaosPairing> {
        self.extracted.iter().find(|p| p.order == order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosRecord {
    pub params: CurrentParams,
    pub phi_ref: PhiRef,
    pub tol: f64,
    pub components: Vec<ChaosComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosReport {
    pub records: Vec<ChaosRecord>,
    pub max_order0: Option<f64>,
    pub max_first_gap: Option<f64>,
    pub max_second_gap: Option<f64>,
    /// Range of the measured ratio to the `Convention::Paper` value.
    pub ratio_range: Option<[f64; 2]>,
}

fn chaos(cfg: &ExperimentConfig, s: &ChaosConfig) -> Result<Outcome, RunError> {
    let cases = cases_of(cfg, &s.cases)?;
    let mut records = Vec::with_capacity(cases.len());
    let mut table = Table::new(
        "pairings",
        &["case", "component", "order", "extracted", "error_estimate", "closed", "paper_convention"],
    );
    for (k, case) in cases.iter().enumerate() {
        let context = |what: &str| format!("case {k}: {what}");
        let mut components = Vec::new();
        for i in 0..case.params.dimension() {
            let f = UFunctional::current(case.params.clone(), i, s.tol)
                .map_err(|e| RunError::from_core(context("current"), e))?;
            let first = first_chaos_pairing_closed(&case.params, &case.phi, i, s.tol)
                .map_err(|e| RunError::from_core(context("first chaos"), e))?
                .value;
            let second = |c| {
                second_chaos_pairing_closed(&case.params, &case.phi, i, c, s.tol)
                    .map(|r| r.value)
                    .map_err(|e| RunError::from_core(context("second chaos"), e))
            };
            let second_derivative = second(Convention::Derivative)?;
            let second_paper = second(Convention::Paper)?;
            let mut extracted = Vec::new();
            for &n in &s.orders {
                let p = extract_chaos_pairing(&f, &case.phi, n)
                    .map_err(|e| RunError::from_core(context(&format!("order-{n} extraction")), e))?;
                let (closed, paper) = match n {
                    0 => (0.0, String::new()),
                    1 => (first, String::new()),
                    _ => (second_derivative, num(second_paper)),
                };
                table.push([k.to_string(), i.to_string(), n.to_string(), num(p.value), num(p.error_estimate), num(closed), paper]);
                extracted.push(p);
            }
            let ratio = extracted
                .iter()
                .find(|p| p.order == 2)
                .filter(|_| second_paper != 0.0)
                .map(|p| p.value / second_paper);
            components.push(ChaosComponent {
                component: i,
                extracted,
                first_closed: first,
                second_derivative_convention: second_derivative,
                second_paper_convention: second_paper,
                ratio_to_paper_convention: ratio,
            });
        }
        records.push(ChaosRecord {
            params: case.params.clone(),
            phi_ref: case.phi_ref.clone(),
            tol: s.tol,
            components,
        });
    }
    let all = || records.iter().flat_map(|r| r.components.iter());
    let gaps = |order: usize, closed: fn(&ChaosComponent) -> f64| {
        let v: Vec<f64> = all()
            .filter_map(|c| c.extracted(order).map(|p| (p.value - closed(c)).abs()))
            .collect();
        (!v.is_empty()).then(|| max_of(v))
    };
    let ratios: Vec<f64> = all().filter_map(|c| c.ratio_to_paper_convention).collect();
    let report = ChaosReport {
        max_order0: gaps(0, |_| 0.0),
        max_first_gap: gaps(1, |c| c.first_closed),
        max_second_gap: gaps(2, |c| c.second_derivative_convention),
        ratio_range: (!ratios.is_empty()).then(|| {
            [
                ratios.iter().copied().fold(f64::INFINITY, f64::min),
                ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ]
        }),
        records,
    };
    Ok(Outcome {
        report: Report::Chaos(report),
        tables: vec![table],
    })
}

// ------------------------------------------------------------------------ mc

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRecord {
    pub phi_ref: PhiRef,
    pub estimate: MCEstimate,
    pub closed: Vec<f64>,
    /// `(mc - closed) / stderr` per component.
    pub z: Vec<f64>,
    /// `stderr / |closed|` where `|closed|` exceeds [`MC_RELATIVE_FLOOR`].
    pub relative_stderr: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_bias: Option<GridBias>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Determinism {
    pub thread_counts: Vec<usize>,
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub records: Vec<McRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinism: Option<Determinism>,
}

/// The Monte Carlo grid of `s`: one run per `(point, eps2)`.
pub fn mc_grid(cfg: &ExperimentConfig, s: &McExperimentConfig) -> Result<Vec<(MCConfig, TestFunction, PhiRef)>, RunError> {
    let mut grid = Vec::new();
    for (k, point) in s.points.iter().enumerate() {
        let params = CurrentParams::new(point.x.clone(), point.horizon)
            .map_err(|e| RunError::Config(format!("point {k}: {e}")))?;
        let phi = point.phi.resolve(&cfg.base_dir)?;
        if phi.dimension() != params.dimension() {
            return Err(RunError::Config(format!("point {k}: phi dimension does not match x")));
        }
        let phi_ref = match &point.phi {
            crate::config::PhiSpec::File { file } => PhiRef::File {
                file: file.display().to_string(),
            },
            crate::config::PhiSpec::Inline(_) => PhiRef::Inline(phi.clone()),
        };
        for &eps2 in &point.eps2 {
            let mc = MCConfig::new(params.clone(), s.paths, s.steps, eps2, cfg.seed)
                .map_err(|e| RunError::Config(format!("point {k}: {e}")))?;
            grid.push((mc, phi.clone(), phi_ref.clone()));
        }
    }
    Ok(grid)
}

/// Runs the grid with `threads` workers. Returns the records and the block
/// statistics' partial merges as a CSV table.
pub fn mc_records(
    cfg: &ExperimentConfig,
    s: &McExperimentConfig,
    threads: usize,
) -> Result<(Vec<McRecord>, Table), RunError> {
    let mut records = Vec::new();
    let mut table = Table::new("blocks", &["run", "block", "paths", "component", "mean", "stderr"]);
    for (run, (mc, phi, phi_ref)) in mc_grid(cfg, s)?.into_iter().enumerate() {
        let context = || format!("run {run} (x = {:?}, eps2 = {})", mc.params().x(), mc.eps2());
        let est = if s.grid_bias {
            Estimator::with_coarse_grid(&mc, &phi)
        } else {
            Estimator::new(&mc, &phi)
        }
        .map_err(|e| RunError::from_core(context(), e))?;
        let blocks = parallel::run_blocks(&est, threads);
        for (b, partial) in parallel::partial_merges(&blocks).iter().enumerate() {
            let e = est.finish(partial, 0);
            for (i, (m, se)) in e.mean.iter().zip(&e.stderr).enumerate() {
                table.push([run.to_string(), b.to_string(), e.paths.to_string(), i.to_string(), num(*m), num(*se)]);
            }
        }
        let total = parallel::total(&blocks);
        let estimate = est.finish(&total, 0);
        let grid_bias = s.grid_bias.then(|| grid_bias_from(&est, &total));
        let closed = s_current_mollified(mc.params(), &phi, mc.eps2(), s.tol)
            .map_err(|e| RunError::from_core(context(), e))?
            .value;
        let z = estimate
            .mean
            .iter()
            .zip(&estimate.stderr)
            .zip(&closed)
            .map(|((m, se), c)| (m - c) / se)
            .collect();
        let relative_stderr = estimate
            .stderr
            .iter()
            .zip(&closed)
            .map(|(se, c)| (c.abs() > MC_RELATIVE_FLOOR).then(|| se / c.abs()))
            .collect();
        records.push(McRecord {
            phi_ref,
            estimate,
            closed,
            z,
            relative_stderr,
            grid_bias,
        });
    }
    Ok((records, table))
}

fn mc(cfg: &ExperimentConfig, s: &McExperimentConfig, threads: usize) -> Result<Outcome, RunError> {
    if s.thread_counts.is_empty() {
        let (records, table) = mc_records(cfg, s, threads)?;
        return Ok(Outcome {
            report: Report::Mc(McReport {
                records,
                determinism: None,
            }),
            tables: vec![table],
        });
    }
    let mut first: Option<(Vec<McRecord>, Table)> = None;
    let mut identical = true;
    for &t in &s.thread_counts {
        let (records, table) = mc_records(cfg, s, t)?;
        match &first {
            None => first = Some((records, table)),
            Some((reference, _)) => identical &= same_estimates(reference, &records),
        }
    }
    let (records, table) = first.expect("thread_counts is non-empty");
    Ok(Outcome {
        report: Report::Mc(McReport {
            records,
            determinism: Some(Determinism {
                thread_counts: s.thread_counts.clone(),
                identical,
            }),
        }),
        tables: vec![table],
    })
}

/// Bitwise equality of the serialized estimates.
pub fn same_estimates(a: &[McRecord], b: &[McRecord]) -> bool {
    let body = |r: &[McRecord]| {
        let estimates: Vec<&MCEstimate> = r.iter().map(|x| &x.estimate).collect();
        serde_json::to_string(&estimates).expect("estimates serialize")
    };
    let bits = |r: &[McRecord]| -> Vec<u64> {
        r.iter()
            .flat_map(|x| x.estimate.mean.iter().chain(&x.estimate.stderr).map(|v| v.to_bits()))
            .collect()
    };
    body(a) == body(b) && bits(a) == bits(b)
}

// ------------------------------------------------------------------- diverge

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Probe {
    /// The S-transform at the origin is finite.
    Finite { value: Vec<f64> },
    /// The S-transform at the origin was refused: the negative result.
    Nonexistence { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergeRecord {
    pub report: DivergenceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergeReport {
    pub records: Vec<DivergeRecord>,
}

fn diverge(s: &DivergeConfig) -> Result<Outcome, RunError> {
    let cutoffs = s.cutoffs.clone().unwrap_or_else(|| default_cutoffs(s.horizon));
    let mut records = Vec::new();
    let mut table = Table::new("masses", &["d", "delta", "mass"]);
    for &d in &s.dims {
        let report = divergence_scan(d, s.horizon, &cutoffs).map_err(|e| match e {
            hidacur_core::Error::MalformedGrid(m) => RunError::Config(format!("cutoff grid: {m}")),
            e => RunError::from_core(format!("d = {d}"), e),
        })?;
        for (delta, mass) in report.points() {
            table.push([d.to_string(), num(delta), num(mass)]);
        }
        let probe = if s.probe_current {
            let params = CurrentParams::new(vec![0.0; d], s.horizon)
                .map_err(|e| RunError::Config(e.to_string()))?;
            let phi = TestFunction::single(d, 0, 0, 1.0).map_err(|e| RunError::Config(e.to_string()))?;
            let probe = match s_current(&params, &phi, 1e-10) {
                Ok(r) => Probe::Finite { value: r.value },
                Err(e @ hidacur_core::Error::Nonexistence { .. }) => Probe::Nonexistence {
                    message: e.to_string(),
                },
                Err(e) => return Err(RunError::from_core(format!("origin probe, d = {d}"), e)),
            };
            let finite = matches!(probe, Probe::Finite { .. });
            let convergent = report.limit.is_some();
            if finite != convergent {
                return Err(RunError::Reproduction(format!(
                    "d = {d}: mass verdict {:?} contradicts the origin probe",
                    report.verdict
                )));
            }
            Some(probe)
        } else {
            None
        };
        records.push(DivergeRecord { report, probe });
    }
    Ok(Outcome {
        report: Report::Diverge(DivergeReport { records }),
        tables: vec![table],
    })
}

impl DivergeRecord {
    pub fn is_logarithmic(&self) -> bool {
        self.report.model.kind == ModelKind::Logarithmic
    }
}

// --------------------------------------------------------------- gamma-check

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRow {
    pub d: usize,
    pub x_norm: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub closed: f64,
    pub quadrature: f64,
    pub abs_error_estimate: f64,
    pub node_count: usize,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaCheckReport {
    pub rows: Vec<GammaRow>,
    pub max_rel_error: f64,
}

fn gamma_check(s: &GammaCheckConfig) -> Result<Outcome, RunError> {
    let mut rows = Vec::new();
    let mut table = Table::new("masses", &["d", "x_norm", "T", "closed", "quadrature", "rel_error"]);
    for &d in &s.dims {
        for &r in &s.x_norms {
            for &horizon in &s.horizons {
                let context = || format!("d = {d}, |x| = {r}, T = {horizon}");
                let closed = singular_mass_closed(d, r, horizon).map_err(|e| RunError::from_core(context(), e))?;
                let damping = r * r / 2.0;
                let exponent = -0.5 * d as f64;
                let q = integrate_singular(
                    |t: f64| t.powf(exponent) * (-damping / t).exp(),
                    horizon,
                    Singularity::damped(exponent, damping),
                    QuadOptions::with_tol(s.tol * closed.abs()),
                )
                .map_err(|e| RunError::from_core(context(), e))?;
                let rel_error = (q.value - closed).abs() / closed.abs();
                table.push([d.to_string(), num(r), num(horizon), num(closed), num(q.value), num(rel_error)]);
                rows.push(GammaRow {
                    d,
                    x_norm: r,
                    horizon,
                    closed,
                    quadrature: q.value,
                    abs_error_estimate: q.abs_error_estimate,
                    node_count: q.node_count,
                    rel_error,
                });
            }
        }
    }
    let max_rel_error = max_of(rows.iter().map(|r| r.rel_error));
    Ok(Outcome {
        report: Report::GammaCheck(GammaCheckReport { rows, max_rel_error }),
        tables: vec![table],
    })
}

// -------------------------------------------------------------------- ubound

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UboundRecord {
    pub x: Vec<f64>,
    pub t: f64,
    pub phi_ref: PhiRef,
    pub donsker: BoundFit,
    /// One fit per component of the time integrand of the current.
    pub integrand: Vec<BoundFit>,
    /// Proof-chain evaluations where some bound fell below its predecessor.
    pub chain_violations: usize,
    pub chain_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UboundReport {
    pub records: Vec<UboundRecord>,
    pub max_c2_donsker: f64,
    pub max_c2_integrand: f64,
    pub chain_violations: usize,
}

/// Relative slack allowed between consecutive proof-chain bounds.
const CHAIN_SLACK: f64 = 1e-12;

fn ubound(cfg: &ExperimentConfig, s: &UboundConfig) -> Result<Outcome, RunError> {
    let cases = cases_of(cfg, &s.cases)?;
    let mut records = Vec::with_capacity(cases.len());
    let mut table = Table::new("fits", &["case", "functional", "component", "c1", "c2"]);
    for (k, case) in cases.iter().enumerate() {
        let context = |what: &str| format!("case {k}: {what}");
        let x = case.params.x().to_vec();
        let t = case.params.horizon();
        let donsker = fit_ufunctional_bound(&UFunctional::donsker(x.clone(), t), &case.phi, &s.radii, s.angles)
            .map_err(|e| RunError::from_core(context("Donsker fit"), e))?;
        table.push([k.to_string(), "donsker".into(), String::new(), num(donsker.c1), num(donsker.c2)]);
        let mut integrand = Vec::new();
        let mut violations = 0;
        let mut evaluations = 0;
        for i in 0..x.len() {
            let xi = x.clone();
            let f = UFunctional::new(format!("integrand_{i}"), move |z, phi| {
                s_current_integrand(&xi, t, phi, z, i)
            });
            let fit = fit_ufunctional_bound(&f, &case.phi, &s.radii, s.angles)
                .map_err(|e| RunError::from_core(context("integrand fit"), e))?;
            table.push([k.to_string(), "integrand".into(), i.to_string(), num(fit.c1), num(fit.c2)]);
            integrand.push(fit);
            for &r in &s.radii {
                for a in 0..s.angles {
                    let theta = 2.0 * std::f64::consts::PI * a as f64 / s.angles as f64;
                    let z = Complex64::from_polar(r, theta);
                    let chain = proof_chain(&x, t, &case.phi, z, i)
                        .map_err(|e| RunError::from_core(context("proof chain"), e))?;
                    evaluations += 1;
                    let b = chain.log_bounds;
                    // A vanishing value (log = -inf) is trivially bounded.
                    if b.windows(2).any(|w| w[1] < w[0] - CHAIN_SLACK * w[0].abs().max(1.0)) {
                        violations += 1;
                    }
                }
            }
        }
        records.push(UboundRecord {
            x,
            t,
            phi_ref: case.phi_ref.clone(),
            donsker,
            integrand,
            chain_violations: violations,
            chain_evaluations: evaluations,
        });
    }
    let report = UboundReport {
        max_c2_donsker: max_of(records.iter().map(|r| r.donsker.c2)),
        max_c2_integrand: max_of(records.iter().flat_map(|r| r.integrand.iter().map(|f| f.c2))),
        chain_violations: records.iter().map(|r| r.chain_violations).sum(),
        records,
    };
    Ok(Outcome {
        report: Report::Ubound(report),
        tables: vec![table],
    })
}
