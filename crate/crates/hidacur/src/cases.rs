//! Concrete instances from case specifications.

use std::path::Path;

use hidacur_core::rng::PathStream;
use hidacur_core::{CurrentParams, TestFunction};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{CaseSpec, PhiSpec, RandomCases};
use crate::RunError;

/// Where a test function came from, as echoed in result records.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PhiRef {
    File { file: String },
    Inline(TestFunction),
}

#[derive(Debug, Clone)]
pub struct Case {
    pub params: CurrentParams,
    pub phi: TestFunction,
    pub phi_ref: PhiRef,
    pub expect_nonexistence: bool,
}

/// Expands `specs` in order. Random set `k` draws from the stream
/// `(seed, k)`, so adding a set never changes the draws of another.
pub fn expand(specs: &[CaseSpec], seed: u64, base: &Path) -> Result<Vec<Case>, RunError> {
    let mut out = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        match spec {
            CaseSpec::Explicit(e) => {
                let params = CurrentParams::new(e.x.clone(), e.horizon)
                    .map_err(|err| RunError::Config(format!("case {k}: {err}")))?;
                let phi = e.phi.resolve(base)?;
                if phi.dimension() != params.dimension() {
                    return Err(RunError::Config(format!(
                        "case {k}: x has dimension {} but phi has {}",
                        params.dimension(),
                        phi.dimension()
                    )));
                }
                out.push(Case {
                    params,
                    phi_ref: phi_ref(&e.phi, &phi),
                    phi,
                    expect_nonexistence: e.expect_nonexistence,
                });
            }
            CaseSpec::Random(r) => {
                let mut rng = PathStream::new(seed, k as u64);
                for _ in 0..r.count {
                    out.push(draw(r, &mut rng)?);
                }
            }
        }
    }
    Ok(out)
}

fn phi_ref(spec: &PhiSpec, phi: &TestFunction) -> PhiRef {
    match spec {
        PhiSpec::File { file } => PhiRef::File {
            file: file.display().to_string(),
        },
        PhiSpec::Inline(_) => PhiRef::Inline(phi.clone()),
    }
}

fn draw(r: &RandomCases, rng: &mut PathStream) -> Result<Case, RunError> {
    let d = r.dims[rng.random_range(0..r.dims.len())];
    let x = if r.origin {
        vec![0.0; d]
    } else {
        let radius = uniform(rng, r.x_norm);
        loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-8 {
                break v.into_iter().map(|a| radius * a / n).collect();
            }
        }
    };
    let horizon = uniform(rng, r.horizon);
    let params = CurrentParams::new(x, horizon).map_err(|e| RunError::Config(e.to_string()))?;
    let phi = TestFunction::random(rng, d, r.coefficients, r.phi_scale)
        .map_err(|e| RunError::Config(e.to_string()))?;
    Ok(Case {
        params,
        phi_ref: PhiRef::Inline(phi.clone()),
        phi,
        expect_nonexistence: r.expect_nonexistence,
    })
}

fn uniform(rng: &mut PathStream, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}
