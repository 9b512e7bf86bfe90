//! Monte Carlo S-transform of the mollified current.
//!
//! A path is `M` Gaussian increments per coordinate on the uniform grid of
//! `[0, T]`, drawn from the [`PathStream`] of `(seed, path)`. The mollified
//! current is the Ito sum
//!
//! ```text
//! F_i = sum_k p_eps2(x - B(t_k)) (B_i(t_{k+1}) - B_i(t_k))
//! ```
//!
//! and `S F(phi) = E[F exp(<w, phi> - |phi|^2 / 2)]`. Only `phi` on `[0, T]`
//! interacts with `F`; the rest of the Wiener integral is independent of it
//! and its exponential has mean one, so it is left out. On `[0, T]` the
//! pairing is `X = sum_k phibar_k . dB_k` with `phibar_k` the cell averages of
//! `phi`, normalised by its exact variance `V = dt sum_k |phibar_k|^2`.
//!
//! Paths are processed in blocks of [`BLOCK_PATHS`]; block statistics are
//! merged in a fixed binary tree so that the result does not depend on which
//! thread computed which block.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::math::{exp, gaussian_normalizer, sqrt};
use crate::rng::PathStream;
use crate::schwartz::TestFunction;
use crate::stransform::CurrentParams;
use crate::{Error, Result};

/// Paths per block; part of the reproducibility contract.
pub const BLOCK_PATHS: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "MCConfigRepr", into = "MCConfigRepr")
)]
pub struct MCConfig {
    params: CurrentParams,
    paths: u64,
    steps: usize,
    eps2: f64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct MCConfigRepr {
    pub x: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(rename = "T"))]
    pub horizon: f64,
    pub paths: u64,
    pub steps: usize,
    pub eps2: f64,
    pub seed: u64,
}

impl TryFrom<MCConfigRepr> for MCConfig {
    type Error = Error;

    fn try_from(r: MCConfigRepr) -> Result<Self> {
        MCConfig::new(CurrentParams::new(r.x, r.horizon)?, r.paths, r.steps, r.eps2, r.seed)
    }
}

impl From<MCConfig> for MCConfigRepr {
    fn from(c: MCConfig) -> Self {
        MCConfigRepr {
            x: c.params.x().to_vec(),
            horizon: c.params.horizon(),
            paths: c.paths,
            steps: c.steps,
            eps2: c.eps2,
            seed: c.seed,
        }
    }
}

impl MCConfig {
    pub fn new(params: CurrentParams, paths: u64, steps: usize, eps2: f64, seed: u64) -> Result<Self> {
        if paths == 0 || steps == 0 {
            return Err(Error::InvalidParams("paths and steps must be at least 1".into()));
        }
        if !(eps2 > 0.0) || !eps2.is_finite() {
            return Err(Error::Domain {
                what: "eps2",
                requirement: "finite and > 0",
                value: eps2,
            });
        }
        Ok(MCConfig {
            params,
            paths,
            steps,
            eps2,
            seed,
        })
    }

    pub fn params(&self) -> &CurrentParams {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.params.dimension()
    }

    pub fn paths(&self) -> u64 {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.params.horizon() / self.steps as f64
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        MCConfig { seed, ..self.clone() }
    }

    pub fn with_paths(&self, paths: u64) -> Self {
        MCConfig { paths, ..self.clone() }
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        MCConfig { steps, ..self.clone() }
    }

    pub fn block_count(&self) -> u64 {
        self.paths.div_ceil(BLOCK_PATHS)
    }

    /// Global path indices of block `b`.
    pub fn block_range(&self, b: u64) -> core::ops::Range<u64> {
        let start = b * BLOCK_PATHS;
        start.min(self.paths)..(start + BLOCK_PATHS).min(self.paths)
    }
}

/// Fills `out` (length `steps * d`, step-major) with the increments of `path`.
pub fn simulate_increments(cfg: &MCConfig, path: u64, out: &mut [f64]) {
    let sd = sqrt(cfg.dt());
    let mut rng = PathStream::new(cfg.seed, path);
    for v in out.iter_mut().take(cfg.steps * cfg.dimension()) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = sd * z;
    }
}

/// The Ito sum `sum_k p_eps2(x - B(t_k)) dB_k` for step-major increments.
pub fn mollified_current_sample(cfg: &MCConfig, increments: &[f64], out: &mut [f64]) {
    let d = cfg.dimension();
    let x = cfg.params.x();
    let norm = gaussian_normalizer(cfg.eps2, d);
    let inv = 0.5 / cfg.eps2;
    let mut b = vec![0.0; d];
    out[..d].fill(0.0);
    for dbk in increments.chunks_exact(d).take(cfg.steps) {
        let r2: f64 = x.iter().zip(&b).map(|(xj, bj)| (xj - bj) * (xj - bj)).sum();
        let p = norm * exp(-r2 * inv);
        for j in 0..d {
            out[j] += p * dbk[j];
            b[j] += dbk[j];
        }
    }
}

#[inline(never)]
fn standard_normal(rng: &mut PathStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Streaming moments of one block, or of a merge of blocks.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockStats {
    pub count: u64,
    /// Running means, `d` entries per series.
    pub mean: Vec<f64>,
    /// Sums of squared deviations, same layout as `mean`.
    pub m2: Vec<f64>,
    pub weight_sum: f64,
    pub weight_sq_sum: f64,
}

impl BlockStats {
    fn empty(len: usize) -> Self {
        BlockStats {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
            weight_sum: 0.0,
            weight_sq_sum: 0.0,
        }
    }

    fn push(&mut self, values: &[f64], weight: f64) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
        self.weight_sum += weight;
        self.weight_sq_sum += weight * weight;
    }

    /// Chan's parallel update.
    pub fn merge(&self, other: &BlockStats) -> BlockStats {
        if self.count == 0 {
            return other.clone();
        }
        if other.count == 0 {
            return self.clone();
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let mut out = BlockStats::empty(self.mean.len());
        out.count = self.count + other.count;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            out.mean[k] = self.mean[k] + delta * nb / n;
            out.m2[k] = self.m2[k] + other.m2[k] + delta * delta * na * nb / n;
        }
        out.weight_sum = self.weight_sum + other.weight_sum;
        out.weight_sq_sum = self.weight_sq_sum + other.weight_sq_sum;
        out
    }
}

/// Merges block statistics pairwise in index order: `((b0 b1) (b2 b3)) ...`.
pub fn combine(blocks: &[BlockStats]) -> Option<BlockStats> {
    match blocks.len() {
        0 => None,
        1 => Some(blocks[0].clone()),
        n => {
            let half = n.next_power_of_two() / 2;
            let left = combine(&blocks[..half])?;
            let right = combine(&blocks[half..])?;
            Some(left.merge(&right))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MCEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub paths: u64,
    /// Kish effective sample size of the exponential weights.
    pub n_effective: u64,
    pub config: MCConfig,
}

/// Estimates on the fine grid and on the grid with every other point removed,
/// computed from the same paths.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridBias {
    pub fine: MCEstimate,
    pub coarse: MCEstimate,
    pub difference: Vec<f64>,
}

/// Per-configuration tables shared by all paths.
#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: MCConfig,
    phibar: Vec<f64>,
    phibar_coarse: Vec<f64>,
    variance: f64,
    variance_coarse: f64,
    coarse: bool,
}

impl Estimator {
    pub fn new(cfg: &MCConfig, phi: &TestFunction) -> Result<Self> {
        Self::build(cfg, phi, false)
    }

    /// Also tracks the estimate on half the steps; `steps` must be even.
    pub fn with_coarse_grid(cfg: &MCConfig, phi: &TestFunction) -> Result<Self> {
        if cfg.steps % 2 != 0 {
            return Err(Error::InvalidParams("coarsening needs an even step count".into()));
        }
        Self::build(cfg, phi, true)
    }

    fn build(cfg: &MCConfig, phi: &TestFunction, coarse: bool) -> Result<Self> {
        let d = cfg.dimension();
        if phi.dimension() != d {
            return Err(Error::InvalidParams("test function dimension mismatch".into()));
        }
        let dt = cfg.dt();
        let m = cfg.steps;
        let mut cums = vec![0.0; (m + 1) * d];
        for k in 0..=m {
            let t = k as f64 * dt;
            for i in 0..d {
                cums[k * d + i] = phi.cumulative(t, i)?;
            }
        }
        let mut phibar = vec![0.0; m * d];
        for k in 0..m {
            for i in 0..d {
                phibar[k * d + i] = (cums[(k + 1) * d + i] - cums[k * d + i]) / dt;
            }
        }
        let variance = phibar.iter().map(|v| v * v).sum::<f64>() * dt;
        let (phibar_coarse, variance_coarse) = if coarse {
            let pc: Vec<f64> = (0..m / 2)
                .flat_map(|k| {
                    let phibar = &phibar;
                    (0..d).map(move |i| 0.5 * (phibar[2 * k * d + i] + phibar[(2 * k + 1) * d + i]))
                })
                .collect();
            let vc = pc.iter().map(|v| v * v).sum::<f64>() * 2.0 * dt;
            (pc, vc)
        } else {
            (Vec::new(), 0.0)
        };
        Ok(Estimator {
            cfg: cfg.clone(),
            phibar,
            phibar_coarse,
            variance,
            variance_coarse,
            coarse,
        })
    }

    pub fn config(&self) -> &MCConfig {
        &self.cfg
    }

    fn series(&self) -> usize {
        if self.coarse {
            2
        } else {
            1
        }
    }

    /// Weighted samples `F_i W` of one path, fine grid first.
    fn path_sample(&self, path: u64, b: &mut [f64], out: &mut [f64]) -> f64 {
        let cfg = &self.cfg;
        let d = cfg.dimension();
        let x = cfg.params.x();
        let sd = sqrt(cfg.dt());
        let norm = gaussian_normalizer(cfg.eps2, d);
        let inv = 0.5 / cfg.eps2;
        let mut rng = PathStream::new(cfg.seed, path);

        b.fill(0.0);
        out.fill(0.0);
        let (fine, rest) = out.split_at_mut(d);
        let mut pairing = 0.0;
        let mut pairing_coarse = 0.0;
        let mut p_even = 0.0;
        let mut db_even = [0.0f64; 8];
        let mut db_buf = vec![];
        let db_even: &mut [f64] = if d <= 8 {
            &mut db_even[..d]
        } else {
            db_buf.resize(d, 0.0);
            &mut db_buf
        };

        for k in 0..cfg.steps {
            let r2: f64 = x.iter().zip(b.iter()).map(|(xj, bj)| (xj - bj) * (xj - bj)).sum();
            let p = norm * exp(-r2 * inv);
            let phik = &self.phibar[k * d..(k + 1) * d];
            let odd = k % 2 == 1;
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let db = sd * z;
                fine[j] += p * db;
                pairing += phik[j] * db;
                b[j] += db;
                if self.coarse {
                    if odd {
                        let dbc = db_even[j] + db;
                        rest[j] += p_even * dbc;
                        pairing_coarse += self.phibar_coarse[(k / 2) * d + j] * dbc;
                    } else {
                        db_even[j] = db;
                    }
                }
            }
            if !odd {
                p_even = p;
            }
        }
        let weight = exp(pairing - 0.5 * self.variance);
        for v in fine.iter_mut() {
            *v *= weight;
        }
        if self.coarse {
            let wc = exp(pairing_coarse - 0.5 * self.variance_coarse);
            for v in rest.iter_mut() {
                *v *= wc;
            }
        }
        weight
    }

    /// [`Self::path_sample`] with the dimension and the coarse flag fixed at
    /// compile time; the arithmetic is identical.
    fn path_sample_fixed<const D: usize, const COARSE: bool>(&self, path: u64, out: &mut [f64]) -> f64 {
        let cfg = &self.cfg;
        let mut x = [0.0; D];
        x.copy_from_slice(cfg.params.x());
        let sd = sqrt(cfg.dt());
        let norm = gaussian_normalizer(cfg.eps2, D);
        let inv = 0.5 / cfg.eps2;
        let mut rng = PathStream::new(cfg.seed, path);

        let mut b = [0.0; D];
        let mut fine = [0.0; D];
        let mut rest = [0.0; D];
        let mut db_even = [0.0; D];
        let mut pairing = 0.0;
        let mut pairing_coarse = 0.0;
        let mut p_even = 0.0;
        for k in 0..cfg.steps {
            let mut r2 = 0.0;
            for j in 0..D {
                r2 += (x[j] - b[j]) * (x[j] - b[j]);
            }
            let p = norm * exp(-r2 * inv);
            let phik = &self.phibar[k * D..(k + 1) * D];
            let odd = k % 2 == 1;
            for j in 0..D {
                let db = sd * standard_normal(&mut rng);
                fine[j] += p * db;
                pairing += phik[j] * db;
                b[j] += db;
                if COARSE {
                    if odd {
                        let dbc = db_even[j] + db;
                        rest[j] += p_even * dbc;
                        pairing_coarse += self.phibar_coarse[(k / 2) * D + j] * dbc;
                    } else {
                        db_even[j] = db;
                    }
                }
            }
            if COARSE && !odd {
                p_even = p;
            }
        }
        let weight = exp(pairing - 0.5 * self.variance);
        for j in 0..D {
            out[j] = fine[j] * weight;
        }
        if COARSE {
            let wc = exp(pairing_coarse - 0.5 * self.variance_coarse);
            for j in 0..D {
                out[D + j] = rest[j] * wc;
            }
        }
        weight
    }

    fn run_block_fixed<const D: usize, const COARSE: bool>(&self, block: u64) -> BlockStats {
        let len = D * self.series();
        let mut stats = BlockStats::empty(len);
        let mut out = [0.0; 8];
        for path in self.cfg.block_range(block) {
            let w = self.path_sample_fixed::<D, COARSE>(path, &mut out);
            stats.push(&out[..len], w);
        }
        stats
    }

    /// Statistics of block `b`; see [`MCConfig::block_range`].
    pub fn run_block(&self, block: u64) -> BlockStats {
        match (self.cfg.dimension(), self.coarse) {
            (1, false) => self.run_block_fixed::<1, false>(block),
            (1, true) => self.run_block_fixed::<1, true>(block),
            (2, false) => self.run_block_fixed::<2, false>(block),
            (2, true) => self.run_block_fixed::<2, true>(block),
            (3, false) => self.run_block_fixed::<3, false>(block),
            (3, true) => self.run_block_fixed::<3, true>(block),
            (4, false) => self.run_block_fixed::<4, false>(block),
            (4, true) => self.run_block_fixed::<4, true>(block),
            _ => self.run_block_dynamic(block),
        }
    }

    fn run_block_dynamic(&self, block: u64) -> BlockStats {
        let d = self.cfg.dimension();
        let len = d * self.series();
        let mut stats = BlockStats::empty(len);
        let mut b = vec![0.0; d];
        let mut out = vec![0.0; len];
        for path in self.cfg.block_range(block) {
            let w = self.path_sample(path, &mut b, &mut out);
            stats.push(&out, w);
        }
        stats
    }

    pub fn run_blocks(&self) -> Vec<BlockStats> {
        (0..self.cfg.block_count()).map(|b| self.run_block(b)).collect()
    }

    /// Turns merged statistics into the estimate of series `0` (fine) or `1`
    /// (coarse).
    pub fn finish(&self, total: &BlockStats, series: usize) -> MCEstimate {
        let d = self.cfg.dimension();
        let n = total.count as f64;
        let range = series * d..(series + 1) * d;
        let mean = total.mean[range.clone()].to_vec();
        let stderr = total.m2[range]
            .iter()
            .map(|s| if total.count > 1 { sqrt(s / (n - 1.0) / n) } else { 0.0 })
            .collect();
        let ess = if total.weight_sq_sum > 0.0 {
            total.weight_sum * total.weight_sum / total.weight_sq_sum
        } else {
            0.0
        };
        let cfg = if series == 0 {
            self.cfg.clone()
        } else {
            self.cfg.with_steps(self.cfg.steps / 2)
        };
        MCEstimate {
            mean,
            stderr,
            paths: total.count,
            n_effective: ess as u64,
            config: cfg,
        }
    }
}

/// Serial estimate of the S-transform of the mollified current at `phi`.
pub fn mc_s_transform(cfg: &MCConfig, phi: &TestFunction) -> Result<MCEstimate> {
    let est = Estimator::new(cfg, phi)?;
    let total = combine(&est.run_blocks()).expect("at least one block");
    Ok(est.finish(&total, 0))
}

/// Serial fine/coarse comparison on shared paths.
pub fn grid_bias(cfg: &MCConfig, phi: &TestFunction) -> Result<GridBias> {
    let est = Estimator::with_coarse_grid(cfg, phi)?;
    let total = combine(&est.run_blocks()).expect("at least one block");
    Ok(grid_bias_from(&est, &total))
}

pub fn grid_bias_from(est: &Estimator, total: &BlockStats) -> GridBias {
    let fine = est.finish(total, 0);
    let coarse = est.finish(total, 1);
    let difference = fine.mean.iter().zip(&coarse.mean).map(|(a, b)| a - b).collect();
    GridBias {
        fine,
        coarse,
        difference,
    }
}
