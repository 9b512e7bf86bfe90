//! Experiment configuration files.
//!
//! One JSON object per experiment. The experiment kind comes from the command
//! line; a `"kind"` field in the file is optional but must agree with it.
//! Relative file references are resolved against the directory of the config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hidacur_core::schwartz::TestFunctionRepr;
use hidacur_core::TestFunction;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Stransform,
    Mollified,
    Chaos,
    Mc,
    Diverge,
    GammaCheck,
    Ubound,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Stransform,
        Kind::Mollified,
        Kind::Chaos,
        Kind::Mc,
        Kind::Diverge,
        Kind::GammaCheck,
        Kind::Ubound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Stransform => "stransform",
            Kind::Mollified => "mollified",
            Kind::Chaos => "chaos",
            Kind::Mc => "mc",
            Kind::Diverge => "diverge",
            Kind::GammaCheck => "gamma-check",
            Kind::Ubound => "ubound",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| RunError::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// A test function given inline (`{"d": .., "components": ..}`) or as
/// `{"file": "path.json"}` holding the same object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    File { file: PathBuf },
    Inline(TestFunctionRepr),
}

impl PhiSpec {
    pub fn resolve(&self, base: &Path) -> Result<TestFunction, RunError> {
        match self {
            PhiSpec::Inline(repr) => TestFunction::try_from(repr.clone())
                .map_err(|e| RunError::Config(format!("inline test function: {e}"))),
            PhiSpec::File { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    RunError::Config(format!("cannot read test function {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    RunError::Config(format!("test function {}: {e}", path.display()))
                })
            }
        }
    }
}

fn default_true() -> bool {
    true
}

/// One explicitly given instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitCase {
    pub x: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub phi: PhiSpec,
    /// The instance is expected to hit the nonexistence signal.
    #[serde(default)]
    pub expect_nonexistence: bool,
}

/// `count` instances drawn from the config seed.
///
/// The dimension is uniform on `dims`, `x` has a uniform direction and a norm
/// uniform on `x_norm` (or is zero with `origin`), `T` is uniform on
/// `horizon`, and the test function has `coefficients` Hermite coefficients
/// per component, i.i.d. `N(0, phi_scale^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCases {
    pub count: usize,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub origin: bool,
    #[serde(default = "RandomCases::default_x_norm")]
    pub x_norm: [f64; 2],
    #[serde(default = "RandomCases::default_horizon")]
    pub horizon: [f64; 2],
    #[serde(default = "RandomCases::default_coefficients")]
    pub coefficients: usize,
    #[serde(default = "RandomCases::default_phi_scale")]
    pub phi_scale: f64,
    #[serde(default)]
    pub expect_nonexistence: bool,
}

impl RandomCases {
    fn default_x_norm() -> [f64; 2] {
        [0.3, 2.0]
    }
    fn default_horizon() -> [f64; 2] {
        [0.5, 2.0]
    }
    fn default_coefficients() -> usize {
        4
    }
    fn default_phi_scale() -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CaseSpec {
    Explicit(ExplicitCase),
    Random(RandomCases),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StransformConfig {
    pub cases: Vec<CaseSpec>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifiedConfig {
    pub cases: Vec<CaseSpec>,
    /// Mollifier variances, in the order they are tabulated.
    pub eps2: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    pub cases: Vec<CaseSpec>,
    /// Orders to extract numerically, each at most 2.
    pub orders: Vec<usize>,
    /// Quadrature tolerance of every S-transform evaluation.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McPoint {
    pub x: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub eps2: Vec<f64>,
    pub phi: PhiSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McExperimentConfig {
    pub points: Vec<McPoint>,
    pub paths: u64,
    pub steps: usize,
    /// Also estimate on the grid with every other step removed.
    #[serde(default)]
    pub grid_bias: bool,
    /// Run the whole grid once per entry, with that many worker threads, and
    /// compare the estimates bit for bit.
    #[serde(default)]
    pub thread_counts: Vec<usize>,
    /// Tolerance of the closed-form reference.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergeConfig {
    pub dims: Vec<usize>,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Defaults to `T 10^{-k/2}`, `k = 4..16`.
    #[serde(default)]
    pub cutoffs: Option<Vec<f64>>,
    /// Also ask for the S-transform at the origin and record the outcome.
    #[serde(default = "default_true")]
    pub probe_current: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaCheckConfig {
    pub dims: Vec<usize>,
    pub x_norms: Vec<f64>,
    pub horizons: Vec<f64>,
    /// Relative tolerance requested from the quadrature.
    #[serde(default = "GammaCheckConfig::default_tol")]
    pub tol: f64,
}

impl GammaCheckConfig {
    fn default_tol() -> f64 {
        1e-12
    }
}

/// Growth fits over sampled `(x, t, phi)`; the case horizon is the time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UboundConfig {
    pub cases: Vec<CaseSpec>,
    pub radii: Vec<f64>,
    pub angles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Settings {
    Stransform(StransformConfig),
    Mollified(MollifiedConfig),
    Chaos(ChaosConfig),
    Mc(McExperimentConfig),
    Diverge(DivergeConfig),
    GammaCheck(GammaCheckConfig),
    Ubound(UboundConfig),
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: Settings,
    /// Directory that relative references are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(kind: Kind, path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(kind, &text, base)
            .map_err(|e| match e {
                RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    pub fn parse(kind: Kind, text: &str, base_dir: PathBuf) -> Result<Self, RunError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        let serde_json::Value::Object(mut map) = value else {
            return Err(RunError::Config("config must be a JSON object".into()));
        };
        if let Some(k) = map.remove("kind") {
            let named = k
                .as_str()
                .ok_or_else(|| RunError::Config("\"kind\" must be a string".into()))?
                .parse::<Kind>()?;
            if named != kind {
                return Err(RunError::Config(format!(
                    "config is for {named}, but {kind} was requested"
                )));
            }
        }
        let seed = match map.remove("seed") {
            None => 0,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| RunError::Config("\"seed\" must be an unsigned 64-bit integer".into()))?,
        };
        let out = match map.remove("out") {
            None => None,
            Some(v) => Some(PathBuf::from(
                v.as_str()
                    .ok_or_else(|| RunError::Config("\"out\" must be a path".into()))?,
            )),
        };
        let rest = serde_json::Value::Object(map);
        fn typed<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, RunError> {
            serde_json::from_value(v).map_err(|e| RunError::Config(e.to_string()))
        }
        let settings = match kind {
            Kind::Stransform => Settings::Stransform(typed(rest)?),
            Kind::Mollified => Settings::Mollified(typed(rest)?),
            Kind::Chaos => Settings::Chaos(typed(rest)?),
            Kind::Mc => Settings::Mc(typed(rest)?),
            Kind::Diverge => Settings::Diverge(typed(rest)?),
            Kind::GammaCheck => Settings::GammaCheck(typed(rest)?),
            Kind::Ubound => Settings::Ubound(typed(rest)?),
        };
        let cfg = ExperimentConfig {
            kind,
            seed,
            out,
            settings,
            base_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(RunError::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        let cases = |cs: &[CaseSpec]| -> Result<(), RunError> {
            if cs.is_empty() {
                return bad("\"cases\" is empty".into());
            }
            for c in cs {
                match c {
                    CaseSpec::Explicit(e) => {
                        positive("T", e.horizon)?;
                        e.phi.resolve(&self.base_dir)?;
                    }
                    CaseSpec::Random(r) => {
                        if r.dims.is_empty() || r.dims.contains(&0) {
                            return bad("random cases need non-empty dims >= 1".into());
                        }
                        if !(r.x_norm[0] > 0.0 && r.x_norm[0] <= r.x_norm[1]) && !r.origin {
                            return bad(format!("x_norm range {:?} must satisfy 0 < lo <= hi", r.x_norm));
                        }
                        if !(r.horizon[0] > 0.0 && r.horizon[0] <= r.horizon[1]) {
                            return bad(format!("horizon range {:?} must satisfy 0 < lo <= hi", r.horizon));
                        }
                        positive("phi_scale", r.phi_scale)?;
                    }
                }
            }
            Ok(())
        };
        match &self.settings {
            Settings::Stransform(s) => {
                cases(&s.cases)?;
                positive("tol", s.tol)?;
            }
            Settings::Mollified(s) => {
                cases(&s.cases)?;
                positive("tol", s.tol)?;
                if s.eps2.is_empty() {
                    return bad("\"eps2\" is empty".into());
                }
                for &e in &s.eps2 {
                    positive("eps2", e)?;
                }
            }
            Settings::Chaos(s) => {
                cases(&s.cases)?;
                positive("tol", s.tol)?;
                if let Some(n) = s.orders.iter().find(|&&n| n > 2) {
                    return bad(format!("chaos orders above 2 are not supported, got {n}"));
                }
            }
            Settings::Mc(s) => {
                if s.points.is_empty() {
                    return bad("\"points\" is empty".into());
                }
                if s.paths == 0 || s.steps == 0 {
                    return bad("paths and steps must be >= 1".into());
                }
                if s.grid_bias && s.steps % 2 != 0 {
                    return bad("grid_bias needs an even step count".into());
                }
                if s.thread_counts.contains(&0) {
                    return bad("thread counts must be >= 1".into());
                }
                positive("tol", s.tol)?;
                for p in &s.points {
                    positive("T", p.horizon)?;
                    if p.eps2.is_empty() {
                        return bad("every point needs at least one eps2".into());
                    }
                    for &e in &p.eps2 {
                        positive("eps2", e)?;
                    }
                    p.phi.resolve(&self.base_dir)?;
                }
            }
            Settings::Diverge(s) => {
                if s.dims.is_empty() || s.dims.contains(&0) {
                    return bad("dims must be non-empty and >= 1".into());
                }
                positive("T", s.horizon)?;
            }
            Settings::GammaCheck(s) => {
                if s.dims.is_empty() || s.x_norms.is_empty() || s.horizons.is_empty() {
                    return bad("dims, x_norms and horizons must be non-empty".into());
                }
                positive("tol", s.tol)?;
            }
            Settings::Ubound(s) => {
                cases(&s.cases)?;
                if s.radii.len() < 2 || s.angles == 0 {
                    return bad("ubound needs at least two radii and one angle".into());
                }
                for &r in &s.radii {
                    positive("radius", r)?;
                }
            }
        }
        Ok(())
    }
}
