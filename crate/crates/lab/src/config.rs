//! Run configuration: a TOML file, parsed and checked against the parameter
//! ranges the coupling results require.

use std::path::{Path, PathBuf};

use asip_core::coupling::{Variant, MIN_M_COND};
use asip_core::observables::{Observable, Piece, PieceKind};
use serde::{Deserialize, Serialize};

/// Seed used when a config does not set one. Recorded in every manifest.
pub const DEFAULT_SEED: u64 = 0x0A51_9000_5EED_0001;

/// One failed range check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    /// The precondition that failed, in symbols.
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} violation(s): {}", .0.len(), summary(.0))]
    Invalid(Vec<Violation>),
}

fn summary(v: &[Violation]) -> String {
    v.iter().map(|x| format!("{} ({}): {}", x.field, x.rule, x.detail)).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariantSpec {
    RateA,
    RateB { epsilon: f64 },
}

impl VariantSpec {
    pub fn to_core(self) -> Variant {
        match self {
            Self::RateA => Variant::RateA,
            Self::RateB { epsilon } => Variant::RateB { epsilon },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PieceShape {
    Identity,
    /// `(x − lo)^{−exponent}`.
    Power { exponent: f64 },
    Affine { slope: f64, intercept: f64 },
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub shape: PieceShape,
    #[serde(default = "one")]
    pub sign: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Identity,
    /// `x^{−exponent}` on `(0, 1)`.
    Power { exponent: f64 },
    /// Indicator of `(lo, hi)`.
    Indicator { lo: f64, hi: f64 },
    Pieces { pieces: Vec<PieceSpec> },
}

impl ObservableSpec {
    pub fn build(&self) -> asip_core::Result<Observable> {
        match self {
            Self::Identity => Ok(Observable::identity()),
            Self::Power { exponent } => Observable::power(*exponent),
            Self::Indicator { lo, hi } => {
                Observable::new(vec![Piece { lo: *lo, hi: *hi, kind: PieceKind::Indicator, sign: 1.0 }])
            }
            Self::Pieces { pieces } => Observable::new(
                pieces
                    .iter()
                    .map(|p| Piece {
                        lo: p.lo,
                        hi: p.hi,
                        kind: match p.shape {
                            PieceShape::Identity => PieceKind::Identity,
                            PieceShape::Power { exponent } => PieceKind::Power { exponent },
                            PieceShape::Affine { slope, intercept } => PieceKind::Affine { slope, intercept },
                            PieceShape::Indicator => PieceKind::Indicator,
                        },
                        sign: p.sign,
                    })
                    .collect(),
            ),
        }
    }
}

/// Upper-tail quantile function used by the moment calculus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantileSpec {
    Constant { value: f64 },
    /// `Q(u) = c u^{−1/b}`.
    Power { c: f64, b: f64 },
    /// Empirical tail of `|f|` under the invariant density.
    Observable { samples: usize },
}

/// Strong-mixing profile used by the moment calculus and the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingSpec {
    /// `α(n) = min(1, a^n)`.
    Geometric { a: f64 },
    /// `α(n) = min(1, c n^{−ρ})`.
    Analytic { c: f64, rho: f64 },
    /// `α(n) = min(1, c n^{−(1−γ)/γ})`.
    Intermittent { c: f64 },
    /// Estimated from chain replicates; values inside the noise floor are
    /// treated as zero.
    Estimated { max_lag: usize, reps: usize, bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySpec {
    pub bins: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self { bins: 4096, tol: 1e-10, max_iters: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSpec {
    pub l_max: u32,
    pub m_cond: usize,
    /// Number of independent coupling runs.
    pub reps: usize,
    /// `σ²(f)`; estimated by batch means when absent.
    pub sigma2: Option<f64>,
    /// Smallest `n` entering the rate fit.
    pub fit_from: u64,
}

impl Default for CouplingSpec {
    fn default() -> Self {
        Self { l_max: 12, m_cond: 1000, reps: 20, sigma2: None, fit_from: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Chain,
    Orbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSpec {
    pub n: usize,
    pub reps: usize,
    pub path: PathKind,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { n: 1000, reps: 4, path: PathKind::Chain }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsSpec {
    pub quantile: QuantileSpec,
    pub mixing: MixingSpec,
    /// `λ` values at which `M₃(Q, λ)` is tabulated.
    pub lambda_grid: Vec<f64>,
}

impl Default for MomentsSpec {
    fn default() -> Self {
        Self {
            quantile: QuantileSpec::Observable { samples: 1_000_000 },
            mixing: MixingSpec::Intermittent { c: 1.0 },
            lambda_grid: (0..=16).map(|i| 10f64.powf(1.0 + i as f64 / 4.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Variance,
    W2,
    Maximal,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSpec {
    pub run: Vec<CheckKind>,
    pub series_k: usize,
    pub series_reps: usize,
    pub series_len: usize,
    pub batch_n: usize,
    pub batch_reps: usize,
    pub quantile_samples: usize,
    /// Profile for the right-hand sides; falls back to `moments.mixing`.
    pub mixing: Option<MixingSpec>,
    pub w2_n: Vec<usize>,
    pub w2_m_cond: usize,
    pub w2_reps: usize,
    pub maximal_n: usize,
    pub maximal_reps: usize,
    /// Empty: 20 points up to `0.3 √(nσ²)`.
    pub maximal_lambda: Vec<f64>,
    pub covariance_lags: usize,
    pub covariance_reps: usize,
    pub covariance_bins: usize,
    /// Bounded observable for the covariance check; falls back to the run's.
    pub covariance_observable: Option<ObservableSpec>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            run: vec![CheckKind::Variance, CheckKind::W2, CheckKind::Maximal, CheckKind::Covariance],
            series_k: 200,
            series_reps: 100,
            series_len: 1 << 16,
            batch_n: 1 << 14,
            batch_reps: 10_000,
            quantile_samples: 1_000_000,
            mixing: None,
            w2_n: (6..=12).map(|k| 1usize << k).collect(),
            w2_m_cond: 2000,
            w2_reps: 20,
            maximal_n: 1024,
            maximal_reps: 10_000,
            maximal_lambda: Vec::new(),
            covariance_lags: 32,
            covariance_reps: 20_000,
            covariance_bins: 100,
            covariance_observable: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Map parameter; absent for runs on an abstract quantile and profile.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub p: f64,
    #[serde(default = "rate_a")]
    pub variant: VariantSpec,
    #[serde(default = "identity")]
    pub observable: ObservableSpec,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub moments: MomentsSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
}

fn rate_a() -> VariantSpec {
    VariantSpec::RateA
}

fn identity() -> ObservableSpec {
    ObservableSpec::Identity
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn seed_defaulted(&self) -> bool {
        self.seed.is_none()
    }

    /// Every range violation, empty when the config is usable.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut push = |field: &str, rule: &str, detail: String| {
            v.push(Violation { field: field.into(), rule: rule.into(), detail })
        };
        match self.gamma {
            Some(g) => {
                if !(g > 0.0 && g < 0.5) {
                    push("gamma", "0 < γ < 1/2", format!("gamma = {g} is outside the map invariance principle range"));
                }
                if !(self.p > 2.0 && self.p <= 3.0) {
                    push("p", "p ∈ (2,3]", format!("p = {} is outside (2,3]", self.p));
                }
                if g > 0.0 && self.p > 1.0 / g {
                    push("p", "p ≤ 1/γ", format!("1/γ = {} < p = {}", 1.0 / g, self.p));
                }
            }
            None => {
                if !(self.p >= 1.0 && self.p.is_finite()) {
                    push("p", "p ≥ 1", format!("p = {} is not a moment order", self.p));
                }
            }
        }
        if let VariantSpec::RateB { epsilon } = self.variant {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                push("variant.epsilon", "ε > 0", format!("epsilon = {epsilon}"));
            }
        }
        if let Err(e) = self.observable.build() {
            push("observable", "valid observable", e.to_string());
        }
        if let Some(o) = &self.checks.covariance_observable {
            match o.build() {
                Err(e) => push("checks.covariance_observable", "valid observable", e.to_string()),
                Ok(f) if !f.sup_norm().is_finite() => {
                    push("checks.covariance_observable", "bounded f", "observable is unbounded".into())
                }
                Ok(_) => {}
            }
        }
        let d = &self.density;
        if d.bins < 16 || !(d.tol > 0.0) || d.max_iters == 0 {
            push("density", "bins ≥ 16, tol > 0", format!("bins = {}, tol = {}", d.bins, d.tol));
        }
        let c = &self.coupling;
        if c.m_cond < MIN_M_COND {
            push("coupling.m_cond", "M_cond ≥ 1000", format!("m_cond = {}", c.m_cond));
        }
        if c.l_max > 24 {
            push("coupling.l_max", "L_max ≤ 24", format!("l_max = {}", c.l_max));
        }
        if c.reps == 0 {
            push("coupling.reps", "reps ≥ 1", "reps = 0".into());
        }
        if let Some(s2) = c.sigma2 {
            if !(s2 >= 0.0 && s2.is_finite()) {
                push("coupling.sigma2", "σ² ≥ 0", format!("sigma2 = {s2}"));
            }
        }
        if self.simulate.n == 0 || self.simulate.reps == 0 {
            push("simulate", "n, reps ≥ 1", format!("n = {}, reps = {}", self.simulate.n, self.simulate.reps));
        }
        if self.moments.lambda_grid.iter().any(|l| !(*l > 0.0)) {
            push("moments.lambda_grid", "λ > 0", "non-positive λ".into());
        }
        v
    }

    /// Error unless the run is on the map.
    pub fn require_gamma(&self, command: &str) -> Result<f64, ConfigError> {
        self.gamma.ok_or_else(|| {
            ConfigError::Invalid(vec![Violation {
                field: "gamma".into(),
                rule: "γ set".into(),
                detail: format!("`{command}` simulates the map and needs gamma"),
            }])
        })
    }
}

/// Parse and validate a config from text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = span.start - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (line, column)
            }
            None => (0, 0),
        };
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })?;
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(v))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_config_str(&text)
}
