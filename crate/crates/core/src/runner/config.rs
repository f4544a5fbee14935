//! Declarative experiment description, read from and written to TOML.

use super::reference::NamedState;
use crate::error::{Error, Result};
use crate::hilbert::Boundary;
use crate::loss::{Gauge, LossTerm, TargetObservable, TermKind};
use crate::operators::{Monomial, ModelSpec, ParamBox, ParametrizationMap, SymmetryGenerator};
use crate::optimizer::{CgdConfig, Method};
use crate::spectra::EigenOptions;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Version written to and required from every config and report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Seed for start points and planted coefficients; the CLI `--seed` flag overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub system: SystemConfig,
    #[serde(default)]
    pub parametrization: ParametrizationConfig,
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optimizer: CgdConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub model: ModelSpec,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Restrict to the sector with this value of `2 * Sz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twice_sz: Option<i64>,
    /// Operator labels removed from the ansatz (the planted model keeps them).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
    pub train_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_sizes: Vec<usize>,
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParametrizationConfig {
    /// One parameter per operator.
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<Vec<[f64; 2]>>,
    },
    /// Each operator coefficient is a polynomial in `n_params` parameters.
    Polynomial {
        n_params: usize,
        outputs: Vec<Vec<Monomial>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<Vec<[f64; 2]>>,
    },
}

impl Default for ParametrizationConfig {
    fn default() -> Self {
        ParametrizationConfig::Linear { bounds: None }
    }
}

impl ParametrizationConfig {
    pub fn build(&self, n_operators: usize) -> Result<ParametrizationMap> {
        let (map, bounds) = match self {
            ParametrizationConfig::Linear { bounds } => (ParametrizationMap::linear(n_operators), bounds),
            ParametrizationConfig::Polynomial {
                n_params,
                outputs,
                bounds,
            } => (ParametrizationMap::polynomial(*n_params, outputs.clone())?, bounds),
        };
        match bounds {
            Some(b) => map.with_box(ParamBox::new(b.clone())?),
            None => Ok(map),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ParametrizationConfig::Linear { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Ground states of a model with random coefficients on `support`, zero elsewhere.
    Planted {
        support: Vec<String>,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_coefficient_range")]
        coefficient_range: [f64; 2],
        /// Smallest acceptable gap above a unique ground state.
        #[serde(default = "default_min_gap")]
        min_gap: f64,
    },
    /// Ground states of the ansatz itself at parameters `params`.
    Point { params: Vec<f64> },
    Named { state: NamedState },
    /// Amplitude files keyed by system size; relative paths resolve against the
    /// config file's directory.
    File { paths: BTreeMap<String, PathBuf> },
}

fn default_coefficient_range() -> [f64; 2] {
    [0.5, 1.5]
}

fn default_min_gap() -> f64 {
    1e-3
}

/// How the default per-size weight `G_N` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SizeWeighting {
    /// Hilbert-space dimension, divided by the largest training dimension.
    #[default]
    HilbertDimension,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKindName {
    Overlap,
    Kl,
    EnergyVariance,
    GroundEnergy,
    Gap,
    ExtrapolatedGap,
    SymmetryPenalty,
    TargetValue,
    RegularizationL1,
    BoxPenalty,
}

/// One loss term as written in the config; only the fields of its kind may be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub kind: TermKindName,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Overlap only: use the bare overlap instead of `1 - overlap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SymmetryGenerator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<TargetObservable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub size_targets: BTreeMap<String, f64>,
    /// Regularization only: reference coefficients (zero when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    /// Box penalty only: explicit box (the parametrization box when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    /// Replaces the default `G_N`; sizes not listed are skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_weights: Option<BTreeMap<String, f64>>,
}

impl TermConfig {
    pub fn simple(kind: TermKindName, weight: f64) -> Self {
        Self {
            kind,
            weight,
            name: None,
            raw: None,
            generator: None,
            observable: None,
            target: None,
            size_targets: BTreeMap::new(),
            reference: None,
            bounds: None,
            size_weights: None,
        }
    }

    pub fn to_loss_term(&self) -> Result<LossTerm> {
        let label = format!("{:?}", self.kind);
        let reject = |field: &str, set: bool| -> Result<()> {
            if set {
                Err(Error::Config(format!("field '{field}' does not apply to a {label} term")))
            } else {
                Ok(())
            }
        };
        use TermKindName as K;
        reject("raw", self.raw.is_some() && self.kind != K::Overlap)?;
        reject("generator", self.generator.is_some() && self.kind != K::SymmetryPenalty)?;
        let is_target = self.kind == K::TargetValue;
        reject("observable", self.observable.is_some() && !is_target)?;
        reject("target", self.target.is_some() && !is_target)?;
        reject("size_targets", !self.size_targets.is_empty() && !is_target)?;
        reject("reference", self.reference.is_some() && self.kind != K::RegularizationL1)?;
        reject("bounds", self.bounds.is_some() && self.kind != K::BoxPenalty)?;
        let kind = match self.kind {
            K::Overlap => TermKind::Overlap {
                raw: self.raw.unwrap_or(false),
            },
            K::Kl => TermKind::Kl,
            K::EnergyVariance => TermKind::EnergyVariance,
            K::GroundEnergy => TermKind::GroundEnergy,
            K::Gap => TermKind::Gap,
            K::ExtrapolatedGap => TermKind::ExtrapolatedGap,
            K::SymmetryPenalty => TermKind::SymmetryPenalty {
                generator: self
                    .generator
                    .ok_or_else(|| Error::Config("symmetry_penalty needs a generator".into()))?,
            },
            K::TargetValue => TermKind::TargetValue {
                observable: self
                    .observable
                    .ok_or_else(|| Error::Config("target_value needs an observable".into()))?,
                target: self
                    .target
                    .ok_or_else(|| Error::Config("target_value needs a target".into()))?,
                size_targets: parse_size_map(&self.size_targets)?,
            },
            K::RegularizationL1 => TermKind::RegularizationL1 {
                reference: self.reference.clone(),
            },
            K::BoxPenalty => TermKind::BoxPenalty {
                bounds: self.bounds.clone().map(ParamBox::new).transpose()?,
            },
        };
        let mut term = LossTerm::new(kind, self.weight);
        if let Some(n) = &self.name {
            term = term.named(n.clone());
        }
        if let Some(w) = &self.size_weights {
            term = term.with_size_weights(parse_size_map(w)?);
        }
        Ok(term)
    }
}

fn parse_size_map(m: &BTreeMap<String, f64>) -> Result<BTreeMap<usize, f64>> {
    m.iter()
        .map(|(k, v)| {
            k.parse::<usize>()
                .map(|n| (n, *v))
                .map_err(|_| Error::Config(format!("'{k}' is not a system size")))
        })
        .collect()
}

/// Recovery loss used when the config lists no terms.
pub fn default_terms() -> Vec<TermConfig> {
    vec![
        TermConfig::simple(TermKindName::Overlap, 1.0),
        TermConfig::simple(TermKindName::Kl, 0.2),
        TermConfig::simple(TermKindName::EnergyVariance, 1.0),
        TermConfig::simple(TermKindName::RegularizationL1, 1e-3),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub terms: Vec<TermConfig>,
    pub size_weighting: SizeWeighting,
    /// Extra factor on `G_N` of the largest training size; 1 for `recover` and 1000
    /// for `extrapolate` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_size_importance: Option<f64>,
    pub gauge: Gauge,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            terms: default_terms(),
            size_weighting: SizeWeighting::default(),
            largest_size_importance: None,
            gauge: Gauge::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub method: Method,
    /// Single explicit start in search coordinates; random starts otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Box the random starts are drawn from, over the full parameter vector; the
    /// parametrization box, or `[0, 1]` per parameter, when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_box: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Grid points along the first parameter.
    pub n1: usize,
    /// Grid points along the second parameter.
    pub n2: usize,
    /// Start of both descent runs; the box center when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n1: 10,
            n2: 11,
            start: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| {
            // Report a version mismatch before any schema complaint.
            match toml::from_str::<toml::Table>(s)
                .ok()
                .and_then(|t| t.get("schema_version").and_then(|v| v.as_integer()))
            {
                Some(v) if v != SCHEMA_VERSION as i64 => Error::SchemaVersion {
                    found: v.max(0) as u32,
                    expected: SCHEMA_VERSION,
                },
                _ => Error::TomlDe(e),
            }
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: cfg.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// Sets both the top-level and the optimizer seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.optimizer.seed = seed;
        self
    }

    pub fn loss_terms(&self) -> Result<Vec<LossTerm>> {
        self.loss.terms.iter().map(TermConfig::to_loss_term).collect()
    }

    /// Checks everything that can be checked without building operators.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let sys = &self.system;
        if sys.train_sizes.is_empty() {
            return Err(Error::Config("train_sizes must not be empty".into()));
        }
        let mut all = sys.train_sizes.clone();
        all.extend(&sys.test_sizes);
        if let Some(n) = all.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("system size {n} is too small")));
        }
        let mut sorted = sys.train_sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sys.train_sizes.len() {
            return Err(Error::Config("train_sizes contains duplicates".into()));
        }
        let mut test = sys.test_sizes.clone();
        test.sort_unstable();
        test.dedup();
        if test.len() != sys.test_sizes.len() {
            return Err(Error::Config("test_sizes contains duplicates".into()));
        }
        if let Some(n) = sys.test_sizes.iter().find(|n| sys.train_sizes.contains(n)) {
            return Err(Error::Config(format!("size {n} is both a training and a test size")));
        }
        let labels = sys.model.labels()?;
        for e in &sys.exclude {
            if !labels.contains(e) {
                return Err(Error::Config(format!("cannot exclude unknown operator {e:?}")));
            }
        }
        let n_ops = labels.len() - sys.exclude.len();
        let map = self.parametrization.build(n_ops)?;
        self.loss.gauge.validate(map.n_params())?;
        if self.loss.terms.is_empty() {
            return Err(Error::Config("loss.terms must not be empty".into()));
        }
        self.loss_terms()?;
        if let Some(m) = self.loss.largest_size_importance {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config("largest_size_importance must be positive".into()));
            }
        }
        self.optimizer.validate()?;
        match &self.reference {
            ReferenceConfig::Planted {
                support,
                coefficient_range,
                min_gap,
                ..
            } => {
                if !self.parametrization.is_linear() {
                    return Err(Error::Config(
                        "planted references need a linear parametrization; use a point reference".into(),
                    ));
                }
                if support.is_empty() {
                    return Err(Error::Config("planted support must not be empty".into()));
                }
                for s in support {
                    if !labels.contains(s) {
                        return Err(Error::Config(format!("support label {s:?} is not in the model")));
                    }
                }
                let [lo, hi] = *coefficient_range;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config("coefficient_range must be an ordered finite pair".into()));
                }
                if !(*min_gap >= 0.0) {
                    return Err(Error::Config("min_gap must be non-negative".into()));
                }
            }
            ReferenceConfig::Point { params } => {
                if params.len() != map.n_params() {
                    return Err(Error::Config(format!(
                        "reference point has {} parameters, expected {}",
                        params.len(),
                        map.n_params()
                    )));
                }
            }
            ReferenceConfig::Named { .. } => {}
            ReferenceConfig::File { paths } => {
                let sizes = parse_size_map(&paths.keys().map(|k| (k.clone(), 0.0)).collect())?;
                for n in &all {
                    if !sizes.contains_key(n) {
                        return Err(Error::Config(format!("no amplitude file for size {n}")));
                    }
                }
            }
        }
        let reduced = self.loss.gauge.reduced_dim(map.n_params());
        if let Some(s) = &self.search.start {
            if s.len() != reduced {
                return Err(Error::Config(format!(
                    "search.start has {} entries, expected {reduced}",
                    s.len()
                )));
            }
        }
        if let Some(b) = &self.search.start_box {
            let b = ParamBox::new(b.clone())?;
            if b.dim() != map.n_params() {
                return Err(Error::Config("search.start_box dimension differs from parameter count".into()));
            }
        }
        if let Some(scan) = &self.scan {
            if scan.n1 < 2 || scan.n2 < 2 {
                return Err(Error::Config("scan grid needs at least two points per axis".into()));
            }
            if let Some(s) = &scan.start {
                if s.len() != reduced {
                    return Err(Error::Config("scan.start dimension differs from the search domain".into()));
                }
            }
        }
        Ok(())
    }
}
