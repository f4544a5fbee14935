use super::{assemble_sparse, ModelSpec, OperatorBasis, OperatorStack, SparseMatrix};
use crate::error::{Error, Result};
use crate::hilbert::{Boundary, SpinBasis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Axis-aligned parameter region, one `[lo, hi]` pair per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamBox {
    bounds: Vec<[f64; 2]>,
}

impl ParamBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        for (j, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("box coordinate {j}: need finite lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(ParamBox { bounds })
    }

    /// The unit cube `[0, 1]^n`.
    pub fn unit(n: usize) -> Self {
        ParamBox {
            bounds: vec![[0.0, 1.0]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.bounds.len() && p.iter().zip(&self.bounds).all(|(x, [lo, hi])| lo <= x && x <= hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    /// Squared distance outside the box, per coordinate, summed.
    pub fn outside_distance_sq(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.bounds)
            .map(|(x, [lo, hi])| {
                let d = if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|[lo, hi]| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

/// `coefficient * prod_j p_j^powers[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn eval(&self, p: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(p)
            .fold(self.coefficient, |acc, (&k, &x)| acc * x.powi(k as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MapKind {
    Linear { n: usize },
    Polynomial { n_params: usize, outputs: Vec<Vec<Monomial>> },
}

/// Continuous map from a parameter vector `p` to the `M` operator coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametrizationMap {
    kind: MapKind,
    bounds: Option<ParamBox>,
}

impl ParametrizationMap {
    /// Identity map on `n` coordinates.
    pub fn linear(n: usize) -> Self {
        ParametrizationMap {
            kind: MapKind::Linear { n },
            bounds: None,
        }
    }

    /// `c_m(p) = sum over outputs[m]` of monomials in `n_params` variables.
    pub fn polynomial(n_params: usize, outputs: Vec<Vec<Monomial>>) -> Result<Self> {
        if n_params == 0 || outputs.is_empty() {
            return Err(Error::Config("polynomial map needs parameters and outputs".into()));
        }
        for (m, poly) in outputs.iter().enumerate() {
            for mono in poly {
                if mono.powers.len() != n_params {
                    return Err(Error::Config(format!(
                        "output {m}: monomial has {} powers for {n_params} parameters",
                        mono.powers.len()
                    )));
                }
                if !mono.coefficient.is_finite() {
                    return Err(Error::Config(format!("output {m}: non-finite monomial coefficient")));
                }
            }
        }
        Ok(ParametrizationMap {
            kind: MapKind::Polynomial { n_params, outputs },
            bounds: None,
        })
    }

    pub fn with_box(mut self, bounds: ParamBox) -> Result<Self> {
        if bounds.dim() != self.n_params() {
            return Err(Error::Config(format!(
                "box has {} coordinates, map has {} parameters",
                bounds.dim(),
                self.n_params()
            )));
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn param_box(&self) -> Option<&ParamBox> {
        self.bounds.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, MapKind::Linear { .. })
    }

    pub fn n_params(&self) -> usize {
        match &self.kind {
            MapKind::Linear { n } => *n,
            MapKind::Polynomial { n_params, .. } => *n_params,
        }
    }

    pub fn n_outputs(&self) -> usize {
        match &self.kind {
            MapKind::Linear { n } => *n,
            MapKind::Polynomial { outputs, .. } => outputs.len(),
        }
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        let c: Vec<f64> = match &self.kind {
            MapKind::Linear { .. } => p.to_vec(),
            MapKind::Polynomial { outputs, .. } => outputs
                .iter()
                .map(|poly| poly.iter().map(|m| m.eval(p)).sum())
                .collect(),
        };
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mapped operator coefficients".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
enum OperatorSource {
    Model { model: ModelSpec, keep: Vec<usize> },
    Fixed(OperatorBasis),
}

type BasisKey = (usize, usize, Option<i64>, Boundary);

fn key_of(basis: &SpinBasis) -> BasisKey {
    (basis.n_sites(), basis.local_dim(), basis.sector(), basis.boundary())
}

/// `H(p) = sum_m c_m(p) O_m` with per-basis caching of the assembled `O_m`.
#[derive(Debug)]
pub struct HamiltonianAnsatz {
    source: OperatorSource,
    labels: Vec<String>,
    map: ParametrizationMap,
    cache: Mutex<HashMap<BasisKey, Arc<OperatorStack>>>,
}

impl HamiltonianAnsatz {
    /// Ansatz over a zoo model with the operators labelled in `exclude` removed.
    pub fn from_model(model: ModelSpec, exclude: &[String], map: ParametrizationMap) -> Result<Self> {
        let all = model.labels()?;
        for e in exclude {
            if !all.contains(e) {
                return Err(Error::Config(format!("cannot exclude unknown operator {e:?} from {}", model.name())));
            }
        }
        let keep: Vec<usize> = (0..all.len()).filter(|&i| !exclude.contains(&all[i])).collect();
        if keep.is_empty() {
            return Err(Error::Config("every operator was excluded".into()));
        }
        let labels = keep.iter().map(|&i| all[i].clone()).collect();
        Self::assemble_parts(OperatorSource::Model { model, keep }, labels, map)
    }

    /// Ansatz over a fixed operator basis (valid for any basis its sites fit in).
    pub fn from_operators(ops: OperatorBasis, map: ParametrizationMap) -> Result<Self> {
        let labels = ops.labels().to_vec();
        Self::assemble_parts(OperatorSource::Fixed(ops), labels, map)
    }

    fn assemble_parts(source: OperatorSource, labels: Vec<String>, map: ParametrizationMap) -> Result<Self> {
        if map.n_outputs() != labels.len() {
            return Err(Error::Config(format!(
                "parametrization yields {} coefficients for {} operators",
                map.n_outputs(),
                labels.len()
            )));
        }
        Ok(HamiltonianAnsatz {
            source,
            labels,
            map,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_operators(&self) -> usize {
        self.labels.len()
    }

    pub fn n_params(&self) -> usize {
        self.map.n_params()
    }

    pub fn map(&self) -> &ParametrizationMap {
        &self.map
    }

    pub fn model(&self) -> Option<&ModelSpec> {
        match &self.source {
            OperatorSource::Model { model, .. } => Some(model),
            OperatorSource::Fixed(_) => None,
        }
    }

    pub fn operator_basis(&self, basis: &SpinBasis) -> Result<OperatorBasis> {
        match &self.source {
            OperatorSource::Model { model, keep } => {
                if model.local_dim()? != basis.local_dim() {
                    return Err(Error::Config(format!(
                        "{} needs local dimension {}, basis has {}",
                        model.name(),
                        model.local_dim()?,
                        basis.local_dim()
                    )));
                }
                model.build(basis.n_sites(), basis.boundary())?.select(keep)
            }
            OperatorSource::Fixed(ops) => Ok(ops.clone()),
        }
    }

    /// Per-operator matrices on `basis`, assembled once and cached.
    pub fn assembled(&self, basis: &SpinBasis) -> Result<Arc<OperatorStack>> {
        let key = key_of(basis);
        if let Some(hit) = self.cache.lock().expect("ansatz cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let ops = self.operator_basis(basis)?;
        let mats = ops
            .operators()
            .iter()
            .map(|o| assemble_sparse(o, basis))
            .collect::<Result<Vec<_>>>()?;
        let stack = Arc::new(OperatorStack::new(&mats)?);
        self.cache
            .lock()
            .expect("ansatz cache poisoned")
            .entry(key)
            .or_insert_with(|| stack.clone());
        Ok(stack)
    }

    pub fn coefficients(&self, gamma: &[f64]) -> Result<Vec<f64>> {
        self.map.evaluate(gamma)
    }

    pub fn hamiltonian_at(&self, gamma: &[f64], basis: &SpinBasis) -> Result<SparseMatrix> {
        let c = self.coefficients(gamma)?;
        Ok(self.assembled(basis)?.combine(&c))
    }
}
