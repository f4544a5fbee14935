//! Weighted loss over observables of the ground state of `H(gamma)` at one or more
//! system sizes, plus parameter-space regularization, target and box terms.

use crate::error::{Error, Result};
use crate::hilbert::{best_in_span, kl_divergence, subspace_overlap, SpinBasis, WaveFunction};
use crate::operators::{assemble_sparse, symmetry_generator, HamiltonianAnsatz, ParamBox, SparseMatrix, SymmetryGenerator};
use crate::optimizer::{Evaluation, Objective};
use crate::spectra::{eigs_low, eigs_low_from, energy_moments, expectation, EigenOptions, EvaluationReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Stiffness of the quadratic wall outside the parameter box.
pub const BOX_STIFFNESS: f64 = 1e4;
/// Below this `sum |gamma|` the L1 gauge projection is undefined.
pub const L1_GAUGE_FLOOR: f64 = 1e-14;

/// Observable fed into a squared-deviation target term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetObservable {
    GroundEnergy,
    Gap,
    ExtrapolatedGap,
    Symmetry,
}

/// What a term measures, with its kind-specific data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermKind {
    /// `1 - overlap` of the reference with the ground space, or the bare overlap when
    /// `raw` is set (pair with a negative weight to maximize it).
    Overlap {
        #[serde(default)]
        raw: bool,
    },
    /// Relative entropy between reference and the ground vector closest to it.
    Kl,
    /// Energy variance of the reference state under `H(gamma)`.
    EnergyVariance,
    GroundEnergy,
    Gap,
    /// Intercept of the gap against `1/N`; needs at least two sizes.
    ExtrapolatedGap,
    /// Expectation of a symmetry generator, averaged over the ground multiplet.
    SymmetryPenalty { generator: SymmetryGenerator },
    /// `(T - target)^2`, with optional per-size targets for size-resolved observables.
    TargetValue {
        observable: TargetObservable,
        target: f64,
        #[serde(default)]
        size_targets: BTreeMap<usize, f64>,
    },
    /// `sum_m |c_m - reference_m|` over operator coefficients; reference defaults to 0.
    RegularizationL1 {
        #[serde(default)]
        reference: Option<Vec<f64>>,
    },
    /// Quadratic wall outside the box; falls back to the parametrization box.
    BoxPenalty {
        #[serde(default)]
        bounds: Option<ParamBox>,
    },
}

impl TermKind {
    pub fn label(&self) -> &'static str {
        match self {
            TermKind::Overlap { .. } => "overlap",
            TermKind::Kl => "kl",
            TermKind::EnergyVariance => "energy_variance",
            TermKind::GroundEnergy => "ground_energy",
            TermKind::Gap => "gap",
            TermKind::ExtrapolatedGap => "extrapolated_gap",
            TermKind::SymmetryPenalty { .. } => "symmetry_penalty",
            TermKind::TargetValue { .. } => "target_value",
            TermKind::RegularizationL1 { .. } => "regularization_l1",
            TermKind::BoxPenalty { .. } => "box_penalty",
        }
    }

    /// Terms evaluated at every size and weighted by `G_N`.
    pub fn is_per_size(&self) -> bool {
        match self {
            TermKind::Overlap { .. }
            | TermKind::Kl
            | TermKind::EnergyVariance
            | TermKind::GroundEnergy
            | TermKind::Gap
            | TermKind::SymmetryPenalty { .. } => true,
            TermKind::TargetValue { observable, .. } => *observable != TargetObservable::ExtrapolatedGap,
            _ => false,
        }
    }

    fn needs_reference(&self) -> bool {
        matches!(self, TermKind::Overlap { .. } | TermKind::Kl | TermKind::EnergyVariance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub name: String,
    pub weight: f64,
    pub kind: TermKind,
    /// Per-size weights replacing the sizes' default `G_N`; sizes missing from the map
    /// are skipped for this term.
    pub size_weights: Option<BTreeMap<usize, f64>>,
}

impl LossTerm {
    pub fn new(kind: TermKind, weight: f64) -> Self {
        Self {
            name: kind.label().to_string(),
            weight,
            kind,
            size_weights: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_size_weights(mut self, weights: BTreeMap<usize, f64>) -> Self {
        self.size_weights = Some(weights);
        self
    }
}

/// One system size entering the loss.
#[derive(Debug, Clone)]
pub struct SizeSpec {
    pub basis: Arc<SpinBasis>,
    pub reference: Option<WaveFunction>,
    /// Default `G_N`.
    pub weight: f64,
}

impl SizeSpec {
    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }
}

/// Removal of the overall scale freedom of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Gauge {
    #[default]
    None,
    /// Parameter `index` is held at `value` and removed from the search domain.
    FreezeOne { index: usize, value: f64 },
    /// Parameters are rescaled so that `sum |p| = total` after every accepted step.
    L1Sum { total: f64 },
}

impl Gauge {
    pub fn validate(&self, n_params: usize) -> Result<()> {
        match *self {
            Gauge::None => Ok(()),
            Gauge::FreezeOne { index, value } => {
                if index >= n_params {
                    return Err(Error::Config(format!(
                        "frozen index {index} out of range for {n_params} parameters"
                    )));
                }
                if n_params < 2 {
                    return Err(Error::Config("cannot freeze the only parameter".into()));
                }
                if !value.is_finite() {
                    return Err(Error::Config("frozen value must be finite".into()));
                }
                Ok(())
            }
            Gauge::L1Sum { total } => {
                if total > 0.0 && total.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("l1 gauge total must be positive, got {total}")))
                }
            }
        }
    }

    pub fn reduced_dim(&self, n_params: usize) -> usize {
        match self {
            Gauge::FreezeOne { .. } => n_params - 1,
            _ => n_params,
        }
    }

    /// Full parameter vector from search coordinates (no projection).
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        match *self {
            Gauge::FreezeOne { index, value } => {
                let mut full = Vec::with_capacity(reduced.len() + 1);
                full.extend_from_slice(&reduced[..index]);
                full.push(value);
                full.extend_from_slice(&reduced[index..]);
                full
            }
            _ => reduced.to_vec(),
        }
    }

    /// Search coordinates from a full parameter vector.
    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        match *self {
            Gauge::FreezeOne { index, .. } => full
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != index)
                .map(|(_, x)| *x)
                .collect(),
            _ => full.to_vec(),
        }
    }

    /// Projection onto the gauge surface; identity except for `L1Sum`.
    pub fn project(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        match *self {
            Gauge::L1Sum { total } => {
                let sum: f64 = reduced.iter().map(|x| x.abs()).sum();
                if sum.is_nan() || sum < L1_GAUGE_FLOOR {
                    return Err(Error::DegenerateGauge { sum });
                }
                Ok(reduced.iter().map(|x| x * total / sum).collect())
            }
            _ => Ok(reduced.to_vec()),
        }
    }
}

/// Contribution of one term at one size (or globally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub term: String,
    pub size: Option<usize>,
    /// Raw term value `t`.
    pub value: f64,
    /// `weight * G_N * t`.
    pub contribution: f64,
}

/// Ground-state observables at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeObservables {
    pub n_sites: usize,
    pub dim: usize,
    pub e0: f64,
    pub gap: f64,
    pub ground_degeneracy: usize,
    pub overlap: Option<f64>,
    pub kl: Option<f64>,
    pub energy_variance: Option<f64>,
    pub relative_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub contributions: Vec<Contribution>,
    /// Sum of contributions per term, in term order.
    pub per_term: Vec<f64>,
    pub observables: Vec<SizeObservables>,
    /// Intercept and residual norm of the gap fit, when at least two sizes exist.
    pub extrapolated_gap: Option<(f64, f64)>,
    /// Full parameter vector the loss was evaluated at.
    pub params: Vec<f64>,
}

/// Complete loss definition.
#[derive(Debug)]
pub struct LossSpec {
    terms: Vec<LossTerm>,
    sizes: Vec<SizeSpec>,
    ansatz: Arc<HamiltonianAnsatz>,
    gauge: Gauge,
    eigen: EigenOptions,
    /// `symmetry[t][s]`: generator of term `t` assembled at size `s`.
    symmetry: Vec<Vec<Option<SparseMatrix>>>,
}

impl LossSpec {
    pub fn new(
        terms: Vec<LossTerm>,
        sizes: Vec<SizeSpec>,
        ansatz: Arc<HamiltonianAnsatz>,
        gauge: Gauge,
        eigen: EigenOptions,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("loss needs at least one term".into()));
        }
        if sizes.is_empty() {
            return Err(Error::Config("loss needs at least one system size".into()));
        }
        gauge.validate(ansatz.n_params())?;
        let mut seen = std::collections::HashSet::new();
        for s in &sizes {
            if !seen.insert(s.n_sites()) {
                return Err(Error::Config(format!("size {} listed twice", s.n_sites())));
            }
            if let Some(r) = &s.reference {
                if **r.basis() != *s.basis {
                    return Err(Error::BasisMismatch);
                }
            }
        }
        let mut names = std::collections::HashSet::new();
        for t in &terms {
            if !names.insert(t.name.clone()) {
                return Err(Error::Config(format!("duplicate loss term name '{}'", t.name)));
            }
            if !t.weight.is_finite() {
                return Err(Error::Config(format!("term '{}' has a non-finite weight", t.name)));
            }
            if let Some(w) = &t.size_weights {
                for n in w.keys() {
                    if !sizes.iter().any(|s| s.n_sites() == *n) {
                        return Err(Error::Config(format!("term '{}' weights unknown size {n}", t.name)));
                    }
                }
            }
            if t.kind.needs_reference() {
                for s in &sizes {
                    if s.reference.is_none() && term_weight(t, s) != 0.0 {
                        return Err(Error::Config(format!(
                            "term '{}' needs a reference state at size {}",
                            t.name,
                            s.n_sites()
                        )));
                    }
                }
            }
            let needs_two = matches!(t.kind, TermKind::ExtrapolatedGap)
                || matches!(
                    t.kind,
                    TermKind::TargetValue {
                        observable: TargetObservable::ExtrapolatedGap,
                        ..
                    }
                );
            if needs_two && sizes.len() < 2 {
                return Err(Error::Config(format!("term '{}' needs at least two sizes", t.name)));
            }
            match &t.kind {
                TermKind::RegularizationL1 { reference: Some(r) } if r.len() != ansatz.n_operators() => {
                    return Err(Error::Config(format!(
                        "regularization reference has {} entries, expected {}",
                        r.len(),
                        ansatz.n_operators()
                    )));
                }
                TermKind::BoxPenalty { bounds } => {
                    let b = bounds.as_ref().or(ansatz.map().param_box()).ok_or_else(|| {
                        Error::Config(format!("term '{}' needs a box", t.name))
                    })?;
                    if b.dim() != ansatz.n_params() {
                        return Err(Error::Config("box dimension differs from parameter count".into()));
                    }
                }
                _ => {}
            }
        }
        let symmetry = terms
            .iter()
            .map(|t| match &t.kind {
                TermKind::SymmetryPenalty { generator } => sizes
                    .iter()
                    .map(|s| {
                        let op = symmetry_generator(*generator, s.n_sites(), s.basis.local_dim())?;
                        assemble_sparse(&op, &s.basis).map(Some)
                    })
                    .collect::<Result<Vec<_>>>(),
                TermKind::TargetValue {
                    observable: TargetObservable::Symmetry,
                    ..
                } => Err(Error::Config(
                    "symmetry targets are expressed with a symmetry_penalty term".into(),
                )),
                _ => Ok(vec![None; sizes.len()]),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            terms,
            sizes,
            ansatz,
            gauge,
            eigen,
            symmetry,
        })
    }

    pub fn terms(&self) -> &[LossTerm] {
        &self.terms
    }

    pub fn sizes(&self) -> &[SizeSpec] {
        &self.sizes
    }

    pub fn ansatz(&self) -> &Arc<HamiltonianAnsatz> {
        &self.ansatz
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn eigen_options(&self) -> &EigenOptions {
        &self.eigen
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    /// Dimension of the search domain after the gauge.
    pub fn reduced_dim(&self) -> usize {
        self.gauge.reduced_dim(self.ansatz.n_params())
    }

    /// Full parameters for search coordinates, with the gauge projection applied.
    pub fn full_params(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.reduced_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reduced_dim(),
                found: reduced.len(),
            });
        }
        Ok(self.gauge.expand(&self.gauge.project(reduced)?))
    }

    /// Loss at search coordinates `reduced`.
    pub fn evaluate(&self, reduced: &[f64]) -> Result<LossBreakdown> {
        let params = self.full_params(reduced)?;
        self.evaluate_full(&params)
    }

    /// Loss at a full parameter vector (gauge not applied).
    pub fn evaluate_full(&self, params: &[f64]) -> Result<LossBreakdown> {
        self.evaluate_full_from(params, None)
    }

    /// Eigenvectors at search coordinates `reduced`, one list per size. Passed back to
    /// [`evaluate_full_from`](Self::evaluate_full_from) they warm-start the
    /// eigensolver for nearby points.
    pub fn anchor_vectors(&self, reduced: &[f64]) -> Result<Vec<Vec<WaveFunction>>> {
        let params = self.full_params(reduced)?;
        Ok(self.spectra(&params)?.into_iter().map(|r| r.eigenvectors).collect())
    }

    /// As [`evaluate_full`](Self::evaluate_full), with eigensolver start vectors per
    /// size from [`anchor_vectors`](Self::anchor_vectors).
    pub fn evaluate_full_from(&self, params: &[f64], guess: Option<&[Vec<WaveFunction>]>) -> Result<LossBreakdown> {
        if let Some(g) = guess {
            if g.len() != self.sizes.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.sizes.len(),
                    found: g.len(),
                });
            }
        }
        let coeffs = self.ansatz.coefficients(params)?;
        let per_size: Vec<SizeEval> = self
            .sizes
            .par_iter()
            .enumerate()
            .map(|(si, s)| self.evaluate_size(si, s, params, guess.map_or(&[][..], |g| &g[si])))
            .collect::<Result<Vec<_>>>()?;

        let extrapolated = if self.sizes.len() >= 2 {
            let gaps: BTreeMap<usize, f64> = per_size.iter().map(|e| (e.obs.n_sites, e.obs.gap)).collect();
            Some(extrapolate_gap(&gaps)?)
        } else {
            None
        };

        let mut contributions = Vec::new();
        let mut per_term = Vec::with_capacity(self.terms.len());
        for (ti, term) in self.terms.iter().enumerate() {
            let mut term_sum = 0.0;
            let mut push = |size: Option<usize>, value: f64, factor: f64| -> Result<()> {
                let c = term.weight * factor * value;
                if !c.is_finite() {
                    return Err(Error::NonFinite(match size {
                        Some(n) => format!("term '{}' at size {n}", term.name),
                        None => format!("term '{}'", term.name),
                    }));
                }
                term_sum += c;
                contributions.push(Contribution {
                    term: term.name.clone(),
                    size,
                    value,
                    contribution: c,
                });
                Ok(())
            };
            if term.kind.is_per_size() {
                for (si, s) in self.sizes.iter().enumerate() {
                    let g = term_weight(term, s);
                    if g == 0.0 {
                        continue;
                    }
                    push(Some(s.n_sites()), per_size[si].values[ti], g)?;
                }
            } else {
                let value = match &term.kind {
                    TermKind::ExtrapolatedGap => extrapolated.expect("validated").0,
                    TermKind::TargetValue { target, .. } => {
                        target_value_term(extrapolated.expect("validated").0, *target)
                    }
                    TermKind::RegularizationL1 { reference } => match reference {
                        Some(r) => regularization_l1(&coeffs, r),
                        None => regularization_l1(&coeffs, &vec![0.0; coeffs.len()]),
                    },
                    TermKind::BoxPenalty { bounds } => {
                        let b = bounds.as_ref().or(self.ansatz.map().param_box()).expect("validated");
                        box_penalty(params, b)
                    }
                    _ => unreachable!("per-size term"),
                };
                push(None, value, 1.0)?;
            }
            per_term.push(term_sum);
        }
        let total = contributions.iter().map(|c| c.contribution).sum();
        Ok(LossBreakdown {
            total,
            contributions,
            per_term,
            observables: per_size.into_iter().map(|e| e.obs).collect(),
            extrapolated_gap: extrapolated,
            params: params.to_vec(),
        })
    }

    /// Ground-state analysis of `H(params)` at every size.
    pub fn spectra(&self, params: &[f64]) -> Result<Vec<EvaluationReport>> {
        self.sizes
            .par_iter()
            .map(|s| {
                let h = self.ansatz.hamiltonian_at(params, &s.basis)?;
                eigs_low(&h, &s.basis, 1, &self.eigen).map_err(|e| e.at_size(s.n_sites(), "diagonalization"))
            })
            .collect()
    }

    fn evaluate_size(&self, si: usize, s: &SizeSpec, params: &[f64], guess: &[WaveFunction]) -> Result<SizeEval> {
        let n = s.n_sites();
        let h = self.ansatz.hamiltonian_at(params, &s.basis)?;
        let report =
            eigs_low_from(&h, &s.basis, 1, &self.eigen, guess).map_err(|e| e.at_size(n, "diagonalization"))?;
        let ground = report.ground_space();
        let (overlap, kl, moments) = match &s.reference {
            Some(r) => {
                let ov = subspace_overlap(r, ground).map_err(|e| e.at_size(n, "overlap"))?;
                let best = best_in_span(r, ground)?;
                let kl = kl_divergence(r, &best)?;
                let m = energy_moments(&h, r).map_err(|e| e.at_size(n, "energy_variance"))?;
                (Some(ov.min(1.0)), Some(kl), Some(m))
            }
            None => (None, None, None),
        };
        let mut values = vec![f64::NAN; self.terms.len()];
        for (ti, term) in self.terms.iter().enumerate() {
            if !term.kind.is_per_size() || term_weight(term, s) == 0.0 {
                continue;
            }
            values[ti] = match &term.kind {
                TermKind::Overlap { raw } => {
                    let ov = overlap.expect("validated");
                    if *raw {
                        ov
                    } else {
                        1.0 - ov
                    }
                }
                TermKind::Kl => kl.expect("validated"),
                TermKind::EnergyVariance => moments.expect("validated").variance,
                TermKind::GroundEnergy => report.e0(),
                TermKind::Gap => report.gap(),
                TermKind::SymmetryPenalty { .. } => {
                    let g = self.symmetry[ti][si].as_ref().expect("assembled");
                    let mut acc = 0.0;
                    for v in ground {
                        acc += expectation(g, v).map_err(|e| e.at_size(n, "symmetry"))?;
                    }
                    acc / ground.len() as f64
                }
                TermKind::TargetValue {
                    observable,
                    target,
                    size_targets,
                } => {
                    let t = size_targets.get(&n).copied().unwrap_or(*target);
                    let value = match observable {
                        TargetObservable::GroundEnergy => report.e0(),
                        TargetObservable::Gap => report.gap(),
                        _ => unreachable!("validated"),
                    };
                    target_value_term(value, t)
                }
                _ => unreachable!("global term"),
            };
        }
        Ok(SizeEval {
            values,
            obs: SizeObservables {
                n_sites: n,
                dim: s.basis.dim(),
                e0: report.e0(),
                gap: report.gap(),
                ground_degeneracy: report.ground_degeneracy,
                overlap,
                kl,
                energy_variance: moments.map(|m| m.variance),
                relative_variance: moments.and_then(|m| m.relative),
            },
        })
    }
}

struct SizeEval {
    values: Vec<f64>,
    obs: SizeObservables,
}

fn term_weight(term: &LossTerm, size: &SizeSpec) -> f64 {
    match &term.size_weights {
        Some(w) => w.get(&size.n_sites()).copied().unwrap_or(0.0),
        None => size.weight,
    }
}

impl Objective for LossSpec {
    fn dim(&self) -> usize {
        self.reduced_dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let b = LossSpec::evaluate(self, x)?;
        Ok(Evaluation {
            total: b.total,
            terms: b.per_term,
        })
    }

    fn term_names(&self) -> Vec<String> {
        LossSpec::term_names(self)
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gauge.project(x)
    }

    fn anchored(&self, x: &[f64]) -> Result<Option<Box<dyn Objective + '_>>> {
        Ok(Some(Box::new(AnchoredLoss {
            spec: self,
            guess: self.anchor_vectors(x)?,
        })))
    }
}

/// A loss whose eigensolves start from the eigenvectors at a nearby point.
struct AnchoredLoss<'a> {
    spec: &'a LossSpec,
    guess: Vec<Vec<WaveFunction>>,
}

impl Objective for AnchoredLoss<'_> {
    fn dim(&self) -> usize {
        self.spec.reduced_dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let params = self.spec.full_params(x)?;
        let b = self.spec.evaluate_full_from(&params, Some(&self.guess))?;
        Ok(Evaluation {
            total: b.total,
            terms: b.per_term,
        })
    }

    fn term_names(&self) -> Vec<String> {
        self.spec.term_names()
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spec.gauge.project(x)
    }
}

/// Convenience wrapper: `spec.evaluate(gamma)`.
pub fn evaluate_loss(spec: &LossSpec, gamma: &[f64]) -> Result<LossBreakdown> {
    spec.evaluate(gamma)
}

/// `sum_m |gamma_m - reference_m|`.
pub fn regularization_l1(gamma: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(gamma.len(), reference.len(), "regularization lengths differ");
    gamma.iter().zip(reference).map(|(g, r)| (g - r).abs()).sum()
}

/// `(value - target)^2`.
pub fn target_value_term(value: f64, target: f64) -> f64 {
    (value - target) * (value - target)
}

/// `BOX_STIFFNESS * sum_j dist_j^2` outside the box, zero inside and on its faces.
pub fn box_penalty(p: &[f64], bounds: &ParamBox) -> f64 {
    BOX_STIFFNESS * bounds.outside_distance_sq(p)
}

/// Least-squares intercept of `gap` against `1/N`, with the residual norm of the fit.
pub fn extrapolate_gap(gaps: &BTreeMap<usize, f64>) -> Result<(f64, f64)> {
    if gaps.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "gap extrapolation needs at least two sizes, got {}",
            gaps.len()
        )));
    }
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .map(|(&n, &g)| {
            if n == 0 {
                Err(Error::InvalidArgument("system size 0".into()))
            } else {
                Ok((1.0 / n as f64, g))
            }
        })
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok((intercept, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Boundary;
    use crate::operators::{ModelSpec, ParametrizationMap};

    #[test]
    fn scalar_helpers() {
        assert_eq!(regularization_l1(&[1.0, -2.0], &[0.0, 0.0]), 3.0);
        assert_eq!(regularization_l1(&[0.5, 0.5], &[1.0, 0.0]), 1.0);
        assert_eq!(target_value_term(2.0, 0.0), 4.0);
        assert_eq!(target_value_term(-1.0, 1.0), 4.0);
        let b = ParamBox::unit(2);
        assert_eq!(box_penalty(&[0.5, 1.0], &b), 0.0);
        assert_eq!(box_penalty(&[2.0, 0.5], &b), 1e4);
    }

    #[test]
    fn gap_extrapolation() {
        let gaps: BTreeMap<usize, f64> = [(4, 1.5), (6, 1.0 + 2.0 / 6.0), (8, 1.25)].into();
        let (i, r) = extrapolate_gap(&gaps).unwrap();
        assert!((i - 1.0).abs() < 1e-10 && r < 1e-10);
        let flat: BTreeMap<usize, f64> = [(4, 0.7), (10, 0.7)].into();
        assert!((extrapolate_gap(&flat).unwrap().0 - 0.7).abs() < 1e-14);
        assert!(extrapolate_gap(&[(4, 1.0)].into()).is_err());
    }

    #[test]
    fn gauges() {
        let g = Gauge::FreezeOne { index: 0, value: 1.0 };
        assert_eq!(g.expand(&[2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(g.reduce(&[1.0, 2.0, 3.0]), vec![2.0, 3.0]);
        let l = Gauge::L1Sum { total: 1.0 };
        assert_eq!(l.project(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(Gauge::L1Sum { total: 4.0 }.project(&[-1.0, 3.0]).unwrap(), vec![-1.0, 3.0]);
        assert!(matches!(l.project(&[0.0, 0.0]), Err(Error::DegenerateGauge { .. })));
        assert!(g.validate(1).is_err());
        assert!(Gauge::FreezeOne { index: 3, value: 1.0 }.validate(3).is_err());
    }

    fn tfim_spec(terms: Vec<LossTerm>, reference: Option<WaveFunction>) -> LossSpec {
        let basis = Arc::new(SpinBasis::full(4, 2, Boundary::Periodic).unwrap());
        let ansatz = Arc::new(
            HamiltonianAnsatz::from_model(ModelSpec::TransverseFieldIsing {}, &[], ParametrizationMap::linear(2))
                .unwrap(),
        );
        LossSpec::new(
            terms,
            vec![SizeSpec {
                basis,
                reference,
                weight: 1.0,
            }],
            ansatz,
            Gauge::None,
            EigenOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn variance_zero_on_exact_eigenstate() {
        // All-up state is an eigenstate of the ZZ coupling.
        let basis = Arc::new(SpinBasis::full(4, 2, Boundary::Periodic).unwrap());
        let up = WaveFunction::basis_state(basis, 0).unwrap();
        let spec = tfim_spec(vec![LossTerm::new(TermKind::EnergyVariance, 1.0)], Some(up));
        let b = spec.evaluate(&[1.0, 0.0]).unwrap();
        assert!(b.total.abs() < 1e-12);
        assert!(spec.evaluate(&[1.0, 0.5]).unwrap().total > 1e-3);
    }

    #[test]
    fn ground_energy_term() {
        let spec = tfim_spec(vec![LossTerm::new(TermKind::GroundEnergy, 2.0)], None);
        let b = spec.evaluate(&[-1.0, 0.0]).unwrap();
        // Ferromagnetic ring of 4: e0 = -4.
        assert!((b.total + 8.0).abs() < 1e-10);
        assert_eq!(b.contributions.len(), 1);
        assert_eq!(b.observables[0].ground_degeneracy, 2);
    }

    #[test]
    fn missing_reference_is_rejected() {
        let basis = Arc::new(SpinBasis::full(4, 2, Boundary::Periodic).unwrap());
        let ansatz = Arc::new(
            HamiltonianAnsatz::from_model(ModelSpec::TransverseFieldIsing {}, &[], ParametrizationMap::linear(2))
                .unwrap(),
        );
        let r = LossSpec::new(
            vec![LossTerm::new(TermKind::Overlap { raw: false }, 1.0)],
            vec![SizeSpec {
                basis,
                reference: None,
                weight: 1.0,
            }],
            ansatz,
            Gauge::None,
            EigenOptions::default(),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn term_kinds_parse_from_toml() {
        #[derive(Deserialize)]
        struct W {
            t: Vec<TermKind>,
        }
        let w: W = toml::from_str(
            r#"
            [[t]]
            kind = "overlap"
            [[t]]
            kind = "target_value"
            observable = "ground_energy"
            target = -3.0
            [[t]]
            kind = "symmetry_penalty"
            generator = "total_spin_casimir"
            "#,
        )
        .unwrap();
        assert_eq!(w.t[0], TermKind::Overlap { raw: false });
    }
}
