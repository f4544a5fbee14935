//! Synthetic problems with a known optimum: random coefficients on a chosen support.

use crate::error::{Error, Result};
use crate::hilbert::{SpinBasis, WaveFunction};
use crate::operators::{HamiltonianAnsatz, ModelSpec, ParametrizationMap};
use crate::spectra::{eigs_low, EigenOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Draws attempted before giving up on a gapped, non-degenerate instance.
pub const MAX_PLANTED_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub struct PlantedOptions {
    pub seed: u64,
    pub coefficient_range: [f64; 2],
    pub min_gap: f64,
    /// Operator index pinned to a value (it must lie in the support).
    pub fixed: Option<(usize, f64)>,
    /// Rescale so that the coefficients' absolute values sum to this.
    pub l1_total: Option<f64>,
    pub eigen: EigenOptions,
}

impl Default for PlantedOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            coefficient_range: [0.5, 1.5],
            min_gap: 1e-3,
            fixed: None,
            l1_total: None,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedProblem {
    /// Labels of every model operator.
    pub labels: Vec<String>,
    /// Indices into `labels` carrying nonzero coefficients.
    pub support: Vec<usize>,
    /// The planted coefficients over all model operators.
    pub coefficients: Vec<f64>,
    /// Ground state of the planted model per system size.
    pub references: BTreeMap<usize, WaveFunction>,
    pub gaps: BTreeMap<usize, f64>,
    pub attempts: usize,
}

/// Draws coefficients uniformly from the range on `support` (zero elsewhere) until the
/// model has a unique ground state with gap above `min_gap` on every basis.
pub fn generate_planted_problem(
    model: &ModelSpec,
    support: &[usize],
    bases: &[Arc<SpinBasis>],
    options: &PlantedOptions,
) -> Result<PlantedProblem> {
    let labels = model.labels()?;
    let n = labels.len();
    if support.is_empty() {
        return Err(Error::Config("planted support must not be empty".into()));
    }
    if let Some(&bad) = support.iter().find(|&&s| s >= n) {
        return Err(Error::Config(format!("support index {bad} out of range for {n} operators")));
    }
    if let Some((i, _)) = options.fixed {
        if !support.contains(&i) {
            return Err(Error::Config(format!(
                "the gauge-fixed operator {:?} must belong to the planted support",
                labels.get(i).map(String::as_str).unwrap_or("?")
            )));
        }
    }
    let full = HamiltonianAnsatz::from_model(model.clone(), &[], ParametrizationMap::linear(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let [lo, hi] = options.coefficient_range;
    'attempt: for attempt in 1..=MAX_PLANTED_ATTEMPTS {
        let mut coefficients = vec![0.0; n];
        for &s in support {
            coefficients[s] = lo + (hi - lo) * rng.random::<f64>();
        }
        if let Some((i, v)) = options.fixed {
            coefficients[i] = v;
        }
        if let Some(total) = options.l1_total {
            let sum: f64 = coefficients.iter().map(|c| c.abs()).sum();
            for c in coefficients.iter_mut() {
                *c *= total / sum;
            }
        }
        let mut references = BTreeMap::new();
        let mut gaps = BTreeMap::new();
        for basis in bases {
            let h = full.hamiltonian_at(&coefficients, basis)?;
            let report = eigs_low(&h, basis, 1, &options.eigen)?;
            if report.ground_degeneracy != 1 || report.gap() <= options.min_gap {
                log::debug!(
                    "planted draw {attempt} rejected at N = {}: degeneracy {}, gap {:.3e}",
                    basis.n_sites(),
                    report.ground_degeneracy,
                    report.gap()
                );
                continue 'attempt;
            }
            gaps.insert(basis.n_sites(), report.gap());
            references.insert(basis.n_sites(), report.eigenvectors[0].clone());
        }
        return Ok(PlantedProblem {
            labels,
            support: support.to_vec(),
            coefficients,
            references,
            gaps,
            attempts: attempt,
        });
    }
    Err(Error::PlantedDegenerate {
        attempts: MAX_PLANTED_ATTEMPTS,
    })
}
