//! Fixtures shared by the kernel benchmarks.

use hamsearch::runner::{Experiment, ExperimentConfig, RunMode};
use hamsearch::{Result, SparseMatrix, WaveFunction};

/// A prepared planted-recovery problem on the 3-local real Pauli basis, with the
/// Hamiltonian and reference state at the first random start.
pub struct Fixture {
    pub experiment: Experiment,
    /// Search coordinates of the first start.
    pub x: Vec<f64>,
    pub hamiltonian: SparseMatrix,
    pub reference: WaveFunction,
}

pub fn planted_config(n_sites: usize) -> Result<ExperimentConfig> {
    let toml = format!(
        r#"
schema_version = 1
seed = 3

[system]
model = {{ name = "pauli_strings_k_local", k = 3 }}
train_sizes = [{n_sites}]

[reference]
kind = "planted"
support = ["X", "ZZ", "XIX", "XZZ", "YZY", "ZXZ", "ZZX"]
seed = 3

[loss]
gauge = {{ kind = "freeze_one", index = 0, value = 1.0 }}

[[loss.terms]]
kind = "overlap"
weight = 1.0

[[loss.terms]]
kind = "kl"
weight = 0.2

[[loss.terms]]
kind = "energy_variance"
weight = 1.0
"#
    );
    ExperimentConfig::from_toml_str(&toml)
}

pub fn planted(n_sites: usize) -> Result<Fixture> {
    let config = planted_config(n_sites)?;
    let experiment = Experiment::prepare(&config, RunMode::Bench, None)?;
    let x = experiment.starts()?.remove(0);
    let params = experiment.loss.full_params(&x)?;
    let basis = &experiment.train[0];
    let hamiltonian = experiment.ansatz.hamiltonian_at(&params, basis)?;
    let reference = experiment.references[&n_sites].clone();
    Ok(Fixture {
        experiment,
        x,
        hamiltonian,
        reference,
    })
}
