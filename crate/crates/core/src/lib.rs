//! Search for Hamiltonians whose ground state matches a given target state.

pub mod error;
pub mod hilbert;
pub mod loss;
pub mod operators;
pub mod optimizer;
pub mod runner;
pub mod scalar;
pub mod spectra;

pub use error::{Error, Result};
pub use hilbert::{Boundary, SpinBasis, WaveFunction};
pub use operators::{HamiltonianAnsatz, ModelSpec, OperatorBasis, ParamBox, ParametrizationMap, SparseMatrix};
pub use spectra::{eigs_low, eigs_low_from, EigenOptions, EvaluationReport};
pub use loss::{evaluate_loss, Gauge, LossBreakdown, LossSpec, LossTerm, SizeSpec, TermKind};
pub use optimizer::{cgd_minimize, multistart, steepest_descent_minimize, CgdConfig, Objective, OptimizationTrace};
pub use runner::{
    generate_planted_problem, make_reference_state, run_extrapolate, run_recover, run_scan, ExperimentConfig,
    RecoveryReport,
};
