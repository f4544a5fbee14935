use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the search pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty sector: no configuration of {n_sites} sites (local dim {local_dim}) has 2*Sz = {twice_sz}")]
    EmptySector {
        n_sites: usize,
        local_dim: usize,
        twice_sz: i64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("wavefunctions live in different bases")]
    BasisMismatch,

    #[error("span is not orthonormal (max Gram defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },

    #[error("operator term {term} maps out of the active sector")]
    SectorViolation { term: String },

    #[error("operator is not hermitian (max |A - A^dagger| = {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("Lanczos did not converge after {restarts} restarts (residuals {residuals:?})")]
    LanczosNonConvergence { restarts: usize, residuals: Vec<f64> },

    #[error("degenerate gauge: sum of |gamma| = {sum:.3e} cannot be rescaled")]
    DegenerateGauge { sum: f64 },

    #[error("evaluation failed at N = {n_sites} ({context}): {source}")]
    Backend {
        n_sites: usize,
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("planted problem stays degenerate or gapless after {attempts} draws; try a different support")]
    PlantedDegenerate { attempts: usize },

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema version {found} is not supported (expected {expected}); migrate the file first")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// True for problems with user input rather than with the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownName(_)
                | Error::SchemaVersion { .. }
                | Error::TomlDe(_)
                | Error::TomlSer(_)
                | Error::InvalidArgument(_)
                | Error::EmptySector { .. }
        )
    }

    pub(crate) fn at_size(self, n_sites: usize, context: impl Into<String>) -> Error {
        Error::Backend {
            n_sites,
            context: context.into(),
            source: Box::new(self),
        }
    }
}
