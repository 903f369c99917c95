use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),

    #[error("no atomic data for series l={l}, j={twice_j}/2")]
    UnknownSeries { l: u32, twice_j: u32 },

    #[error("atomic data: {0}")]
    AtomicData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("polarizability of {level} not converged: {relative_change:.3e} relative change with basis size")]
    PolarizabilityNotConverged { level: String, relative_change: f64 },

    #[error("basis: {0}")]
    Basis(String),

    #[error("basis of {0} states exceeds the dimension guard")]
    DimensionOverflow(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("{0}; a different interatomic distance should be selected")]
    NoResonance(String),

    #[error("optimizer did not converge after {iterations} iterations (residuals {residuals:?} rad)")]
    NotConverged { iterations: usize, residuals: [f64; 3] },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical physics rather than of the inputs or the filesystem.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::PolarizabilityNotConverged { .. }
                | Error::Integration(_)
                | Error::NotConverged { .. }
                | Error::NoResonance(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
