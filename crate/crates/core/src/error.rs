use thiserror::Error;

/// Errors produced anywhere in the solver and ROM pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid quadrature: {0}")]
    Quadrature(String),

    #[error("invalid cross sections: {0}")]
    CrossSections(String),

    #[error("singular local cell matrix (group {group}, direction {direction}, material {material})")]
    SingularCell {
        group: usize,
        direction: usize,
        material: usize,
    },

    #[error("non-finite value in operator output at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("dense operator of size {size} exceeds the oracle guard of {limit}")]
    OracleTooLarge { size: usize, limit: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("FOM solve did not converge at theta1={theta1}, theta2={theta2} (relative residual {residual:.3e})")]
    NotConverged {
        theta1: f64,
        theta2: f64,
        residual: f64,
    },

    #[error("rank {rank} exceeds the number of snapshots ({columns})")]
    RankTooLarge { rank: usize, columns: usize },

    #[error("reduced system is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("library fingerprint mismatch: file has {found}, config gives {expected}")]
    Fingerprint { expected: String, found: String },

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::NonFinite { .. }
                | Error::Singular(_)
                | Error::SingularCell { .. }
                | Error::RankDeficient { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
