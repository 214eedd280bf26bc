use std::fmt;

use thiserror::Error;

use crate::frames::Rotation;

/// Block of the hybrid normal matrix that failed a rank check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalBlock {
    Ambiguity,
    Attitude,
}

impl fmt::Display for NormalBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalBlock::Ambiguity => f.write_str("ambiguity"),
            NormalBlock::Attitude => f.write_str("attitude"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("satellite geometry synthesis failed after {attempts} draws")]
    GeometrySynthesis { attempts: usize },

    #[error("covariance is not symmetric positive definite: {0}")]
    CovarianceNotSpd(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("azimuth undefined near the pole (|cos elevation| = {0:e})")]
    ParameterizationSingularity(f64),

    #[error("singular Fisher information: {0}")]
    SingularFim(String),

    #[error("rank-deficient normal matrix in the {block} block (condition number {condition:e})")]
    RankDeficient { block: NormalBlock, condition: f64 },

    #[error("weighted SO(3) fix did not converge (best cost {cost:e})")]
    NonConvergence { best: Rotation, cost: f64 },

    #[error("attitude not observable: {0}")]
    Observability(String),

    #[error("model error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;
