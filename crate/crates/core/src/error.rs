//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation was called with arguments violating its
    /// preconditions (grid too small, weight negative, time out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point lies outside the coordinate chart of the manifold it was
    /// used with, or has the wrong coordinate family.
    #[error("location outside chart: {0}")]
    OutsideChart(String),

    /// Charge / potential / manifold size or identity mismatch.
    #[error("manifold mismatch: {0}")]
    ManifoldMismatch(String),

    /// The mass side condition for balayage fails: the total mass of sigma
    /// exceeds the total mass of lambda on a closed manifold.
    #[error("infeasible balayage: {0}")]
    Infeasible(String),

    /// An iterative solver did not reach its tolerance within the cap.
    #[error("solver did not converge: {0}")]
    SolverDiverged(String),

    /// The operation is not defined for this manifold family.
    #[error("unsupported manifold family: {0}")]
    UnsupportedFamily(String),

    /// Scenario configuration errors (parse or validation).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
