//! Data-driven constitutive modeling with SPD tangent networks, embedded in a
//! nonlinear finite element solver.
//!
//! The library learns incremental constitutive relations of the form
//! `Δσ = L Lᵀ Δε`, where a feed-forward network predicts the Cholesky factor
//! `L` of the tangent stiffness. Because `L Lᵀ` is symmetric positive
//! semidefinite by construction and the update is incremental, the learned
//! relation stays time-consistent and keeps implicit dynamic simulations
//! stable even under extrapolation.
//!
//! Main pieces:
//! - [`linalg`]: Voigt vectors, packed Cholesky factors, small dense solves,
//!   and a banded LU for global FEM systems.
//! - [`net`]: feed-forward networks with exact reverse-mode derivatives.
//! - [`model`]: the SPD constitutive family plus direct-output baselines.
//! - [`reference`]: ground-truth material laws used for data generation.
//! - [`fem`]: truss / 9-node quad elements, generalized-α dynamics, forward
//!   simulation with reference or learned materials.
//! - [`train`]: direct and indirect (through-time) losses with exact
//!   gradients, stress-field recovery, L-BFGS and Adam.
//! - [`bench`]: experiment configurations and the CLI entry points.

pub mod bench;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod model;
pub mod net;
pub mod reference;
pub mod train;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("training failure: {0}")]
    Training(String),
    #[error("time step failed to converge: {0}")]
    StepDiverged(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Training(_) => 4,
            Error::Solver(_) | Error::StepDiverged(_) => 1,
        }
    }
}
