//! Exact steady states and thermodynamic figures of merit for heat-driven
//! optomechanical piston engines.
//!
//! * [`fock`]: truncated Fock spaces and sparse bosonic operators
//! * [`model`]: Hamiltonians and Liouvillians of the single-cavity and
//!   cascade engines
//! * [`steady`]: stationary density matrices
//! * [`observables`]: g₂, dissipated power, power under load, free energy,
//!   Wigner functions
//! * [`classical`]: the classical Langevin engine and its ensemble statistics

mod blocktri;
pub mod classical;
pub mod fock;
pub mod model;
pub mod observables;
pub mod sparse;
pub mod steady;

use thiserror::Error;

pub use classical::{ClassicalConfig, ClassicalEnsemble, ClassicalError};
pub use fock::{AlgebraError, ModeOperator, TruncatedSpace};
pub use model::{EngineConfig, EngineVariant, ModelError, Superoperator};
pub use observables::{FigureOfMerit, MechanicalMarginal, ObservableError};
pub use steady::{DensityMatrix, SolveOptions, SolverError, SolverMethod};

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
