//! Simulation and verification toolkit for the one-dimensional
//! Glauber-Kawasaki reaction-diffusion system at its dynamical critical
//! point: exact and Monte Carlo dynamics, tilted reference measures, the
//! pair-correlation kernel, limiting SDE/PDE/Gaussian-field objects, and a
//! statistics harness that turns ensembles into pass/fail reports.

pub mod engine;
pub mod exact;
pub mod kernel_g;
pub mod lattice;
pub mod limits;
pub mod measures;
pub mod numeric;
pub mod observables;
pub mod pipelines;
pub mod stats;

pub use lattice::{Configuration, Params};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("state space too large: n = {0} exceeds the exact-enumeration limit {1}")]
    TooLarge(usize, usize),
    #[error("event budget exceeded after {0} events")]
    BudgetExceeded(u64),
    #[error("mcmc convergence diagnostic failed: {0}")]
    NonConvergence(String),
    #[error("trajectory diverged: {0}")]
    Divergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
