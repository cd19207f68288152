//! Forward solvers for the linear and nonlinear initial-boundary-value
//! problems `y_t + (a y)_x + y_xxx (+ y y_x) = f` with boundary data
//! `y_xx(0) = h1`, `y_x(L) = h2`, `y_xx(L) = h3`.
//!
//! Time integration is Crank–Nicolson on the full linear operator; the
//! nonlinearity is handled by an outer Picard iteration that mirrors the
//! fixed-point construction used in the well-posedness argument, chained over
//! time slabs.

mod estimates;
mod linear;
mod nonlinear;
pub(crate) mod scheme;

pub use estimates::{bilinear_estimate_report, energy_balance_report, EstimateReport};
pub use linear::{solve_linear, LinearStepper};
pub use nonlinear::{solve_nonlinear, NonlinearSolution};

pub(crate) use nonlinear::gamma_forcing;

use thiserror::Error;

use crate::grid::ShapeError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("implicit step operator is singular at step {step} (t = {time})")]
    SingularSystem { step: usize, time: f64 },
    #[error("solution lost finiteness at step {step} (t = {time}, max |u| = {max_abs:.3e} before the step)")]
    NumericalBlowup { step: usize, time: f64, max_abs: f64 },
    #[error("Picard iteration did not converge after {iterations} iterations on a slab of {slab_steps} steps (last update {last_update:.3e})")]
    NoConvergence { iterations: usize, slab_steps: usize, last_update: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}
