//! Numerical laboratory for boundary control of the Korteweg–de Vries equation
//! on an interval `[0, L]`.
//!
//! The equation `y_t + (a y)_x + y_xxx (+ y y_x) = f` is driven through the
//! boundary configuration `y_xx(0,t) = h1`, `y_x(L,t) = h2`, `y_xx(L,t) = h3`,
//! with `h2` acting as the single control input. The crate provides
//!
//! * [`critical_lengths`] — exact arithmetic of the lengths at which the
//!   linearized system loses controllability, drift perturbation analysis and
//!   safe drift selection;
//! * [`solver`] — Crank–Nicolson forward solvers for the linear and nonlinear
//!   initial-boundary-value problems, discrete norms and empirical estimate
//!   reports;
//! * [`linear_control`] — the discrete control-to-final-state operator, its
//!   singular spectrum, least-norm control synthesis and reachability
//!   diagnostics;
//! * [`nonlinear_control`] — fixed-point steering of small states to nearby
//!   constants and back, built on the linear synthesis;
//! * [`return_method`] — the three-phase steer/hold/steer pipeline that works
//!   at critical lengths, with an independent re-simulation audit.

pub mod critical_lengths;
pub mod grid;
pub mod linear_control;
pub mod nonlinear_control;
pub mod return_method;
pub mod solver;

pub use grid::{BoundarySignal, Drift, Forcing, ShapeError, SpaceTimeGrid, Trajectory};
