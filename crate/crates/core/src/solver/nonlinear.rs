//! Picard iteration for the nonlinear problem
//! `y_t + (a y)_x + y_xxx + y y_x = f`.
//!
//! Each iterate solves the linear problem with the lagged forcing
//! `f − y⁽ᵏ⁾ y⁽ᵏ⁾_x`; the spatial derivative in the nonlinearity is the
//! scheme's own first-derivative operator (boundary rows included), which
//! makes steady constants exact fixed points and keeps the fixed point
//! identical to the one the steering construction produces. The iteration is
//! chained over time slabs: if a slab fails to contract, the slab length is
//! halved and the solve restarts, mirroring the continuation argument that
//! extends a local contraction to the whole interval.

use nalgebra::DVector;

use crate::grid::{BoundarySignal, Drift, Forcing, SpaceTimeGrid, Trajectory};
use crate::solver::linear::LinearStepper;
use crate::solver::scheme::{dx_plain, SpatialOps};
use crate::solver::SolverError;

/// Converged trajectory together with the iteration record. `iterations` is
/// the Picard depth: the maximum number of iterations any time slab needed.
/// `contraction_history` lists the ratios of successive update norms
/// `‖y⁽ᵏ⁺¹⁾ − y⁽ᵏ⁾‖_Z / ‖y⁽ᵏ⁾ − y⁽ᵏ⁻¹⁾‖_Z` across all slabs.
#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub contraction_history: Vec<f64>,
}

/// `(ε − y) ∘ y_x` evaluated with the scheme derivative and the trajectory's
/// own boundary data; `ε = 0` yields the pure nonlinear forcing `−y y_x`.
pub(crate) fn gamma_forcing(
    ops: &SpatialOps,
    y: &Trajectory,
    h: &BoundarySignal,
    eps: f64,
) -> Forcing {
    let nt = y.grid().nt();
    let mut slices = Vec::with_capacity(nt + 1);
    for n in 0..=nt {
        let u = y.slice(n);
        let mut yx = ops.d1.apply(u, h.h1(n), h.h2(n), h.h3(n));
        for i in 0..u.len() {
            yx[i] *= eps - u[i];
        }
        slices.push(yx);
    }
    Forcing::Values(slices)
}

fn add_forcings(base: &Forcing, extra: Forcing, grid: &SpaceTimeGrid) -> Forcing {
    match (base, extra) {
        (Forcing::Zero, e) => e,
        (b, Forcing::Zero) => b.clone(),
        (Forcing::Values(b), Forcing::Values(mut e)) => {
            let _ = grid;
            for (ev, bv) in e.iter_mut().zip(b) {
                *ev += bv;
            }
            Forcing::Values(e)
        }
    }
}

/// Picard solve on a single slab; returns the trajectory, the iteration count
/// and the recorded contraction ratios.
fn picard_slab(
    stepper: &LinearStepper,
    ops: &SpatialOps,
    lagged_drift: Option<&Trajectory>,
    y0: &DVector<f64>,
    h: &BoundarySignal,
    f: &Forcing,
    tol: f64,
    max_iter: usize,
) -> Result<(Trajectory, usize, Vec<f64>), SolverError> {
    let grid = stepper.grid().clone();
    let mut y = Trajectory::zeros(&grid);
    let mut prev_update: Option<f64> = None;
    let mut history = Vec::new();

    for k in 1..=max_iter {
        let mut forcing = add_forcings(f, gamma_forcing(ops, &y, h, 0.0), &grid);
        if let Some(a) = lagged_drift {
            // Non-constant drift is lagged into the forcing: −(a y)_x.
            forcing = add_forcings(&forcing, lagged_transport(ops, a, &y, h), &grid);
        }
        let y_next = stepper.solve(y0, h, &forcing)?;
        let update = y_next.sub(&y)?.zt_norm();
        if let Some(p) = prev_update {
            if p > 0.0 {
                history.push(update / p);
            }
        }
        y = y_next;
        if update < tol {
            return Ok((y, k, history));
        }
        prev_update = Some(update);
    }
    Err(SolverError::NoConvergence {
        iterations: max_iter,
        slab_steps: grid.nt(),
        last_update: prev_update.unwrap_or(f64::INFINITY),
    })
}

/// `−(a y)_x = −(a y_x + a_x y)` for a drift field, with the scheme derivative
/// for `y` and a plain difference for `a`.
fn lagged_transport(
    ops: &SpatialOps,
    a: &Trajectory,
    y: &Trajectory,
    h: &BoundarySignal,
) -> Forcing {
    let nt = y.grid().nt();
    let mut slices = Vec::with_capacity(nt + 1);
    for n in 0..=nt {
        let u = y.slice(n);
        let av = a.slice(n);
        let yx = ops.d1.apply(u, h.h1(n), h.h2(n), h.h3(n));
        let ax = dx_plain(ops.dx, av);
        let mut out = DVector::zeros(u.len());
        for i in 0..u.len() {
            out[i] = -(av[i] * yx[i] + ax[i] * u[i]);
        }
        slices.push(out);
    }
    Forcing::Values(slices)
}

/// Fixed point of `y ↦ Λ_a(y0, h, f − y y_x)`, chained over time slabs.
///
/// The default slab is a quarter of the interval; a slab that fails to meet
/// `tol` within `max_iter` iterations halves the slab length and restarts, up
/// to six times.
pub fn solve_nonlinear(
    y0: &DVector<f64>,
    h: &BoundarySignal,
    f: &Forcing,
    a: &Drift,
    grid: &SpaceTimeGrid,
    tol: f64,
    max_iter: usize,
) -> Result<NonlinearSolution, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::Precondition(format!("tol must be positive, got {tol}")));
    }
    if y0.len() != grid.n_nodes() {
        return Err(crate::grid::ShapeError(format!(
            "initial state has {} nodes, grid has {}",
            y0.len(),
            grid.n_nodes()
        ))
        .into());
    }
    h.check_len(grid)?;
    f.check_shape(grid)?;
    if let Drift::Field(field) = a {
        if field.grid() != grid {
            return Err(crate::grid::ShapeError("drift field grid differs from solve grid".into()).into());
        }
    }

    let nt = grid.nt();
    let mut slab_steps = nt.div_ceil(4);
    let mut halvings = 0;
    'outer: loop {
        let mut slices: Vec<DVector<f64>> = Vec::with_capacity(nt + 1);
        slices.push(y0.clone());
        let mut depth = 0usize;
        let mut history = Vec::new();

        let mut start = 0usize;
        while start < nt {
            let end = (start + slab_steps).min(nt);
            let sub = grid.time_window(start, end);
            let (stepper, lagged) = match a {
                Drift::Constant(ac) => (LinearStepper::new(&sub, *ac)?, None),
                Drift::Field(field) => {
                    (LinearStepper::new(&sub, 0.0)?, Some(field.window(start, end)))
                }
            };
            let ops = SpatialOps::new(&sub);
            let result = picard_slab(
                &stepper,
                &ops,
                lagged.as_ref(),
                slices.last().expect("slab chain starts from y0"),
                &h.window(start, end),
                &f.window(start, end),
                tol,
                max_iter,
            );
            match result {
                Ok((traj, iters, hist)) => {
                    depth = depth.max(iters);
                    history.extend(hist);
                    for n in 1..=sub.nt() {
                        slices.push(traj.slice(n).clone());
                    }
                    start = end;
                }
                Err(SolverError::NoConvergence { .. }) if halvings < 6 && slab_steps > 1 => {
                    slab_steps = (slab_steps / 2).max(1);
                    halvings += 1;
                    continue 'outer;
                }
                Err(e) => return Err(e),
            }
        }

        return Ok(NonlinearSolution {
            trajectory: Trajectory::from_slices_unchecked(grid.clone(), slices),
            iterations: depth,
            contraction_history: history,
        });
    }
}
