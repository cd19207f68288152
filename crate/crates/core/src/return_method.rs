//! Three-phase controllability pipeline for critical lengths: steer the
//! initial state to a small constant on `[0, T/3]`, hold the constant with
//! zero control on `[T/3, 2T/3]`, steer the constant to the target on
//! `[2T/3, T]`, and glue. The constant hold costs nothing because every
//! constant is an exact steady state of the discrete scheme with zero
//! control; traveling through it restores the controllability the linearized
//! system loses at the critical length.

use nalgebra::DVector;
use thiserror::Error;

use crate::critical_lengths::{self, DEFAULT_TOL};
use crate::grid::{l2_norm, BoundarySignal, Drift, Forcing, ShapeError, SpaceTimeGrid, Trajectory};
use crate::nonlinear_control::{
    local_steer_off_critical, steer_from_constant_around, steer_to_constant_around, select_epsilon,
    SteerError, SteeringConfig, SteeringResult,
};
use crate::solver::{solve_nonlinear, SolverError};

/// Re-simulation audit of a plan: Z-norm deviation between the independent
/// one-pass solve and the planned trajectory, per-phase breakdown, and the
/// final-time error.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub znorm_deviation: f64,
    pub final_error: f64,
    pub phase_deviation: [f64; 3],
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("steering phase {phase} failed after {d_restarts} d-restarts: {source}")]
    Phase { phase: u8, d_restarts: usize, source: SteerError },
    #[error("data norm {norm:.3e} is outside the admissible ball delta = {delta:.3e}")]
    OutsideBall { norm: f64, delta: f64 },
    #[error("plan audit failed: deviation {:.3e}, final error {:.3e}, tolerance {:.3e}", report.znorm_deviation, report.final_error, report.tolerance)]
    Audit { report: AuditReport },
    #[error(transparent)]
    Steer(#[from] SteerError),
    #[error(transparent)]
    Critical(#[from] critical_lengths::CriticalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Knobs of the three-phase construction on top of the per-phase steering.
#[derive(Debug, Clone)]
pub struct ReturnConfig {
    pub steering: SteeringConfig,
    /// Intermediate constant; `None` selects `delta / 2`.
    pub d: Option<f64>,
    /// End-to-end terminal tolerance (L² at time T); default `1e-2`.
    pub end_to_end_tol: f64,
    /// Linearization base drift (0 for the plain system).
    pub c: f64,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        Self { steering: SteeringConfig::default(), d: None, end_to_end_tol: 1e-2, c: 0.0 }
    }
}

/// Assembled three-phase plan. Controls and trajectories are glued on the
/// full horizon `[0, T]`; the hold phase is exactly constant, so the glued
/// trajectory may jump by at most the phase terminal errors at the two
/// joints.
#[derive(Debug)]
pub struct ReturnPlan {
    pub t_final: f64,
    pub length: f64,
    pub c: f64,
    pub d: f64,
    pub epsilon: f64,
    pub phase1: SteeringResult,
    pub phase2: Trajectory,
    pub phase3: SteeringResult,
    pub glued_control: BoundarySignal,
    pub glued_trajectory: Trajectory,
    pub end_to_end_error: f64,
    pub audit_tolerance: f64,
    pub d_restarts: usize,
}

/// Result of [`plan_return`]: the three-phase plan at a critical length, or
/// the direct local steering when the length is not critical for `c`.
pub enum ReturnOutcome {
    Plan(Box<ReturnPlan>),
    /// The length is not critical; the single-phase local steering applies.
    Local(SteeringResult),
}

/// Steers `y0` to `y_t` in time `t_final` on `[0, L]`.
///
/// At a critical length this builds the three-phase plan; otherwise the
/// problem is delegated to the local off-critical steering.
pub fn plan_return(
    y0: &DVector<f64>,
    y_t: &DVector<f64>,
    t_final: f64,
    length: f64,
    cfg: &ReturnConfig,
) -> Result<ReturnOutcome, PlanError> {
    let grid_probe = SpaceTimeGrid::new(length, 0.0, t_final, cfg.steering.nx, cfg.steering.nt)
        .map_err(|e| ShapeError(e.to_string()))?;
    let dx = grid_probe.dx();

    if critical_lengths::is_critical(length, cfg.c, DEFAULT_TOL)?.is_none() {
        let result = local_steer_off_critical(y0, y_t, cfg.c, t_final, length, &cfg.steering)?;
        return Ok(ReturnOutcome::Local(result));
    }

    // The c parameter selects the transport coefficient 1 + c of the system;
    // data stays small around the zero state, whose linearization carries the
    // critical set of c.
    let delta = cfg.steering.delta;
    for v in [y0, y_t] {
        let norm = l2_norm(dx, v);
        if norm >= delta {
            return Err(PlanError::OutsideBall { norm, delta });
        }
    }

    let tau = t_final / 3.0;
    let nt_phase = cfg.steering.nt;
    let phase_grid = SpaceTimeGrid::new(length, 0.0, tau, cfg.steering.nx, nt_phase)
        .map_err(|e| ShapeError(e.to_string()))?;

    // One auxiliary drift for both steering phases.
    let epsilon = match cfg.steering.epsilon {
        Some(e) => e,
        None => select_epsilon(length, cfg.c, &phase_grid, cfg.steering.preference, cfg.steering.seed)?,
    };

    let mut d = cfg.d.unwrap_or(delta / 2.0);
    let mut d_restarts = 0usize;
    loop {
        let attempt = build_phases(y0, y_t, d, tau, length, epsilon, cfg);
        match attempt {
            Ok((phase1, phase3)) => {
                let plan = glue(
                    phase1,
                    phase3,
                    d,
                    epsilon,
                    t_final,
                    length,
                    cfg,
                    &phase_grid,
                    d_restarts,
                )?;
                return Ok(ReturnOutcome::Plan(Box::new(plan)));
            }
            Err((phase, source)) => {
                if d_restarts >= cfg.steering.max_restarts || matches!(source, SteerError::OutsideBall { .. }) {
                    return Err(PlanError::Phase { phase, d_restarts, source });
                }
                d *= 0.5;
                d_restarts += 1;
            }
        }
    }
}

fn build_phases(
    y0: &DVector<f64>,
    y_t: &DVector<f64>,
    d: f64,
    tau: f64,
    length: f64,
    epsilon: f64,
    cfg: &ReturnConfig,
) -> Result<(SteeringResult, SteeringResult), (u8, SteerError)> {
    let mut cfg1 = cfg.steering.clone();
    cfg1.t_start = 0.0;
    cfg1.epsilon = Some(epsilon);
    let phase1 = steer_to_constant_around(y0, d, tau, length, cfg.c, &cfg1).map_err(|e| (1, e))?;

    let mut cfg3 = cfg.steering.clone();
    cfg3.t_start = 2.0 * tau;
    cfg3.epsilon = Some(epsilon);
    let phase3 =
        steer_from_constant_around(d, y_t, tau, length, cfg.c, &cfg3).map_err(|e| (3, e))?;
    Ok((phase1, phase3))
}

#[allow(clippy::too_many_arguments)]
fn glue(
    phase1: SteeringResult,
    phase3: SteeringResult,
    d: f64,
    epsilon: f64,
    t_final: f64,
    length: f64,
    cfg: &ReturnConfig,
    phase_grid: &SpaceTimeGrid,
    d_restarts: usize,
) -> Result<ReturnPlan, PlanError> {
    let nt_phase = phase_grid.nt();
    let tau = t_final / 3.0;
    let hold_grid = SpaceTimeGrid::new(length, tau, 2.0 * tau, cfg.steering.nx, nt_phase)
        .map_err(|e| ShapeError(e.to_string()))?;
    let phase2 = Trajectory::constant(&hold_grid, d);

    let full_grid = SpaceTimeGrid::new(length, 0.0, t_final, cfg.steering.nx, 3 * nt_phase)
        .map_err(|e| ShapeError(e.to_string()))?;

    // Controls: the basis signals vanish at the horizon end nodes, so the
    // steering controls already hit zero at the joints and merge seamlessly
    // with the zero-control hold.
    let mut h2 = vec![0.0; 3 * nt_phase + 1];
    for n in 0..=nt_phase {
        h2[n] = phase1.control.h2(n);
        h2[2 * nt_phase + n] = phase3.control.h2(n);
    }
    let glued_control = BoundarySignal::from_h2(h2);

    // Trajectory: steering phases keep their own slices at the joints; the
    // hold is exactly d in between.
    let mut slices = Vec::with_capacity(3 * nt_phase + 1);
    for n in 0..=nt_phase {
        slices.push(phase1.trajectory.slice(n).clone());
    }
    for _ in 1..=nt_phase {
        slices.push(DVector::from_element(phase_grid.n_nodes(), d));
    }
    for n in 1..=nt_phase {
        slices.push(phase3.trajectory.slice(n).clone());
    }
    let glued_trajectory = Trajectory::from_slices(&full_grid, slices)?;

    let end_to_end_error = phase3.terminal_error;
    let audit_tolerance =
        10.0 * phase1.terminal_tolerance.max(phase3.terminal_tolerance);

    Ok(ReturnPlan {
        t_final,
        length,
        c: cfg.c,
        d,
        epsilon,
        phase1,
        phase2,
        phase3,
        glued_control,
        glued_trajectory,
        end_to_end_error,
        audit_tolerance,
        d_restarts,
    })
}

/// Independent audit: re-simulates the glued control through the nonlinear
/// solver in one pass from the plan's initial state and compares against the
/// planned trajectory, phase by phase.
pub fn verify_plan(plan: &ReturnPlan) -> Result<AuditReport, PlanError> {
    let grid = plan.glued_trajectory.grid().clone();
    let resim = solve_nonlinear(
        plan.glued_trajectory.initial(),
        &plan.glued_control,
        &Forcing::Zero,
        &Drift::Constant(1.0 + plan.c),
        &grid,
        1e-11,
        80,
    )?;

    let diff = resim.trajectory.sub(&plan.glued_trajectory)?;
    let znorm_deviation = diff.zt_norm();
    let nt_phase = grid.nt() / 3;
    let phase_deviation = [
        diff.window(0, nt_phase).zt_norm(),
        diff.window(nt_phase, 2 * nt_phase).zt_norm(),
        diff.window(2 * nt_phase, 3 * nt_phase).zt_norm(),
    ];
    let final_error = l2_norm(
        grid.dx(),
        &(resim.trajectory.final_slice() - plan.glued_trajectory.final_slice()),
    );

    let tolerance = plan.audit_tolerance;
    let passed = znorm_deviation < tolerance && final_error < tolerance;
    let report = AuditReport { znorm_deviation, final_error, phase_deviation, tolerance, passed };
    if passed {
        Ok(report)
    } else {
        Err(PlanError::Audit { report })
    }
}
