//! Discrete realization of the exact-controllability operator for the
//! linearized system: a finite control basis in time is mapped through the
//! forward solver to final states, and least-norm controls are synthesized by
//! truncated SVD of the weighted input-to-final-state map. The singular
//! spectrum of that map is the controllability Gramian diagnostic: at a
//! critical length at least one direction of the final-state space decouples
//! from the control and its singular value collapses to discretization level.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{l2_norm, BoundarySignal, Forcing, ShapeError, SpaceTimeGrid};
use crate::solver::{LinearStepper, SolverError};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("drift c = -1: the linearized system is not controllable for any length")]
    DegenerateDrift,
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("basis horizon [{0}, {1}] does not match the grid time span")]
    HorizonMismatch(f64, f64),
    #[error("control basis needs at least one function")]
    EmptyBasis,
}

/// Shape of the finite-dimensional control subspace of `L²(T0, T1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    PiecewiseConstant,
    Hat,
}

/// `count` basis signals on the horizon `[t0, t1]`.
///
/// Piecewise-constant functions partition the horizon evenly; hat functions
/// sit on a uniform interior knot sequence. Sampled signals vanish at the two
/// horizon end nodes, so synthesized controls always glue continuously with a
/// zero-control phase.
#[derive(Debug, Clone)]
pub struct ControlBasis {
    pub kind: BasisKind,
    pub count: usize,
    pub horizon: (f64, f64),
}

impl ControlBasis {
    pub fn new(kind: BasisKind, count: usize, horizon: (f64, f64)) -> Result<Self, ControlError> {
        if count == 0 {
            return Err(ControlError::EmptyBasis);
        }
        Ok(Self { kind, count, horizon })
    }

    /// Samples basis function `j` on the time nodes of `grid`.
    pub fn sample(&self, j: usize, grid: &SpaceTimeGrid) -> Vec<f64> {
        let nt = grid.nt();
        let (t0, t1) = self.horizon;
        let span = t1 - t0;
        let mut out = vec![0.0; nt + 1];
        match self.kind {
            BasisKind::PiecewiseConstant => {
                let slot = span / self.count as f64;
                for (n, v) in out.iter_mut().enumerate() {
                    let t = grid.t(n);
                    let mut idx = ((t - t0) / slot).floor() as isize;
                    idx = idx.clamp(0, self.count as isize - 1);
                    if idx as usize == j {
                        *v = 1.0;
                    }
                }
            }
            BasisKind::Hat => {
                let knot = span / (self.count + 1) as f64;
                let center = t0 + (j + 1) as f64 * knot;
                for (n, v) in out.iter_mut().enumerate() {
                    let t = grid.t(n);
                    *v = (1.0 - (t - center).abs() / knot).max(0.0);
                }
            }
        }
        out[0] = 0.0;
        out[nt] = 0.0;
        out
    }
}

/// Discrete control-to-final-state map with its weighted SVD.
///
/// `map` holds the raw responses: column `j` is the final slice of the linear
/// solve with zero initial state and basis signal `j` on the control channel.
/// The stored SVD belongs to the weighted operator
/// `W_x^{1/2} · map · R⁻¹` (spatial trapezoid weights on the state side,
/// `R` the Cholesky factor of the basis Gramian in `L²(T0, T1)`), i.e. the
/// operator between the discrete `L²` control space and `L²(0, L)`.
pub struct ControlOperator {
    pub drift: f64,
    pub grid: SpaceTimeGrid,
    pub basis: ControlBasis,
    pub map: DMatrix<f64>,
    singular_values: Vec<f64>,
    u_cols: DMatrix<f64>,
    v_cols: DMatrix<f64>,
    chol_rt: DMatrix<f64>,
    wx_sqrt: DVector<f64>,
    stepper: LinearStepper,
}

fn time_weights(grid: &SpaceTimeGrid) -> DVector<f64> {
    let nt = grid.nt();
    let dt = grid.dt();
    DVector::from_fn(nt + 1, |n, _| if n == 0 || n == nt { 0.5 * dt } else { dt })
}

fn space_weight_sqrt(grid: &SpaceTimeGrid) -> DVector<f64> {
    let nx = grid.nx();
    let dx = grid.dx();
    DVector::from_fn(nx + 1, |i, _| {
        let w = if i == 0 || i == nx { 0.5 * dx } else { dx };
        w.sqrt()
    })
}

/// Descending-order SVD of a dynamically sized matrix.
fn sorted_svd(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("SVD with vectors requested");
    let vt = svd.v_t.expect("SVD with vectors requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("singular values are finite"));
    let values: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_sorted = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    (values, u_sorted, v_sorted)
}

/// Assembles the input-to-final-state map for one drift and basis.
///
/// Columns are independent forward solves and are computed in parallel; the
/// result does not depend on the assembly order.
pub fn build_control_operator(
    drift: f64,
    grid: &SpaceTimeGrid,
    basis: &ControlBasis,
) -> Result<ControlOperator, ControlError> {
    let (b0, b1) = basis.horizon;
    if (b0 - grid.t0()).abs() > 1e-12 * grid.duration().max(1.0)
        || (b1 - grid.t1()).abs() > 1e-12 * grid.duration().max(1.0)
    {
        return Err(ControlError::HorizonMismatch(b0, b1));
    }

    let stepper = LinearStepper::new(grid, drift)?;
    let zero_state = DVector::zeros(grid.n_nodes());
    let columns: Vec<DVector<f64>> = (0..basis.count)
        .into_par_iter()
        .map(|j| {
            let h = BoundarySignal::from_h2(basis.sample(j, grid));
            stepper
                .solve(&zero_state, &h, &Forcing::Zero)
                .map(|traj| traj.final_slice().clone())
        })
        .collect::<Result<_, _>>()?;
    let map = DMatrix::from_columns(&columns);

    // Basis Gramian in the time-trapezoid inner product; its Cholesky factor
    // turns coefficient norms into control L² norms.
    let wt = time_weights(grid);
    let mut sampled = DMatrix::zeros(grid.nt() + 1, basis.count);
    for j in 0..basis.count {
        let col = basis.sample(j, grid);
        for (n, v) in col.iter().enumerate() {
            sampled[(n, j)] = *v;
        }
    }
    let mut gram = DMatrix::zeros(basis.count, basis.count);
    for a in 0..basis.count {
        for b in a..basis.count {
            let mut acc = 0.0;
            for n in 0..=grid.nt() {
                acc += wt[n] * sampled[(n, a)] * sampled[(n, b)];
            }
            gram[(a, b)] = acc;
            gram[(b, a)] = acc;
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| ShapeError("control basis is numerically dependent".into()))?;
    let chol_rt = chol.l().transpose();

    let wx_sqrt = space_weight_sqrt(grid);
    let mut weighted = map.clone();
    for i in 0..weighted.nrows() {
        for j in 0..weighted.ncols() {
            weighted[(i, j)] *= wx_sqrt[i];
        }
    }
    // weighted · Rᵀ⁻¹ via triangular solve on the transpose.
    let weighted = chol_rt
        .transpose()
        .solve_lower_triangular(&weighted.transpose())
        .ok_or_else(|| ShapeError("basis Gramian factor is singular".into()))?
        .transpose();

    let (singular_values, u_cols, v_cols) = sorted_svd(weighted);

    Ok(ControlOperator {
        drift,
        grid: grid.clone(),
        basis: basis.clone(),
        map,
        singular_values,
        u_cols,
        v_cols,
        chol_rt,
        wx_sqrt,
        stepper,
    })
}

impl ControlOperator {
    /// Singular values of the weighted control-to-state operator, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values[0]
    }

    pub fn sigma_min(&self) -> f64 {
        *self.singular_values.last().expect("at least one basis function")
    }

    /// Final state reached from `u0` with zero control.
    pub fn free_response(&self, u0: &DVector<f64>) -> Result<DVector<f64>, ControlError> {
        let h = BoundarySignal::zeros(&self.grid);
        Ok(self.stepper.solve(u0, &h, &Forcing::Zero)?.final_slice().clone())
    }

    /// Left singular direction `k` mapped back to an unweighted state vector
    /// of unit discrete `L²` norm.
    pub fn state_mode(&self, k: usize) -> DVector<f64> {
        let mut state = DVector::from_fn(self.grid.n_nodes(), |i, _| {
            self.u_cols[(i, k)] / self.wx_sqrt[i]
        });
        let norm = l2_norm(self.grid.dx(), &state);
        if norm > 0.0 {
            state /= norm;
        }
        state
    }
}

/// Least-norm control solving the linear steering problem, with its residual.
#[derive(Debug, Clone)]
pub struct LinearControlSolution {
    pub signal: BoundarySignal,
    pub coefficients: DVector<f64>,
    pub predicted_final: DVector<f64>,
    pub residual: f64,
    pub relative_residual: f64,
    /// Set when `σ_min/σ_max` fell below the truncation threshold — expected
    /// at critical lengths, where part of the state space is unreachable.
    pub ill_conditioned: bool,
}

/// Truncated-SVD least squares for the control steering `u0` to `u_tau`.
///
/// Minimizes the control `L²(T0, T1)` norm among coefficient vectors that
/// minimize `‖final(u0, h) − u_tau‖_{L²(0, L)}`; directions with singular
/// value below `reg_threshold · σ_max` are cut.
pub fn solve_linear_control(
    op: &ControlOperator,
    u0: &DVector<f64>,
    u_tau: &DVector<f64>,
    reg_threshold: f64,
) -> Result<LinearControlSolution, ControlError> {
    let n = op.grid.n_nodes();
    if u0.len() != n || u_tau.len() != n {
        return Err(ShapeError(format!(
            "steering states need {} nodes, got {} and {}",
            n,
            u0.len(),
            u_tau.len()
        ))
        .into());
    }

    let free = if u0.iter().all(|v| *v == 0.0) {
        DVector::zeros(n)
    } else {
        op.free_response(u0)?
    };
    let target = u_tau - &free;
    let weighted_target = DVector::from_fn(n, |i, _| target[i] * op.wx_sqrt[i]);

    let sigma_max = op.sigma_max();
    let cutoff = reg_threshold * sigma_max;
    let mut z = DVector::zeros(op.basis.count);
    for (k, &sigma) in op.singular_values.iter().enumerate() {
        if sigma <= cutoff || sigma == 0.0 {
            break;
        }
        let coef = op.u_cols.column(k).dot(&weighted_target) / sigma;
        z.axpy(coef, &op.v_cols.column(k).into_owned(), 1.0);
    }
    let coefficients = op
        .chol_rt
        .solve_upper_triangular(&z)
        .ok_or_else(|| ShapeError("basis Gramian factor is singular".into()))?;

    // Sample the control signal and evaluate the reached state.
    let nt = op.grid.nt();
    let mut h2 = vec![0.0; nt + 1];
    for j in 0..op.basis.count {
        let c = coefficients[j];
        if c != 0.0 {
            for (n, v) in op.basis.sample(j, &op.grid).iter().enumerate() {
                h2[n] += c * v;
            }
        }
    }
    let predicted_final = &free + &op.map * &coefficients;
    let residual = l2_norm(op.grid.dx(), &(&predicted_final - u_tau));
    let target_norm = l2_norm(op.grid.dx(), u_tau);
    let relative_residual = if target_norm > 0.0 {
        residual / target_norm
    } else if residual > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    Ok(LinearControlSolution {
        signal: BoundarySignal::from_h2(h2),
        coefficients,
        predicted_final,
        residual,
        relative_residual,
        ill_conditioned: op.sigma_min() / sigma_max < reg_threshold,
    })
}

/// A near-unreachable final-state direction.
#[derive(Debug, Clone)]
pub struct DefectMode {
    pub sigma: f64,
    pub sigma_ratio: f64,
    pub state: DVector<f64>,
}

/// Gramian spectrum of the linearization around `c` on `[0, L]`, with the
/// directions whose relative singular value falls below `threshold`.
#[derive(Debug, Clone)]
pub struct ReachabilityReport {
    pub length: f64,
    pub c: f64,
    pub drift: f64,
    pub sigma: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub defect_modes: Vec<DefectMode>,
}

/// Default control horizon for reachability diagnostics.
pub const DEFAULT_HORIZON: f64 = 1.0;

/// Spectrum report on the default horizon; see
/// [`reachability_report_with_horizon`].
pub fn reachability_report(
    length: f64,
    c: f64,
    resolution: (usize, usize, usize),
    threshold: f64,
) -> Result<ReachabilityReport, ControlError> {
    reachability_report_with_horizon(length, c, DEFAULT_HORIZON, resolution, threshold)
}

/// Builds the control operator for drift `1 + c` at resolution
/// `(nx, nt, basis_count)` and reports its singular spectrum. `c = -1` is
/// rejected: the transport degenerates and no length is controllable.
pub fn reachability_report_with_horizon(
    length: f64,
    c: f64,
    t_final: f64,
    resolution: (usize, usize, usize),
    threshold: f64,
) -> Result<ReachabilityReport, ControlError> {
    if c == -1.0 {
        return Err(ControlError::DegenerateDrift);
    }
    let (nx, nt, count) = resolution;
    let grid = SpaceTimeGrid::new(length, 0.0, t_final, nx, nt)
        .map_err(|e| ShapeError(e.to_string()))?;
    let basis = ControlBasis::new(BasisKind::PiecewiseConstant, count, (0.0, t_final))?;
    let op = build_control_operator(1.0 + c, &grid, &basis)?;

    let sigma_max = op.sigma_max();
    let defect_modes = op
        .singular_values()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s / sigma_max < threshold)
        .map(|(k, &s)| DefectMode { sigma: s, sigma_ratio: s / sigma_max, state: op.state_mode(k) })
        .collect();

    Ok(ReachabilityReport {
        length,
        c,
        drift: 1.0 + c,
        sigma: op.singular_values().to_vec(),
        sigma_min: op.sigma_min(),
        sigma_max,
        defect_modes,
    })
}
