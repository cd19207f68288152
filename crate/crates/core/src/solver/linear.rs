//! Crank–Nicolson integration of the linear problem
//! `y_t + (a y)_x + y_xxx = f` with the three boundary channels.

use nalgebra::{DMatrix, DVector};
use nalgebra::LU;

use crate::grid::{BoundarySignal, Drift, Forcing, SpaceTimeGrid, Trajectory};
use crate::solver::scheme::{dx_plain, SpatialOps};
use crate::solver::SolverError;

/// Semi-discrete system `du/dt = −A u + h1 b1 + h2 b2 + h3 b3 + f` for one
/// drift slice.
struct SystemSlice {
    a: DMatrix<f64>,
    b: [DVector<f64>; 3],
}

fn assemble(ops: &SpatialOps, drift_slice: Option<&DVector<f64>>, a_const: f64) -> SystemSlice {
    let n = ops.n_nodes;
    let mut a = ops.d3.mat.clone();
    let mut b1 = -ops.d3.b_h1.clone();
    let mut b2 = -ops.d3.b_h2.clone();
    let mut b3 = -ops.d3.b_h3.clone();
    match drift_slice {
        None => {
            if a_const != 0.0 {
                a += &ops.d1.mat * a_const;
                b1.axpy(-a_const, &ops.d1.b_h1, 1.0);
                b2.axpy(-a_const, &ops.d1.b_h2, 1.0);
                b3.axpy(-a_const, &ops.d1.b_h3, 1.0);
            }
        }
        Some(av) => {
            // (a y)_x = a y_x + a_x y with the scheme derivative for y and a
            // plain difference quotient for the coefficient.
            let ax = dx_plain(ops.dx, av);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] += av[i] * ops.d1.mat[(i, j)];
                }
                a[(i, i)] += ax[i];
                b1[i] -= av[i] * ops.d1.b_h1[i];
                b2[i] -= av[i] * ops.d1.b_h2[i];
                b3[i] -= av[i] * ops.d1.b_h3[i];
            }
        }
    }
    SystemSlice { a, b: [b1, b2, b3] }
}

fn boundary_term(slice: &SystemSlice, h: &BoundarySignal, n: usize, out: &mut DVector<f64>) {
    let (h1, h2, h3) = (h.h1(n), h.h2(n), h.h3(n));
    if h1 != 0.0 {
        out.axpy(h1, &slice.b[0], 1.0);
    }
    if h2 != 0.0 {
        out.axpy(h2, &slice.b[1], 1.0);
    }
    if h3 != 0.0 {
        out.axpy(h3, &slice.b[2], 1.0);
    }
}

/// Factored Crank–Nicolson stepper for a constant drift on a fixed grid.
///
/// The implicit matrix is factored once, so repeated solves on the same grid
/// (control-operator columns, Picard iterations) reuse the factorization.
pub struct LinearStepper {
    grid: SpaceTimeGrid,
    system: SystemSlice,
    lhs: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs_mat: DMatrix<f64>,
    ops: SpatialOps,
}

impl LinearStepper {
    pub fn new(grid: &SpaceTimeGrid, a_const: f64) -> Result<Self, SolverError> {
        let ops = SpatialOps::new(grid);
        let system = assemble(&ops, None, a_const);
        let n = grid.n_nodes();
        let half_dt = 0.5 * grid.dt();
        let mut lhs_mat = DMatrix::identity(n, n);
        lhs_mat += &system.a * half_dt;
        let mut rhs_mat = DMatrix::identity(n, n);
        rhs_mat += &system.a * (-half_dt);
        let lhs = lhs_mat.lu();
        if lhs.determinant() == 0.0 {
            return Err(SolverError::SingularSystem { step: 0, time: grid.t0() });
        }
        Ok(Self { grid: grid.clone(), system, lhs, rhs_mat, ops })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub(crate) fn ops(&self) -> &SpatialOps {
        &self.ops
    }

    /// Runs the full time loop for one data triple.
    pub fn solve(
        &self,
        y0: &DVector<f64>,
        h: &BoundarySignal,
        f: &Forcing,
    ) -> Result<Trajectory, SolverError> {
        check_shapes(&self.grid, y0, h, f)?;
        let nt = self.grid.nt();
        let half_dt = 0.5 * self.grid.dt();
        let mut slices = Vec::with_capacity(nt + 1);
        slices.push(y0.clone());
        for n in 0..nt {
            let u = &slices[n];
            let mut rhs = &self.rhs_mat * u;
            let mut data = DVector::zeros(u.len());
            boundary_term(&self.system, h, n, &mut data);
            boundary_term(&self.system, h, n + 1, &mut data);
            if let Some(fv) = f.get(n) {
                data += fv;
            }
            if let Some(fv) = f.get(n + 1) {
                data += fv;
            }
            rhs.axpy(half_dt, &data, 1.0);
            let next = self
                .lhs
                .solve(&rhs)
                .ok_or(SolverError::SingularSystem { step: n + 1, time: self.grid.t(n + 1) })?;
            if !next.iter().all(|v| v.is_finite()) {
                return Err(SolverError::NumericalBlowup {
                    step: n + 1,
                    time: self.grid.t(n + 1),
                    max_abs: u.amax(),
                });
            }
            slices.push(next);
        }
        Ok(Trajectory::from_slices_unchecked(self.grid.clone(), slices))
    }
}

fn check_shapes(
    grid: &SpaceTimeGrid,
    y0: &DVector<f64>,
    h: &BoundarySignal,
    f: &Forcing,
) -> Result<(), SolverError> {
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
    Ok(())
}

/// Mild solution of the linear problem for constant or space-time drift.
///
/// Constant drift factors the implicit operator once; a drift field refactors
/// it every step since the operator changes in time.
pub fn solve_linear(
    y0: &DVector<f64>,
    h: &BoundarySignal,
    f: &Forcing,
    a: &Drift,
    grid: &SpaceTimeGrid,
) -> Result<Trajectory, SolverError> {
    match a {
        Drift::Constant(ac) => LinearStepper::new(grid, *ac)?.solve(y0, h, f),
        Drift::Field(field) => {
            if field.grid() != grid {
                return Err(crate::grid::ShapeError("drift field grid differs from solve grid".into()).into());
            }
            check_shapes(grid, y0, h, f)?;
            let ops = SpatialOps::new(grid);
            let nt = grid.nt();
            let half_dt = 0.5 * grid.dt();
            let n = grid.n_nodes();
            let mut slices = Vec::with_capacity(nt + 1);
            slices.push(y0.clone());
            let mut sys_n = assemble(&ops, Some(field.slice(0)), 0.0);
            for step in 0..nt {
                let sys_next = assemble(&ops, Some(field.slice(step + 1)), 0.0);
                let u = &slices[step];
                let mut rhs = u.clone();
                rhs.gemv(-half_dt, &sys_n.a, u, 1.0);
                let mut data = DVector::zeros(n);
                boundary_term(&sys_n, h, step, &mut data);
                boundary_term(&sys_next, h, step + 1, &mut data);
                if let Some(fv) = f.get(step) {
                    data += fv;
                }
                if let Some(fv) = f.get(step + 1) {
                    data += fv;
                }
                rhs.axpy(half_dt, &data, 1.0);
                let mut lhs = DMatrix::identity(n, n);
                lhs += &sys_next.a * half_dt;
                let next = lhs
                    .lu()
                    .solve(&rhs)
                    .ok_or(SolverError::SingularSystem { step: step + 1, time: grid.t(step + 1) })?;
                if !next.iter().all(|v| v.is_finite()) {
                    return Err(SolverError::NumericalBlowup {
                        step: step + 1,
                        time: grid.t(step + 1),
                        max_abs: u.amax(),
                    });
                }
                slices.push(next);
                sys_n = sys_next;
            }
            Ok(Trajectory::from_slices_unchecked(grid.clone(), slices))
        }
    }
}
