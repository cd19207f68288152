//! Space-time grids, discrete fields and the norms they carry.
//!
//! All fields live on the uniform grid `x_i = i Δx`, `t_n = T0 + n Δt`.
//! Spatial `L²` norms use the trapezoid rule, the discrete `H¹` norm adds the
//! `L²` norm of the one-sided difference quotient, and time integrals are
//! trapezoidal as well, so every module measures residuals the same way.

use nalgebra::DVector;
use thiserror::Error;

/// Dimension or sampling mismatch between a field and the grid it claims.
#[derive(Debug, Clone, Error)]
#[error("shape mismatch: {0}")]
pub struct ShapeError(pub String);

/// Invalid grid geometry.
#[derive(Debug, Clone, Error)]
#[error("invalid grid: {0}")]
pub struct GridError(pub String);

/// Uniform discretization of `[0, L] × [T0, T1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    length: f64,
    t0: f64,
    t1: f64,
    nx: usize,
    nt: usize,
}

impl SpaceTimeGrid {
    /// `nx` spatial intervals (at least 8) and `nt` time steps (at least 4).
    pub fn new(length: f64, t0: f64, t1: f64, nx: usize, nt: usize) -> Result<Self, GridError> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(GridError(format!("length must be positive, got {length}")));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(GridError(format!("time span [{t0}, {t1}] must be increasing")));
        }
        if nx < 8 {
            return Err(GridError(format!("nx = {nx} is below the minimum of 8 intervals")));
        }
        if nt < 4 {
            return Err(GridError(format!("nt = {nt} is below the minimum of 4 steps")));
        }
        Ok(Self { length, t0, t1, nx, nt })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Number of spatial nodes, `nx + 1`.
    pub fn n_nodes(&self) -> usize {
        self.nx + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.nt as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt()
    }

    /// Same spatial axis, time axis translated to start at `new_t0`.
    pub fn time_shifted(&self, new_t0: f64) -> Self {
        Self {
            length: self.length,
            t0: new_t0,
            t1: new_t0 + self.duration(),
            nx: self.nx,
            nt: self.nt,
        }
    }

    /// Sub-grid covering time steps `n_start..=n_end` of this grid.
    pub(crate) fn time_window(&self, n_start: usize, n_end: usize) -> Self {
        assert!(n_start < n_end && n_end <= self.nt);
        Self {
            length: self.length,
            t0: self.t(n_start),
            t1: self.t(n_end),
            nx: self.nx,
            nt: n_end - n_start,
        }
    }
}

/// Trapezoid-weight `L²(0, L)` norm of a nodal vector.
pub fn l2_norm(dx: f64, v: &DVector<f64>) -> f64 {
    l2_inner(dx, v, v).sqrt()
}

/// Trapezoid-weight `L²(0, L)` inner product.
pub fn l2_inner(dx: f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len();
    assert_eq!(n, v.len());
    let mut acc = 0.5 * (u[0] * v[0] + u[n - 1] * v[n - 1]);
    for i in 1..n - 1 {
        acc += u[i] * v[i];
    }
    acc * dx
}

/// Discrete `H¹` norm: `sqrt(‖v‖² + ‖Dv‖²)` with the one-sided difference
/// quotient `Dv_i = (v_{i+1} − v_i)/Δx` integrated by the midpoint rule.
pub fn h1_norm(dx: f64, v: &DVector<f64>) -> f64 {
    let l2sq = l2_inner(dx, v, v);
    let mut dsq = 0.0;
    for i in 0..v.len() - 1 {
        let q = (v[i + 1] - v[i]) / dx;
        dsq += q * q;
    }
    (l2sq + dsq * dx).sqrt()
}

/// Discrete field `y(x_i, t_n)` stored as one spatial slice per time node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: SpaceTimeGrid,
    slices: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        let slices = vec![DVector::zeros(grid.n_nodes()); grid.nt() + 1];
        Self { grid: grid.clone(), slices }
    }

    pub fn constant(grid: &SpaceTimeGrid, value: f64) -> Self {
        let slices = vec![DVector::from_element(grid.n_nodes(), value); grid.nt() + 1];
        Self { grid: grid.clone(), slices }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let slices = (0..=grid.nt())
            .map(|n| DVector::from_fn(grid.n_nodes(), |i, _| f(grid.x(i), grid.t(n))))
            .collect();
        Self { grid: grid.clone(), slices }
    }

    /// Builds a trajectory from explicit slices, checking shape and finiteness.
    pub fn from_slices(grid: &SpaceTimeGrid, slices: Vec<DVector<f64>>) -> Result<Self, ShapeError> {
        if slices.len() != grid.nt() + 1 {
            return Err(ShapeError(format!(
                "expected {} time slices, got {}",
                grid.nt() + 1,
                slices.len()
            )));
        }
        for (n, s) in slices.iter().enumerate() {
            if s.len() != grid.n_nodes() {
                return Err(ShapeError(format!(
                    "slice {n} has {} nodes, grid has {}",
                    s.len(),
                    grid.n_nodes()
                )));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(ShapeError(format!("slice {n} contains non-finite values")));
            }
        }
        Ok(Self { grid: grid.clone(), slices })
    }

    pub(crate) fn from_slices_unchecked(grid: SpaceTimeGrid, slices: Vec<DVector<f64>>) -> Self {
        Self { grid, slices }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn slice(&self, n: usize) -> &DVector<f64> {
        &self.slices[n]
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.slices[0]
    }

    pub fn final_slice(&self) -> &DVector<f64> {
        &self.slices[self.grid.nt()]
    }

    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.slices[n][i]
    }

    pub fn max_abs(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise difference; grids must match.
    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory, ShapeError> {
        if self.grid != other.grid {
            return Err(ShapeError("trajectory grids differ".into()));
        }
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { grid: self.grid.clone(), slices })
    }

    /// The solution-space norm: `max_t ‖y(·,t)‖_{L²} + (∫ ‖y(·,t)‖²_{H¹} dt)^{1/2}`.
    pub fn zt_norm(&self) -> f64 {
        let dx = self.grid.dx();
        let dt = self.grid.dt();
        let mut max_l2 = 0.0_f64;
        let mut h1_int = 0.0_f64;
        let last = self.slices.len() - 1;
        for (n, s) in self.slices.iter().enumerate() {
            max_l2 = max_l2.max(l2_norm(dx, s));
            let h1 = h1_norm(dx, s);
            let w = if n == 0 || n == last { 0.5 } else { 1.0 };
            h1_int += w * h1 * h1;
        }
        max_l2 + (h1_int * dt).sqrt()
    }

    /// Relabels the time axis to start at `new_t0`; values are untouched.
    pub fn time_shifted(mut self, new_t0: f64) -> Self {
        self.grid = self.grid.time_shifted(new_t0);
        self
    }

    /// Restriction of the trajectory to time steps `n_start..=n_end`.
    pub fn window(&self, n_start: usize, n_end: usize) -> Trajectory {
        let grid = self.grid.time_window(n_start, n_end);
        let slices = self.slices[n_start..=n_end].to_vec();
        Self { grid, slices }
    }
}

/// Boundary data triplet `(h1, h2, h3)` sampled on the time nodes of a grid.
///
/// `h1` and `h3` prescribe `y_xx` at the left and right end, `h2` prescribes
/// `y_x(L, t)` and is the control channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySignal {
    h1: Vec<f64>,
    h2: Vec<f64>,
    h3: Vec<f64>,
}

impl BoundarySignal {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        let z = vec![0.0; grid.nt() + 1];
        Self { h1: z.clone(), h2: z.clone(), h3: z }
    }

    /// Control-only signal: `h2` as given, `h1 = h3 = 0`.
    pub fn from_h2(h2: Vec<f64>) -> Self {
        let z = vec![0.0; h2.len()];
        Self { h1: z.clone(), h2, h3: z }
    }

    pub fn new(h1: Vec<f64>, h2: Vec<f64>, h3: Vec<f64>) -> Result<Self, ShapeError> {
        if h1.len() != h2.len() || h2.len() != h3.len() {
            return Err(ShapeError(format!(
                "boundary channels disagree in length: {} / {} / {}",
                h1.len(),
                h2.len(),
                h3.len()
            )));
        }
        let all_finite = h1.iter().chain(&h2).chain(&h3).all(|v| v.is_finite());
        if !all_finite {
            return Err(ShapeError("boundary signal contains non-finite values".into()));
        }
        Ok(Self { h1, h2, h3 })
    }

    /// Number of time samples (grid nodes, `nt + 1`).
    pub fn len(&self) -> usize {
        self.h2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h2.is_empty()
    }

    pub fn h1(&self, n: usize) -> f64 {
        self.h1[n]
    }

    pub fn h2(&self, n: usize) -> f64 {
        self.h2[n]
    }

    pub fn h3(&self, n: usize) -> f64 {
        self.h3[n]
    }

    pub fn h2_samples(&self) -> &[f64] {
        &self.h2
    }

    pub fn is_zero(&self) -> bool {
        self.h1.iter().chain(&self.h2).chain(&self.h3).all(|&v| v == 0.0)
    }

    /// Time-trapezoid `L²(T0, T1)` norm of the control channel.
    pub fn h2_l2_norm(&self, dt: f64) -> f64 {
        let n = self.h2.len();
        let mut acc = 0.5 * (self.h2[0] * self.h2[0] + self.h2[n - 1] * self.h2[n - 1]);
        for v in &self.h2[1..n - 1] {
            acc += v * v;
        }
        (acc * dt).sqrt()
    }

    pub fn window(&self, n_start: usize, n_end: usize) -> BoundarySignal {
        BoundarySignal {
            h1: self.h1[n_start..=n_end].to_vec(),
            h2: self.h2[n_start..=n_end].to_vec(),
            h3: self.h3[n_start..=n_end].to_vec(),
        }
    }

    pub(crate) fn check_len(&self, grid: &SpaceTimeGrid) -> Result<(), ShapeError> {
        if self.len() != grid.nt() + 1 {
            return Err(ShapeError(format!(
                "boundary signal has {} samples, grid needs {}",
                self.len(),
                grid.nt() + 1
            )));
        }
        Ok(())
    }
}

/// Right-hand side `f(x, t)`; the `Zero` variant avoids storing a field of zeros.
#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    Values(Vec<DVector<f64>>),
}

impl Forcing {
    pub fn zeros() -> Self {
        Forcing::Zero
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Forcing::Values(
            (0..=grid.nt())
                .map(|n| DVector::from_fn(grid.n_nodes(), |i, _| f(grid.x(i), grid.t(n))))
                .collect(),
        )
    }

    pub fn from_slices(slices: Vec<DVector<f64>>) -> Self {
        Forcing::Values(slices)
    }

    pub fn get(&self, n: usize) -> Option<&DVector<f64>> {
        match self {
            Forcing::Zero => None,
            Forcing::Values(v) => Some(&v[n]),
        }
    }

    pub(crate) fn check_shape(&self, grid: &SpaceTimeGrid) -> Result<(), ShapeError> {
        if let Forcing::Values(v) = self {
            if v.len() != grid.nt() + 1 {
                return Err(ShapeError(format!(
                    "forcing has {} time slices, grid needs {}",
                    v.len(),
                    grid.nt() + 1
                )));
            }
            for (n, s) in v.iter().enumerate() {
                if s.len() != grid.n_nodes() {
                    return Err(ShapeError(format!(
                        "forcing slice {n} has {} nodes, grid has {}",
                        s.len(),
                        grid.n_nodes()
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn window(&self, n_start: usize, n_end: usize) -> Forcing {
        match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::Values(v) => Forcing::Values(v[n_start..=n_end].to_vec()),
        }
    }
}

/// Transport coefficient `a` of `(a y)_x`: a constant (`1 + c` in the control
/// problems) or a full space-time field.
#[derive(Debug, Clone)]
pub enum Drift {
    Constant(f64),
    Field(Trajectory),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate_axes() {
        assert!(SpaceTimeGrid::new(0.0, 0.0, 1.0, 16, 8).is_err());
        assert!(SpaceTimeGrid::new(1.0, 1.0, 1.0, 16, 8).is_err());
        assert!(SpaceTimeGrid::new(1.0, 0.0, 1.0, 4, 8).is_err());
        assert!(SpaceTimeGrid::new(1.0, 0.0, 1.0, 16, 2).is_err());
    }

    #[test]
    fn zt_norm_of_zero_and_constant() {
        let grid = SpaceTimeGrid::new(2.0, 0.0, 3.0, 16, 8).unwrap();
        assert_eq!(Trajectory::zeros(&grid).zt_norm(), 0.0);

        // Constant d: max-in-time L2 is d sqrt(L); the H1 norm of a constant
        // equals its L2 norm, so the time integral contributes d sqrt(L T).
        let d = 0.7;
        let y = Trajectory::constant(&grid, d);
        let expected = d * 2.0_f64.sqrt() + d * (2.0_f64 * 3.0).sqrt();
        assert!((y.zt_norm() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn trajectory_shape_checks() {
        let grid = SpaceTimeGrid::new(1.0, 0.0, 1.0, 8, 4).unwrap();
        let bad = vec![DVector::zeros(3); 5];
        assert!(Trajectory::from_slices(&grid, bad).is_err());
        let nan = vec![DVector::from_element(9, f64::NAN); 5];
        assert!(Trajectory::from_slices(&grid, nan).is_err());
    }
}
