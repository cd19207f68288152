//! Spatial discretization of `a ∂x + ∂xxx` with the boundary data
//! `u_xx(0) = h1`, `u_x(L) = h2`, `u_xx(L) = h3` eliminated through ghost
//! nodes.
//!
//! Interior stencils are the centered 2-point first derivative and the
//! centered 4-point third derivative, both second order. Two ghost nodes per
//! end are eliminated algebraically:
//!
//! * left: the 4th-order 5-point formula for `u_xx(0) = h1` plus a vanishing
//!   fifth difference (quartic extrapolation) as the one-sided closure;
//! * right: the 4th-order 5-point formulas for `u_x(L) = h2` and
//!   `u_xx(L) = h3`, solved for the two ghosts.
//!
//! The wide boundary formulas matter: a ghost reconstructed to `O(Δx³)` only
//! produces an `O(1)` residual once divided by `Δx³` in the third-derivative
//! rows, so second-order ghost relations would destroy consistency. With the
//! relations below every ghost is exact to `O(Δx⁵)` and all rows keep an
//! `O(Δx²)` truncation error. Every eliminated row still annihilates
//! constants exactly, which is what makes constant states exact steady states
//! of the full scheme.

use nalgebra::{DMatrix, DVector};

use crate::grid::SpaceTimeGrid;

/// Affine representation of one ghost value:
/// `g = Σ coeffs[k] · u[base + k] + c_h1 h1 + c_h2 h2 + c_h3 h3`.
struct GhostRule {
    base: usize,
    coeffs: [f64; 4],
    c_h1: f64,
    c_h2: f64,
    c_h3: f64,
}

/// Matrix part and boundary-data columns of a difference operator:
/// `(D u)(row) = (mat · u)(row) + h1·b_h1(row) + h2·b_h2(row) + h3·b_h3(row)`.
pub(crate) struct DiffOperator {
    pub mat: DMatrix<f64>,
    pub b_h1: DVector<f64>,
    pub b_h2: DVector<f64>,
    pub b_h3: DVector<f64>,
}

impl DiffOperator {
    /// Applies the operator to a slice with its boundary data.
    pub fn apply(&self, u: &DVector<f64>, h1: f64, h2: f64, h3: f64) -> DVector<f64> {
        let mut out = &self.mat * u;
        if h1 != 0.0 {
            out.axpy(h1, &self.b_h1, 1.0);
        }
        if h2 != 0.0 {
            out.axpy(h2, &self.b_h2, 1.0);
        }
        if h3 != 0.0 {
            out.axpy(h3, &self.b_h3, 1.0);
        }
        out
    }
}

/// First- and third-derivative operators for one grid.
pub(crate) struct SpatialOps {
    pub d1: DiffOperator,
    pub d3: DiffOperator,
    pub n_nodes: usize,
    pub dx: f64,
}

fn ghost_rules(nx: usize, dx: f64) -> [GhostRule; 4] {
    let dx2 = dx * dx;
    // u_{-1}: solve the 4th-order u_xx(0) = h1 stencil together with the
    // vanishing fifth difference through nodes -2..3.
    let left1 = GhostRule {
        base: 0,
        coeffs: [20.0 / 11.0, -6.0 / 11.0, -4.0 / 11.0, 1.0 / 11.0],
        c_h1: 12.0 * dx2 / 11.0,
        c_h2: 0.0,
        c_h3: 0.0,
    };
    // u_{-2} = 5 u_{-1} − 10 u_0 + 10 u_1 − 5 u_2 + u_3, with u_{-1} substituted.
    let left2 = GhostRule {
        base: 0,
        coeffs: [-10.0 / 11.0, 80.0 / 11.0, -75.0 / 11.0, 16.0 / 11.0],
        c_h1: 60.0 * dx2 / 11.0,
        c_h2: 0.0,
        c_h3: 0.0,
    };
    // u_{nx+1}, u_{nx+2}: solve the 4th-order u_x(L) = h2 and u_xx(L) = h3
    // stencils for the two ghosts. Coefficients act on u[nx-3..=nx].
    let right1 = GhostRule {
        base: nx - 3,
        coeffs: [0.0, 0.25, -3.0, 3.75],
        c_h1: 0.0,
        c_h2: -1.5 * dx,
        c_h3: 1.5 * dx2,
    };
    let right2 = GhostRule {
        base: nx - 3,
        coeffs: [0.0, 3.0, -32.0, 30.0],
        c_h1: 0.0,
        c_h2: -24.0 * dx,
        c_h3: 12.0 * dx2,
    };
    [left2, left1, right1, right2]
}

/// Accumulates `weight ×` (node `j` of the extended grid) into `row`,
/// substituting ghost rules for `j < 0` or `j > nx`.
fn accumulate(
    mat: &mut DMatrix<f64>,
    b: [&mut DVector<f64>; 3],
    rules: &[GhostRule; 4],
    row: usize,
    j: isize,
    nx: isize,
    weight: f64,
) {
    if (0..=nx).contains(&j) {
        mat[(row, j as usize)] += weight;
        return;
    }
    let rule = match j {
        -2 => &rules[0],
        -1 => &rules[1],
        j if j == nx + 1 => &rules[2],
        j if j == nx + 2 => &rules[3],
        _ => unreachable!("stencil reaches at most two ghost nodes"),
    };
    for (k, c) in rule.coeffs.iter().enumerate() {
        if *c != 0.0 {
            mat[(row, rule.base + k)] += weight * c;
        }
    }
    b[0][row] += weight * rule.c_h1;
    b[1][row] += weight * rule.c_h2;
    b[2][row] += weight * rule.c_h3;
}

fn build_operator(nx: usize, dx: f64, stencil: &[(isize, f64)]) -> DiffOperator {
    let n = nx + 1;
    let rules = ghost_rules(nx, dx);
    let mut mat = DMatrix::zeros(n, n);
    let mut b_h1 = DVector::zeros(n);
    let mut b_h2 = DVector::zeros(n);
    let mut b_h3 = DVector::zeros(n);
    for row in 0..n {
        for &(offset, weight) in stencil {
            accumulate(
                &mut mat,
                [&mut b_h1, &mut b_h2, &mut b_h3],
                &rules,
                row,
                row as isize + offset,
                nx as isize,
                weight,
            );
        }
    }
    DiffOperator { mat, b_h1, b_h2, b_h3 }
}

impl SpatialOps {
    pub fn new(grid: &SpaceTimeGrid) -> Self {
        let nx = grid.nx();
        let dx = grid.dx();
        let d1 = build_operator(nx, dx, &[(-1, -0.5 / dx), (1, 0.5 / dx)]);
        let inv2dx3 = 0.5 / (dx * dx * dx);
        let d3 = build_operator(
            nx,
            dx,
            &[(-2, -inv2dx3), (-1, 2.0 * inv2dx3), (1, -2.0 * inv2dx3), (2, inv2dx3)],
        );
        Self { d1, d3, n_nodes: nx + 1, dx }
    }
}

/// Plain difference quotient of a nodal vector: centered in the interior,
/// one-sided second order at the ends. Used where no boundary data is
/// attached to the field (drift coefficients, estimate reports).
pub(crate) fn dx_plain(dx: f64, v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::zeros(n);
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &SpaceTimeGrid, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_fn(grid.n_nodes(), |i, _| f(grid.x(i)))
    }

    /// The eliminated rows are exact for polynomials up to degree 4 when the
    /// boundary data carries the exact traces.
    #[test]
    fn derivative_rows_are_exact_on_quartics() {
        let grid = SpaceTimeGrid::new(3.0, 0.0, 1.0, 12, 4).unwrap();
        let l = grid.length();
        let ops = SpatialOps::new(&grid);

        // u = x^4: u_x = 4x^3, u_xx = 12x^2, u_xxx = 24x.
        let u = sample(&grid, |x| x.powi(4));
        let h1 = 0.0;
        let h2 = 4.0 * l.powi(3);
        let h3 = 12.0 * l * l;
        let d3 = ops.d3.apply(&u, h1, h2, h3);
        for i in 0..grid.n_nodes() {
            let exact = 24.0 * grid.x(i);
            assert!(
                (d3[i] - exact).abs() < 1e-8 * (1.0 + exact.abs()),
                "d3 row {i}: {} vs {exact}",
                d3[i]
            );
        }

        // u = x^2: u_x = 2x exactly under the centered first derivative.
        let u = sample(&grid, |x| x * x);
        let d1 = ops.d1.apply(&u, 2.0, 2.0 * l, 2.0);
        for i in 0..grid.n_nodes() {
            let exact = 2.0 * grid.x(i);
            assert!((d1[i] - exact).abs() < 1e-10 * (1.0 + exact.abs()));
        }
    }

    /// Constants are annihilated by both operators with zero boundary data;
    /// this is what makes constant states exact steady states.
    #[test]
    fn constants_are_annihilated() {
        let grid = SpaceTimeGrid::new(2.0, 0.0, 1.0, 9, 4).unwrap();
        let ops = SpatialOps::new(&grid);
        let u = DVector::from_element(grid.n_nodes(), 4.2);
        assert!(ops.d1.apply(&u, 0.0, 0.0, 0.0).amax() < 1e-12);
        assert!(ops.d3.apply(&u, 0.0, 0.0, 0.0).amax() < 1e-12);
    }

    /// The scheme's first derivative exposes the control exactly through the
    /// boundary rows: for data consistent with `u_x(L) = h2` the row at `x = L`
    /// reproduces a second-order approximation of the trace.
    #[test]
    fn first_derivative_trace_is_consistent() {
        let grid = SpaceTimeGrid::new(1.0, 0.0, 1.0, 64, 4).unwrap();
        let ops = SpatialOps::new(&grid);
        let u = sample(&grid, |x| (2.3 * x).sin());
        let h1 = -(2.3_f64).powi(2) * (0.0_f64).sin();
        let h2 = 2.3 * (2.3_f64).cos();
        let h3 = -(2.3_f64).powi(2) * (2.3_f64).sin();
        let d1 = ops.d1.apply(&u, h1, h2, h3);
        let exact_l = 2.3 * (2.3 * grid.length()).cos();
        assert!((d1[grid.nx()] - exact_l).abs() < 1e-3);
        let exact_0 = 2.3;
        assert!((d1[0] - exact_0).abs() < 1e-3);
    }
}
