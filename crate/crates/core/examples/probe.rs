// Scratch numerical probes used while validating the scheme; not part of the
// test suite.

use kdv_lab_core::grid::{l2_norm, BoundarySignal, Drift, Forcing, SpaceTimeGrid};
use kdv_lab_core::linear_control::{
    build_control_operator, solve_linear_control, BasisKind, ControlBasis,
};
use kdv_lab_core::solver::{energy_balance_report, solve_linear};
use nalgebra::DVector;
use std::f64::consts::PI;

fn mms_error(length: f64, a: f64, nx: usize, nt: usize) -> f64 {
    let grid = SpaceTimeGrid::new(length, 0.0, 1.0, nx, nt).unwrap();
    let om = PI / length;
    let exact = |x: f64, t: f64| (-t).exp() * (om * x).sin().powi(3);
    // sin^3 θ = (3 sin θ − sin 3θ)/4
    let u_x = |x: f64, t: f64| (-t).exp() * om * (3.0 * (om * x).cos() - 3.0 * (3.0 * om * x).cos()) / 4.0;
    let u_xxx = |x: f64, t: f64| {
        (-t).exp() * om.powi(3) * (-3.0 * (om * x).cos() + 27.0 * (3.0 * om * x).cos()) / 4.0
    };
    let f = Forcing::from_fn(&grid, |x, t| -exact(x, t) + a * u_x(x, t) + u_xxx(x, t));
    let y0 = DVector::from_fn(grid.n_nodes(), |i, _| exact(grid.x(i), 0.0));
    let h = BoundarySignal::zeros(&grid);
    let y = solve_linear(&y0, &h, &f, &Drift::Constant(a), &grid).unwrap();
    let mut worst = 0.0_f64;
    for n in 0..=nt {
        let diff = DVector::from_fn(grid.n_nodes(), |i, _| {
            y.value(n, i) - exact(grid.x(i), grid.t(n))
        });
        worst = worst.max(l2_norm(grid.dx(), &diff));
    }
    worst
}

fn main() {
    println!("== MMS convergence (L=5, a=1.5) ==");
    let mut prev = None;
    for nx in [32, 64, 128, 256] {
        let e = mms_error(5.0, 1.5, nx, nx);
        let order = prev.map(|p: f64| (p / e).log2()).unwrap_or(f64::NAN);
        println!("nx={nx:4}  err={e:.4e}  order={order:.3}");
        prev = Some(e);
    }

    println!("== energy defect (gaussian, a=1.3, h=0) ==");
    let mut prev = None;
    for nx in [32, 64, 128, 256] {
        let grid = SpaceTimeGrid::new(5.0, 0.0, 1.0, nx, nx).unwrap();
        let y0 = DVector::from_fn(grid.n_nodes(), |i, _| {
            let x = grid.x(i);
            (-0.5 * ((x - 2.5) / 0.6_f64).powi(2)).exp()
        });
        let h = BoundarySignal::zeros(&grid);
        let y = solve_linear(&y0, &h, &Forcing::Zero, &Drift::Constant(1.3), &grid).unwrap();
        let d = energy_balance_report(&y, &h, &Drift::Constant(1.3)).unwrap();
        let order = prev.map(|p: f64| (p / d).log2()).unwrap_or(f64::NAN);
        println!("nx={nx:4}  defect={d:.4e}  order={order:.3}");
        prev = Some(d);
    }

    println!("== Gramian spectrum: critical vs non-critical ==");
    for (label, length) in [("L=2pi  (critical)", 2.0 * PI), ("L=2.2pi (off)", 2.2 * PI), ("L=pi   (critical)", PI)] {
        let grid = SpaceTimeGrid::new(length, 0.0, 1.0, 128, 256).unwrap();
        let basis = ControlBasis::new(BasisKind::PiecewiseConstant, 64, (0.0, 1.0)).unwrap();
        let op = build_control_operator(1.0, &grid, &basis).unwrap();
        let sv = op.singular_values();
        let ratio = op.sigma_min() / op.sigma_max();
        println!(
            "{label}: sigma_max={:.3e} sigma_min={:.3e} ratio={:.3e}  tail: {:?}",
            op.sigma_max(),
            op.sigma_min(),
            ratio,
            &sv[sv.len() - 4..].iter().map(|s| format!("{:.2e}", s / op.sigma_max())).collect::<Vec<_>>()
        );
    }

    println!("== linear steering residual at L=2.2pi ==");
    let length = 2.2 * PI;
    let grid = SpaceTimeGrid::new(length, 0.0, 1.0, 128, 256).unwrap();
    let basis = ControlBasis::new(BasisKind::PiecewiseConstant, 64, (0.0, 1.0)).unwrap();
    let op = build_control_operator(1.0, &grid, &basis).unwrap();
    let mut target = DVector::from_fn(grid.n_nodes(), |i, _| {
        let x = grid.x(i);
        (-0.5 * ((x - 0.5 * length) / (length / 8.0)).powi(2)).exp()
    });
    let norm = l2_norm(grid.dx(), &target);
    target *= 0.01 / norm;
    let u0 = DVector::zeros(grid.n_nodes());
    for reg in [1e-10, 1e-8, 1e-6] {
        let sol = solve_linear_control(&op, &u0, &target, reg).unwrap();
        println!(
            "reg={reg:.0e}: rel_residual={:.3e}  |h|_L2={:.3e} ill={}",
            sol.relative_residual,
            sol.signal.h2_l2_norm(grid.dt()),
            sol.ill_conditioned
        );
    }
}
