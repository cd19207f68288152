// Probes: separated space/time convergence orders, long-horizon Gramian
// spectra at basis 64, and the steering residual trade-off surface.

use kdv_lab_core::grid::{l2_norm, BoundarySignal, Drift, Forcing, SpaceTimeGrid};
use kdv_lab_core::linear_control::{
    build_control_operator, solve_linear_control, BasisKind, ControlBasis,
};
use kdv_lab_core::solver::solve_linear;
use nalgebra::DVector;
use std::f64::consts::PI;

fn mms_error(length: f64, a: f64, nx: usize, nt: usize) -> f64 {
    let grid = SpaceTimeGrid::new(length, 0.0, 1.0, nx, nt).unwrap();
    let om = PI / length;
    let exact = |x: f64, t: f64| (-t).exp() * (om * x).sin().powi(3);
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

fn steer_probe(t_final: f64, count: usize, kind: BasisKind, reg: f64) {
    let length = 2.2 * PI;
    let grid = SpaceTimeGrid::new(length, 0.0, t_final, 128, 256).unwrap();
    let basis = ControlBasis::new(kind, count, (0.0, t_final)).unwrap();
    let op = build_control_operator(1.0, &grid, &basis).unwrap();
    let mut target = DVector::from_fn(grid.n_nodes(), |i, _| {
        let x = grid.x(i);
        (-0.5 * ((x - 0.5 * length) / (length / 8.0)).powi(2)).exp()
    });
    let norm = l2_norm(grid.dx(), &target);
    target *= 0.01 / norm;
    let u0 = DVector::zeros(grid.n_nodes());
    let sol = solve_linear_control(&op, &u0, &target, reg).unwrap();
    println!(
        "T={t_final} {kind:?} count={count} reg={reg:.0e}: rel_res={:.3e} |h|={:.3e}",
        sol.relative_residual,
        sol.signal.h2_l2_norm(grid.dt()),
    );
}

fn main() {
    println!("== space order (nt=1024 fixed) ==");
    let mut prev = None;
    for nx in [32, 64, 128] {
        let e = mms_error(5.0, 1.5, nx, 1024);
        let order = prev.map(|p: f64| (p / e).log2()).unwrap_or(f64::NAN);
        println!("nx={nx:4}  err={e:.4e}  order={order:.3}");
        prev = Some(e);
    }
    println!("== time order (nx=512 fixed) ==");
    let mut prev = None;
    for nt in [32, 64, 128] {
        let e = mms_error(5.0, 1.5, 512, nt);
        let order = prev.map(|p: f64| (p / e).log2()).unwrap_or(f64::NAN);
        println!("nt={nt:4}  err={e:.4e}  order={order:.3}");
        prev = Some(e);
    }

    println!("\n== spectra at basis 64, longer horizons ==");
    for t_final in [2.0, 3.0] {
        for (label, length) in [("2pi ", 2.0 * PI), ("2.2pi", 2.2 * PI), ("pi  ", PI)] {
            let grid = SpaceTimeGrid::new(length, 0.0, t_final, 128, 256).unwrap();
            let basis =
                ControlBasis::new(BasisKind::PiecewiseConstant, 64, (0.0, t_final)).unwrap();
            let op = build_control_operator(1.0, &grid, &basis).unwrap();
            let smax = op.sigma_max();
            let sv = op.singular_values();
            let tail: Vec<String> =
                sv[sv.len() - 8..].iter().map(|s| format!("{:.1e}", s / smax)).collect();
            println!(
                "T={t_final} L={label}: ratio={:.3e}  tail {}",
                op.sigma_min() / smax,
                tail.join(" ")
            );
        }
    }

    println!("\n== steering trade-offs (L=2.2pi, bump width L/8) ==");
    for t_final in [3.0, 4.0] {
        for count in [64, 96] {
            for reg in [1e-10, 1e-8] {
                steer_probe(t_final, count, BasisKind::PiecewiseConstant, reg);
            }
        }
        steer_probe(t_final, 64, BasisKind::Hat, 1e-10);
    }
}
