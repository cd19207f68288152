// Deeper probes: nonzero-trace MMS (validates the boundary-data paths),
// full Gramian spectra, and reachable-energy decomposition of bump targets.

use kdv_lab_core::grid::{l2_inner, l2_norm, BoundarySignal, Drift, Forcing, SpaceTimeGrid};
use kdv_lab_core::linear_control::{
    build_control_operator, solve_linear_control, BasisKind, ControlBasis,
};
use kdv_lab_core::solver::solve_linear;
use nalgebra::DVector;
use std::f64::consts::PI;

fn mms_error_traces(length: f64, a: f64, nx: usize, nt: usize) -> f64 {
    let grid = SpaceTimeGrid::new(length, 0.0, 1.0, nx, nt).unwrap();
    let om = PI / length;
    // u = e^{-t} (sin^3(om x) + (x^2 + x)/20): nonzero h1, h2, h3.
    let s3 = |x: f64| (om * x).sin().powi(3);
    let exact = |x: f64, t: f64| (-t).exp() * (s3(x) + (x * x + x) / 20.0);
    let u_x = |x: f64, t: f64| {
        (-t).exp()
            * (om * (3.0 * (om * x).cos() - 3.0 * (3.0 * om * x).cos()) / 4.0
                + (2.0 * x + 1.0) / 20.0)
    };
    let u_xx = |x: f64, t: f64| {
        (-t).exp()
            * (om * om * (-3.0 * (om * x).sin() + 9.0 * (3.0 * om * x).sin()) / 4.0 + 0.1)
    };
    let u_xxx = |x: f64, t: f64| {
        (-t).exp() * om.powi(3) * (-3.0 * (om * x).cos() + 27.0 * (3.0 * om * x).cos()) / 4.0
    };
    let f = Forcing::from_fn(&grid, |x, t| -exact(x, t) + a * u_x(x, t) + u_xxx(x, t));
    let y0 = DVector::from_fn(grid.n_nodes(), |i, _| exact(grid.x(i), 0.0));
    let h1: Vec<f64> = (0..=nt).map(|n| u_xx(0.0, grid.t(n))).collect();
    let h2: Vec<f64> = (0..=nt).map(|n| u_x(length, grid.t(n))).collect();
    let h3: Vec<f64> = (0..=nt).map(|n| u_xx(length, grid.t(n))).collect();
    let h = BoundarySignal::new(h1, h2, h3).unwrap();
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

fn spectrum_probe(length: f64, t_final: f64, nx: usize, nt: usize, count: usize, label: &str) {
    let grid = SpaceTimeGrid::new(length, 0.0, t_final, nx, nt).unwrap();
    let basis = ControlBasis::new(BasisKind::PiecewiseConstant, count, (0.0, t_final)).unwrap();
    let op = build_control_operator(1.0, &grid, &basis).unwrap();
    let smax = op.sigma_max();
    let ratios: Vec<String> = op
        .singular_values()
        .iter()
        .map(|s| format!("{:.1e}", s / smax))
        .collect();
    println!("{label}: {}", ratios.join(" "));
}

fn capture_probe(length: f64, t_final: f64, count: usize, center_frac: f64, width_frac: f64) {
    let grid = SpaceTimeGrid::new(length, 0.0, t_final, 128, 256).unwrap();
    let basis = ControlBasis::new(BasisKind::PiecewiseConstant, count, (0.0, t_final)).unwrap();
    let op = build_control_operator(1.0, &grid, &basis).unwrap();
    let mut target = DVector::from_fn(grid.n_nodes(), |i, _| {
        let x = grid.x(i);
        (-0.5 * ((x - center_frac * length) / (width_frac * length)).powi(2)).exp()
    });
    let norm = l2_norm(grid.dx(), &target);
    target *= 0.01 / norm;
    let u0 = DVector::zeros(grid.n_nodes());
    let sol = solve_linear_control(&op, &u0, &target, 1e-10).unwrap();
    // Cumulative captured energy over the left singular directions.
    let tnorm = l2_norm(grid.dx(), &target);
    let mut captured = 0.0;
    let mut line = String::new();
    for k in 0..op.singular_values().len() {
        let mode = op.state_mode(k);
        let coef = l2_inner(grid.dx(), &mode, &target);
        captured += coef * coef;
        if k % 8 == 7 {
            line.push_str(&format!("k<={:2}:{:.4} ", k, captured.sqrt() / tnorm));
        }
    }
    println!(
        "T={t_final} count={count} center={center_frac}L width={width_frac}L: rel_res={:.3e} |h|={:.2e}\n  capture {line}",
        sol.relative_residual,
        sol.signal.h2_l2_norm(grid.dt()),
    );
}

fn main() {
    println!("== MMS with nonzero boundary traces (L=5, a=1.5) ==");
    let mut prev = None;
    for nx in [32, 64, 128, 256] {
        let e = mms_error_traces(5.0, 1.5, nx, nx);
        let order = prev.map(|p: f64| (p / e).log2()).unwrap_or(f64::NAN);
        println!("nx={nx:4}  err={e:.4e}  order={order:.3}");
        prev = Some(e);
    }

    println!("\n== full sigma/sigma_max spectra (nx=128, nt=256, basis 32) ==");
    spectrum_probe(2.0 * PI, 1.0, 128, 256, 32, "L=2pi   crit");
    spectrum_probe(2.2 * PI, 1.0, 128, 256, 32, "L=2.2pi off ");
    spectrum_probe(PI, 1.0, 128, 256, 32, "L=pi    crit");

    println!("\n== capture profiles ==");
    capture_probe(2.2 * PI, 1.0, 64, 0.5, 0.125);
    capture_probe(2.2 * PI, 2.0, 64, 0.5, 0.125);
    capture_probe(2.2 * PI, 1.0, 64, 0.5, 0.25);
    capture_probe(2.2 * PI, 2.0, 64, 0.5, 0.25);
    capture_probe(2.2 * PI, 3.0, 64, 0.5, 0.125);
}
