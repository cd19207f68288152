// Probes: rank-edge behavior of the spectra, steering-to-constant at the
// return-method resolution, target-shape trade-offs, and MMS variants that
// separate the space and time orders cleanly.

use kdv_lab_core::grid::{l2_norm, BoundarySignal, Drift, Forcing, SpaceTimeGrid};
use kdv_lab_core::linear_control::{
    build_control_operator, solve_linear_control, BasisKind, ControlBasis,
};
use kdv_lab_core::solver::solve_linear;
use nalgebra::DVector;
use std::f64::consts::PI;

fn full_spectrum(length: f64, nx: usize, nt: usize, count: usize, drift: f64) -> Vec<f64> {
    let grid = SpaceTimeGrid::new(length, 0.0, 1.0, nx, nt).unwrap();
    let basis = ControlBasis::new(BasisKind::PiecewiseConstant, count, (0.0, 1.0)).unwrap();
    let op = build_control_operator(drift, &grid, &basis).unwrap();
    let smax = op.sigma_max();
    op.singular_values().iter().map(|s| s / smax).collect()
}

fn rank_edge(ratios: &[f64], cutoff: f64) -> (usize, f64) {
    let mut last = (0, 1.0);
    for (k, &r) in ratios.iter().enumerate() {
        if r > cutoff {
            last = (k, r);
        } else {
            break;
        }
    }
    last
}

fn steer_const_probe(eps: f64, count: usize, tau: f64) {
    let length = 2.0 * PI;
    let grid = SpaceTimeGrid::new(length, 0.0, tau, 128, 256).unwrap();
    let basis = ControlBasis::new(BasisKind::PiecewiseConstant, count, (0.0, tau)).unwrap();
    let op = build_control_operator(1.0 + eps, &grid, &basis).unwrap();
    let mut y0 = DVector::from_fn(grid.n_nodes(), |i, _| {
        let x = grid.x(i);
        (-0.5 * ((x - 0.5 * length) / 0.8_f64).powi(2)).exp()
    });
    let n0 = l2_norm(grid.dx(), &y0);
    y0 *= 0.005 / n0;
    let d = 0.01;
    let target = DVector::from_element(grid.n_nodes(), d);
    for reg in [1e-10, 1e-7] {
        let sol = solve_linear_control(&op, &y0, &target, reg).unwrap();
        println!(
            "eps={eps:.3} count={count} tau={tau} reg={reg:.0e}: abs_res={:.3e} |h|={:.3e}",
            sol.residual,
            sol.signal.h2_l2_norm(grid.dt()),
        );
    }
}

fn bump_probe(width_frac: f64, center_frac: f64, count: usize, t_final: f64) {
    let length = 2.2 * PI;
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
    println!(
        "T={t_final} count={count} width={width_frac}L center={center_frac}L: rel_res={:.3e} |h|={:.3e}",
        sol.relative_residual,
        sol.signal.h2_l2_norm(grid.dt()),
    );
}

fn mms_error_gentle(nx: usize, nt: usize, time_freq: f64) -> f64 {
    let length = 5.0;
    let a = 1.5;
    let grid = SpaceTimeGrid::new(length, 0.0, 1.0, nx, nt).unwrap();
    let om = PI / length;
    // phi = sin(om x) + om x satisfies phi''(0) = phi'(L) = phi''(L) = 0.
    let phi = |x: f64| (om * x).sin() + om * x;
    let phi_x = |x: f64| om * ((om * x).cos() + 1.0);
    let phi_xxx = |x: f64| -om.powi(3) * (om * x).cos();
    let amp = |t: f64| (-t).exp() * (time_freq * t).cos();
    let amp_t =
        |t: f64| (-t).exp() * (-(time_freq * t).cos() - time_freq * (time_freq * t).sin());
    let f = Forcing::from_fn(&grid, |x, t| {
        amp_t(t) * phi(x) + amp(t) * (a * phi_x(x) + phi_xxx(x))
    });
    let y0 = DVector::from_fn(grid.n_nodes(), |i, _| phi(grid.x(i)));
    let h = BoundarySignal::zeros(&grid);
    let y = solve_linear(&y0, &h, &f, &Drift::Constant(a), &grid).unwrap();
    let mut worst = 0.0_f64;
    for n in 0..=nt {
        let t = grid.t(n);
        let diff = DVector::from_fn(grid.n_nodes(), |i, _| y.value(n, i) - amp(t) * phi(grid.x(i)));
        worst = worst.max(l2_norm(grid.dx(), &diff));
    }
    worst
}

fn main() {
    println!("== rank edge of 64-basis spectra (T=1, drift 1) ==");
    for (label, length) in [("2pi ", 2.0 * PI), ("2.2pi", 2.2 * PI), ("pi  ", PI)] {
        let ratios = full_spectrum(length, 128, 256, 64, 1.0);
        let (k, edge) = rank_edge(&ratios, 1e-13);
        let around: Vec<String> = ratios[k.saturating_sub(6)..=(k + 1).min(63)]
            .iter()
            .map(|r| format!("{r:.1e}"))
            .collect();
        println!("L={label}: rank_edge k={k} sigma_r/smax={edge:.2e}  around: {}", around.join(" "));
    }

    println!("\n== rank-edge refinement at critical L=2pi ==");
    for (nx, nt) in [(64, 128), (128, 256), (256, 512)] {
        let ratios = full_spectrum(2.0 * PI, nx, nt, 64, 1.0);
        let (k, edge) = rank_edge(&ratios, 1e-13);
        println!("nx={nx}: rank_edge k={k} sigma_r/smax={edge:.2e}");
    }

    println!("\n== linear steer-to-constant at L=2pi, tau=1 ==");
    for eps in [0.01, 0.05, 0.1] {
        steer_const_probe(eps, 64, 1.0);
    }

    println!("\n== bump variants at count 64 ==");
    bump_probe(0.25, 0.5, 64, 3.0);
    bump_probe(1.0 / 6.0, 0.5, 64, 3.0);
    bump_probe(0.125, 0.6, 64, 3.0);
    bump_probe(0.25, 0.5, 64, 2.0);

    println!("\n== gentle MMS space order (nt = 4 nx) ==");
    let mut prev = None;
    for nx in [32, 64, 128] {
        let e = mms_error_gentle(nx, 4 * nx, 0.0);
        let order = prev.map(|p: f64| (p / e).log2()).unwrap_or(f64::NAN);
        println!("nx={nx:4}  err={e:.4e}  order={order:.3}");
        prev = Some(e);
    }
    println!("== oscillatory MMS time order (nx=512, freq=6) ==");
    let mut prev = None;
    for nt in [32, 64, 128] {
        let e = mms_error_gentle(512, nt, 6.0);
        let order = prev.map(|p: f64| (p / e).log2()).unwrap_or(f64::NAN);
        println!("nt={nt:4}  err={e:.4e}  order={order:.3}");
        prev = Some(e);
    }
}
