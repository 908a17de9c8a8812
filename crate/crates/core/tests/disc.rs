use std::f64::consts::PI;

use capillary_lab::disc::*;
use capillary_lab::fit::loglog_slope;
use nalgebra::DVector;

const RINGS: [usize; 4] = [17, 33, 65, 129];
const ANGLES: usize = 21;

/// Mean-free L2 error of a Neumann solve against `u*` with `Delta u* = f`.
fn neumann_error(n_r: usize) -> f64 {
    let grid = DiskGrid::flat(n_r, ANGLES).unwrap();
    // u* = e^x cos y + x^2 y: Delta u* = 2y.
    let exact = grid.sample(|x, y| x.exp() * y.cos() + x * x * y);
    let f = grid.sample(|_, y| 2.0 * y);
    let g = grid.sample_boundary(|t| {
        let (s, c) = t.sin_cos();
        let (x, y) = (c, s);
        let ux = x.exp() * y.cos() + 2.0 * x * y;
        let uy = -x.exp() * y.sin() + x * x;
        c * ux + s * uy
    });
    let solver = NeumannSolver::new(&grid).unwrap().with_tolerance(1e-2);
    let (u, _) = solver.solve(&f, &g).unwrap();
    let shift = (grid.integrate(&exact) - grid.integrate(&u)) / grid.area();
    let shifted = DiskField::new(u.values.add_scalar(shift));
    grid.l2_distance(&shifted, &exact)
}

fn robin_error(
    n_r: usize,
    h: impl Fn(f64) -> f64,
    exact: impl Fn(f64, f64) -> f64 + Copy,
    data: impl Fn(f64, f64) -> (f64, f64),
) -> f64 {
    let grid = DiskGrid::flat(n_r, ANGLES).unwrap();
    let u_star = grid.sample(exact);
    let f1 = grid.sample(|x, y| data(x, y).0);
    let f2 = grid.sample_boundary(|t| data(t.cos(), t.sin()).1);
    let hb = grid.sample_boundary(h);
    match robin_solve(&grid, &f1, &f2, &hb).unwrap() {
        RobinOutcome::Solved {
            particular, nullspace, ..
        } => {
            assert!(nullspace.is_empty());
            grid.l2_distance(&particular, &u_star)
        }
        other => panic!("{other:?}"),
    }
}

fn slope(errors: &[f64]) -> f64 {
    let h: Vec<f64> = RINGS.iter().map(|n| 1.0 / *n as f64).collect();
    loglog_slope(&h, errors).unwrap()
}

#[test]
fn neumann_manufactured_solution_converges_at_second_order() {
    let errs: Vec<f64> = RINGS.iter().map(|&n| neumann_error(n)).collect();
    let order = slope(&errs);
    assert!(order >= 1.9, "{order} {errs:?}");
}

#[test]
fn robin_unit_coefficient_recovers_the_linear_solution() {
    // u* = r cos(theta): -Delta u* = 0 and d_nu u* + u* = 2 cos(theta).
    let errs: Vec<f64> = RINGS
        .iter()
        .map(|&n| robin_error(n, |_| 1.0, |x, _| x, |x, _| (0.0, 2.0 * x)))
        .collect();
    assert!(errs[3] < 1e-3, "{errs:?}");
    if errs.iter().all(|e| *e > 1e-12) {
        let order = slope(&errs);
        assert!(order >= 1.9, "{order} {errs:?}");
    }
}

#[test]
fn robin_variable_coefficient_converges_at_second_order() {
    let h = |t: f64| 0.5 + 0.3 * t.cos();
    let exact = |x: f64, y: f64| x * y + x * x + (0.5 * y).sin();
    let data = |x: f64, y: f64| {
        // On the unit circle the outward normal is (x, y).
        let lap = 2.0 - 0.25 * (0.5 * y).sin();
        let ux = y + 2.0 * x;
        let uy = x + 0.5 * (0.5 * y).cos();
        (-lap, x * ux + y * uy + (0.5 + 0.3 * x) * exact(x, y))
    };
    let errs: Vec<f64> = RINGS.iter().map(|&n| robin_error(n, h, exact, data)).collect();
    let order = slope(&errs);
    assert!(order >= 1.9, "{order} {errs:?}");
}

#[test]
fn ellipse_neumann_problem_is_solvable_and_symmetric() {
    let grid = DiskGrid::ellipse(1.4, 0.7, 24, 21).unwrap();
    assert!(grid.symmetry_defect() < 1e-12);
    let one = grid.sample(|_, _| 1.0);
    assert!(grid.dirichlet_form(&one, &one).abs() < 1e-10);
    // Compatible data: zero source, boundary flux with zero mean.
    let raw = grid.sample_boundary(|t| (2.0 * t).cos());
    let g = raw.add_scalar(-grid.integrate_boundary(&raw) / grid.boundary_length());
    let (u, rep) = laplace_neumann_solve(&grid, &DiskField::new(DVector::zeros(grid.len())), &g).unwrap();
    assert!(rep.residual < 1e-9, "{}", rep.residual);
    assert!(grid.integrate(&u).abs() < 1e-10);
}

#[test]
fn certificate_is_exact_on_constant_nullspace() {
    let grid = DiskGrid::flat(16, 15).unwrap();
    let f1 = grid.sample(|_, _| 1.0);
    let zero = DVector::zeros(15);
    match robin_solve(&grid, &f1, &zero, &zero).unwrap() {
        RobinOutcome::Incompatible { violated, nullspace } => {
            assert_eq!(nullspace.len(), 1);
            // Pairing of 1 with the normalized constant 1 / sqrt(pi).
            assert!((violated[0].pairing.abs() - PI.sqrt()).abs() < 1e-10);
        }
        other => panic!("{other:?}"),
    }
}

/// Power series for J0 and J1.
fn bessel01(x: f64) -> (f64, f64) {
    let (mut j0, mut j1) = (0.0, 0.0);
    let mut term0 = 1.0;
    let mut term1 = 0.5 * x;
    for k in 0..40 {
        j0 += term0;
        j1 += term1;
        let kf = k as f64;
        term0 *= -(x * x / 4.0) / ((kf + 1.0) * (kf + 1.0));
        term1 *= -(x * x / 4.0) / ((kf + 1.0) * (kf + 2.0));
    }
    (j0, j1)
}

/// First root of `J0(k) = k J1(k)`: radial mode with `d_r f + f = 0` at `r = 1`.
fn robin_bessel_root() -> f64 {
    let phi = |k: f64| {
        let (j0, j1) = bessel01(k);
        j0 - k * j1
    };
    let (mut a, mut b) = (0.5, 2.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if phi(a) * phi(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn robin_ground_state_matches_the_bessel_oracle() {
    let k = robin_bessel_root();
    let exact = k * k;
    let mu = |n: usize| {
        let grid = DiskGrid::flat(n, 15).unwrap();
        let q = DVector::from_element(15, -1.0);
        eigen_smallest(&grid, &DVector::zeros(grid.len()), &q).unwrap().value
    };
    let (coarse, fine) = (mu(64), mu(128));
    // Second-order Richardson step.
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!(fine > 0.0);
    assert!((extrapolated - exact).abs() < 1e-4, "{extrapolated} vs {exact}");
}

#[test]
fn smooth_solutions_have_no_odd_modes_at_the_pole() {
    let grid = DiskGrid::flat(64, 21).unwrap();
    let g = grid.sample_boundary(|t| t.cos() + 0.5 * (2.0 * t).sin());
    let (u, _) = laplace_neumann_solve(&grid, &DiskField::new(DVector::zeros(grid.len())), &g).unwrap();
    let defect = grid.pole_parity_defect(&u);
    assert!(defect < 1e-8, "{defect}");
}
