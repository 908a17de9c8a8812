use std::f64::consts::PI;

use capillary_lab::cone::cone_comparison;
use capillary_lab::curves::{turning_integral, BoundaryCurve, CurveShape};
use capillary_lab::disc::{DiskField, DiskGrid};
use capillary_lab::fit::{loglog_slope, richardson_halving};
use capillary_lab::foliation::{monotone_quantity, PoleRegime};
use capillary_lab::metric::{
    check_spd, inner, metric_cosine, AmbientMetric, Mat3, PerturbationTerm, ScalarField, Vec3,
};
use capillary_lab::polar::PolarGrid;
use capillary_lab::profile::ProfileCurve;
use nalgebra::DVector;
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn small_symmetric() -> impl Strategy<Value = Mat3> {
    prop::array::uniform6(-0.15..0.15f64).prop_map(|e| Mat3::new(e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5]))
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn perturbed_metrics_stay_symmetric_positive(h in small_symmetric(), grad in vec3(), p in vec3(), a in vec3(), b in vec3()) {
        let g = AmbientMetric::perturbed(
            Mat3::identity(),
            vec![PerturbationTerm { tensor: h, field: ScalarField::Linear { gradient: grad, offset: 0.0 } }],
        ).unwrap();
        let gp = g.value(&p).unwrap();
        prop_assert!(check_spd(&gp).is_ok());
        prop_assert!((inner(&gp, &a, &b) - inner(&gp, &b, &a)).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_sectional_curvature_is_minus_one(x in vec3(), y in vec3(), base in vec3()) {
        prop_assume!(x.cross(&y).norm() > 0.1);
        let p = Vec3::new(base.x, base.y, 1.5 + base.z);
        let k = AmbientMetric::Hyperbolic.curvature(&p).unwrap().sectional(&x, &y);
        prop_assert!((k + 1.0).abs() < 1e-8, "{}", k);
    }

    #[test]
    fn cosine_ignores_vector_lengths(h in small_symmetric(), a in vec3(), b in vec3(), s in 0.1..10.0f64) {
        prop_assume!(a.norm() > 0.1 && b.norm() > 0.1);
        let g = Mat3::identity() + h;
        let c1 = metric_cosine(&g, &a, &b);
        let c2 = metric_cosine(&g, &(a * s), &b);
        prop_assert!((c1.cos - c2.cos).abs() < 1e-12);
        prop_assert!(c1.one_minus_cos >= 0.0 && c1.one_minus_cos <= 2.0 + 1e-12);
    }

    #[test]
    fn polar_quadrature_is_exact_on_even_polynomials(c in prop::array::uniform5(-2.0..2.0f64), odd in -2.0..2.0f64) {
        let grid = PolarGrid::new(11, 12).unwrap();
        let u = grid.sample(|x, y| {
            c[0] + c[1] * x * x + c[2] * y * y + c[3] * x * x * y * y + c[4] * x.powi(4) + odd * x * y.powi(3)
        });
        // Unit disk moments: 1 -> pi, x^2 -> pi/4, x^2 y^2 -> pi/24, x^4 -> pi/8.
        let exact = PI * (c[0] + 0.25 * (c[1] + c[2]) + c[3] / 24.0 + c[4] / 8.0);
        prop_assert!((grid.integrate(&u) - exact).abs() < 1e-12);
    }

    #[test]
    fn disk_stiffness_is_symmetric_and_nonnegative(a in 0.5..2.0f64, b in 0.5..2.0f64, seed in 0u32..1000) {
        let grid = DiskGrid::ellipse(a, b, 6, 9).unwrap();
        prop_assert!(grid.symmetry_defect() < 1e-12);
        let s = seed as f64;
        let u = DiskField::new(DVector::from_fn(grid.len(), |i, _| ((i as f64 + s) * 0.713).sin()));
        prop_assert!(grid.dirichlet_form(&u, &u) >= -1e-12);
        prop_assert!(grid.divergence_defect(&u) < 1e-10);
    }

    #[test]
    fn identity_comparison_has_zero_margins(abar in 0.3..3.0f64) {
        let rep = cone_comparison(&Mat3::identity(), abar, 36).unwrap();
        prop_assert!(rep.condition_a_margin.abs() < 1e-10);
        prop_assert!(rep.condition_b_margin.abs() < 1e-10);
        prop_assert!(rep.claim_margins.iter().all(|m| m.abs() < 1e-10));
    }

    #[test]
    fn loglog_slope_recovers_powers(p in 0.5..5.0f64, c in 0.1..10.0f64) {
        let h: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|x| c * x.powf(p)).collect();
        prop_assert!((loglog_slope(&h, &e).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn richardson_removes_integer_powers(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let v: Vec<f64> = (0..3).map(|j| {
            let h = 0.1 * 0.5f64.powi(j);
            a + b * h + c * h * h
        }).collect();
        prop_assert!((richardson_halving(&v, 1) - a).abs() < 1e-10);
    }

    #[test]
    fn monotone_report_scales_with_lambda(scale in 0.1..10.0f64, slope in -1.0..1.0f64) {
        let ts = [0.0125, 0.025, 0.05, 0.1];
        let lam: Vec<f64> = ts.iter().map(|t| 1.0 + slope * t).collect();
        let psi: Vec<f64> = ts.iter().map(|t| 2.0 / t).collect();
        let scaled: Vec<f64> = lam.iter().map(|l| l * scale).collect();
        let r1 = monotone_quantity(PoleRegime::Conical, &ts, &lam, &psi).unwrap();
        let r2 = monotone_quantity(PoleRegime::Conical, &ts, &scaled, &psi).unwrap();
        prop_assert!((r2.max_violation - scale * r1.max_violation).abs() < 1e-9 * (1.0 + r2.max_violation));
        // exp(int 2/t) lambda grows like t^2 for positive lambda.
        if slope >= 0.0 {
            prop_assert_eq!(r1.max_violation, 0.0);
        }
    }

    #[test]
    fn separating_curves_turn_at_least_once(
        rho_c in prop::array::uniform3(-0.1..0.1f64),
        theta_c in prop::array::uniform3(-0.3..0.3f64),
        eps in 0.0..0.2f64,
    ) {
        let prof = ProfileCurve::cone(0.8, 2.0).unwrap();
        let shape = CurveShape::Fourier {
            rho0: 1.0,
            rho_cos: vec![rho_c[0], rho_c[1]],
            rho_sin: vec![rho_c[2]],
            theta_cos: vec![theta_c[0]],
            theta_sin: vec![theta_c[1], theta_c[2]],
            winding: 1,
        };
        let curve = BoundaryCurve::new(shape).unwrap();
        let value = turning_integral(&prof, &curve).unwrap();
        prop_assert!(value >= 2.0 * PI - 1e-6, "{}", value);
        let again = turning_integral(&prof, &curve.clone().reparametrized(eps, 2).unwrap()).unwrap();
        prop_assert!((again - value).abs() < 1e-8);
    }
}
