use capillary_lab::asymptotics::*;
use capillary_lab::barrier::*;
use capillary_lab::capillary::CapillaryConfig;
use capillary_lab::cone::sample_admissible_metrics;
use capillary_lab::fit::richardson_halving;
use capillary_lab::foliation::*;
use capillary_lab::metric::{AmbientMetric, Mat3, PerturbationTerm, ScalarField, Vec3};
use capillary_lab::polar::PolarGrid;
use capillary_lab::profile::{PoleType, ProfileCurve, ProfileShape};
use nalgebra::DVector;

fn halving(n: usize) -> Vec<f64> {
    (0..n).map(|j| 0.1 * 0.5f64.powi(j as i32)).collect()
}

fn h_tensor() -> Mat3 {
    Mat3::new(0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4)
}

fn linear_term(gradient: Vec3) -> PerturbationTerm {
    PerturbationTerm {
        tensor: h_tensor(),
        field: ScalarField::Linear { gradient, offset: 0.0 },
    }
}

fn perturbed_cone() -> CapillaryConfig {
    let g = AmbientMetric::perturbed(Mat3::identity(), vec![linear_term(Vec3::new(0.2, -0.1, 1.0))]).unwrap();
    CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap()).with_ambient(g)
}

fn sphere_with(ambient: AmbientMetric) -> CapillaryConfig {
    CapillaryConfig::euclidean(ProfileCurve::sphere_cap(1.0, 0.8).unwrap()).with_ambient(ambient)
}

fn stretch() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.3))
}

fn t_psi(p: &FoliationProblem, fam: &[LeafSolution]) -> Vec<f64> {
    let opts = SolveOptions::default();
    fam.iter().map(|s| s.t * p.psi_coefficient(s, &opts).unwrap()).collect()
}

#[test]
fn euclidean_cone_family_is_exact() {
    let p = FoliationProblem::new(
        CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap()),
        15,
        16,
    )
    .unwrap();
    let fam = p.solve_family(&halving(6), &SolveOptions::default()).unwrap();
    for s in &fam {
        assert!(s.u.iter().all(|v| v.abs() < 1e-9));
        assert!(s.lambda.abs() < 1e-9);
        assert!(s.interior_residual < 1e-9 && s.angle_residual < 1e-9);
        assert!(p.lambda_identity_residual(s).unwrap().abs() < 1e-9);
    }
    let ts: Vec<f64> = fam.iter().map(|s| s.t).collect();
    let lam: Vec<f64> = fam.iter().map(|s| s.lambda).collect();
    let report = monotone_quantity(PoleRegime::Conical, &ts, &lam, &t_psi(&p, &fam)).unwrap();
    assert!(report.derivative.iter().all(|d| d.abs() < 1e-6));
}

#[test]
fn perturbed_cone_coefficient_extrapolates_to_two() {
    let p = FoliationProblem::new(perturbed_cone(), 15, 16).unwrap();
    let fam = p.solve_family(&halving(6), &SolveOptions::default()).unwrap();
    for s in &fam {
        assert!(s.interior_residual < 1e-8 && s.angle_residual < 1e-8);
    }
    let limit = richardson_halving(&t_psi(&p, &fam), 1);
    assert!((limit - 2.0).abs() < 0.1, "{limit}");
}

#[test]
fn lambda_identity_remainder_is_third_order() {
    let p = FoliationProblem::new(perturbed_cone(), 15, 16).unwrap();
    let ts = halving(6);
    let fam = p.solve_family(&ts, &SolveOptions::default()).unwrap();
    let res: Vec<f64> = fam.iter().map(|s| p.lambda_identity_residual(s).unwrap()).collect();
    let order = fitted_order(&ts, &res).unwrap();
    assert!(order >= 2.8, "{order}");
}

#[test]
fn spherical_identity_remainder_has_the_matching_order() {
    let cfg =
        sphere_with(AmbientMetric::perturbed(Mat3::identity(), vec![linear_term(Vec3::new(0.2, -0.1, 1.0))]).unwrap());
    let p = FoliationProblem::new(cfg, 15, 16).unwrap();
    let ts = halving(5);
    let fam = p.solve_family(&ts, &SolveOptions::default()).unwrap();
    let res: Vec<f64> = fam.iter().map(|s| p.lambda_identity_residual(s).unwrap()).collect();
    // Leaves shrink like t, areas like t^2: the identity closes at t^2 * t^2.
    let order = fitted_order(&ts, &res).unwrap();
    assert!(order >= 3.8, "{order}");
}

#[test]
fn tuned_cap_family_coefficient_extrapolates_to_two() {
    let (_, tuned) = tune_h0(&sphere_with(AmbientMetric::constant(stretch()).unwrap())).unwrap();
    assert!(matches!(
        spherical_dispatch(&tuned).unwrap(),
        SphericalRoute::CapFoliation { .. }
    ));
    let p = FoliationProblem::new(tuned, 15, 16).unwrap();
    let fam = p.solve_family(&halving(6), &SolveOptions::default()).unwrap();
    let limit = richardson_halving(&t_psi(&p, &fam), 1);
    assert!((limit - 2.0).abs() < 0.1, "{limit}");
}

#[test]
fn odd_perturbation_gives_an_odd_limit_correction() {
    let amb = AmbientMetric::perturbed(stretch(), vec![linear_term(Vec3::new(0.5, -0.3, 0.0))]).unwrap();
    let (_, tuned) = tune_h0(&sphere_with(amb)).unwrap();
    let p = FoliationProblem::new(tuned, 15, 16).unwrap();
    let ts = halving(5);
    let fam = p.solve_family(&ts, &SolveOptions::default()).unwrap();
    let even: Vec<f64> = fam
        .iter()
        .map(|s| {
            let u = DVector::from_column_slice(&s.u);
            (&u + p.grid().reflect(&u)).amax()
        })
        .collect();
    let size = DVector::from_column_slice(&fam[4].u).amax();
    assert!(size > 0.1, "{size}");
    assert!(even[4] < 0.01 * size, "{even:?}");
    assert!(fitted_order(&ts, &even).unwrap() > 0.8);
}

#[test]
fn slab_family_has_level_leaves() {
    let body = ProfileCurve::cylinder(1.0, 2.0).unwrap();
    let p = FoliationProblem::slab(CapillaryConfig::euclidean(body), 0.5, 11, 12).unwrap();
    let ts = [0.0, 0.1, 0.2, 0.3];
    let fam = p.solve_family(&ts, &SolveOptions::default()).unwrap();
    for s in &fam {
        assert!(s.lambda.abs() < 1e-10);
        // Gauge: the correction has zero mean.
        assert!(p.grid().integrate(&DVector::from_column_slice(&s.u)).abs() < 1e-9);
    }
    let psi: Vec<f64> = fam
        .iter()
        .map(|s| p.psi_coefficient(s, &SolveOptions::default()).unwrap())
        .collect();
    let lam: Vec<f64> = fam.iter().map(|s| s.lambda).collect();
    let report = monotone_quantity(PoleRegime::Slab { rho0: 0.5 }, &ts, &lam, &psi).unwrap();
    assert!(report.max_violation < 1e-9);
}

#[test]
fn conical_barrier_margins_for_sampled_admissible_metrics() {
    let metrics = sample_admissible_metrics(0.8, 4, 7, 20000).unwrap();
    let body = ProfileCurve::cone(0.8, 2.0).unwrap();
    for g0 in metrics {
        let cfg = CapillaryConfig::euclidean(body.clone()).with_ambient(AmbientMetric::constant(g0).unwrap());
        match conical_barrier(&cfg, 0.1, 11, 12).unwrap() {
            ConicalBarrierOutcome::Constructed(b) => {
                assert!(b.certified, "{b:?}");
                assert!(b.min_angle_margin > 0.0 && b.min_mean_curvature > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn barrier_margin_decays_along_a_path_to_delta() {
    let g0 = sample_admissible_metrics(0.8, 1, 11, 20000).unwrap()[0];
    let body = ProfileCurve::cone(0.8, 2.0).unwrap();
    let mut margins = Vec::new();
    for s in [1.0, 0.5, 0.25] {
        let g = Mat3::identity() + (g0 - Mat3::identity()) * s;
        let cfg = CapillaryConfig::euclidean(body.clone()).with_ambient(AmbientMetric::constant(g).unwrap());
        match conical_barrier(&cfg, 0.05, 9, 12).unwrap() {
            ConicalBarrierOutcome::Constructed(b) => margins.push(b.section_angle_margin),
            ConicalBarrierOutcome::PreconditionFailed { .. } => margins.push(0.0),
            other => panic!("{other:?}"),
        }
    }
    assert!(margins[0] > margins[1] && margins[1] > margins[2], "{margins:?}");
}

#[test]
fn plane_angle_slopes() {
    for k in [1, 2] {
        let fit = plane_angle_expansion(&h_tensor(), k, &halving(6)).unwrap();
        assert!((fit.order - (2 * k + 1) as f64).abs() < 0.2, "k = {k}: {}", fit.order);
    }
}

#[test]
fn boundary_mean_curvature_taylor_remainder() {
    let amb = AmbientMetric::perturbed(Mat3::identity(), vec![linear_term(Vec3::new(0.2, -0.1, 1.0))]).unwrap();
    let grid = PolarGrid::new(15, 16).unwrap();
    let rep = mean_curvature_taylor(&sphere_with(amb), &halving(6), &grid).unwrap();
    // k = 2: order at least k - 1.
    assert!(rep.remainder.order >= 0.8, "{}", rep.remainder.order);
    assert!(rep.odd_integral_limit.abs() < 1e-6, "{}", rep.odd_integral_limit);
}

#[test]
fn prescribed_angle_shift_is_third_order() {
    let curved = ProfileCurve::new(
        ProfileShape::Polynomial {
            coeffs: vec![0.0, 0.8, 0.3],
        },
        PoleType::Conical,
        1.0,
    )
    .unwrap();
    let fit = standard_angle_difference(&CapillaryConfig::euclidean(curved), &[-1.0, 0.5, 1.0], &halving(6)).unwrap();
    assert!(fit.order >= 2.8, "{}", fit.order);
}

#[test]
fn first_variation_orders() {
    let cfg = perturbed_cone();
    let rep = first_variation_check(&cfg, &halving(6), 64).unwrap();
    assert!(rep.flux.order >= 2.8, "{}", rep.flux.order);
    assert!(rep.pointwise.order >= 0.8, "{}", rep.pointwise.order);
}
