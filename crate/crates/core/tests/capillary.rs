use std::f64::consts::PI;

use capillary_lab::capillary::*;
use capillary_lab::graph::GraphSurface;
use capillary_lab::metric::{AmbientMetric, Vec3};
use capillary_lab::profile::ProfileCurve;
use capillary_lab::surface::{NormalSide, ParametricSurface};
use nalgebra::Vector2;

fn cylinder_cfg() -> CapillaryConfig {
    CapillaryConfig::euclidean(ProfileCurve::cylinder(1.0, 2.0).unwrap().with_top(2.0))
}

fn horo_cfg() -> CapillaryConfig {
    CapillaryConfig::hyperbolic(ProfileCurve::cylinder(1.0, 2.0).unwrap().with_top(3.0)).unwrap()
}

#[test]
fn flat_disk_is_neutrally_stable() {
    let cfg = cylinder_cfg();
    let s = GraphSurface::level(cfg.body.clone(), 8, 11, 1.0).unwrap();
    let rep = stability(&cfg, &s).unwrap();
    assert!(rep.q_one_one.abs() < 1e-10, "{}", rep.q_one_one);
    assert!(rep.mu1.abs() < 1e-8, "{}", rep.mu1);
    assert!(rep.eigen_variance < 1e-8);
}

#[test]
fn horosphere_slab_is_critical_with_mean_curvature_minus_two() {
    let cfg = horo_cfg();
    let s = GraphSurface::level(cfg.body.clone(), 8, 11, 2.0).unwrap();
    let crit = criticality(&cfg, &s).unwrap();
    assert!((crit.mean_curvature + 2.0).abs() < 1e-10, "{}", crit.mean_curvature);
    assert!(crit.gradient_residual < 1e-10, "{}", crit.gradient_residual);
    for h in &crit.weak_mean_curvature {
        assert!((h + 2.0).abs() < 1e-10, "{h}");
    }
    let rep = stability(&cfg, &s).unwrap();
    assert!(rep.potential.amax() < 1e-5, "{}", rep.potential.amax());
    assert!(rep.mu1.abs() < 1e-5, "{}", rep.mu1);
}

#[test]
fn first_variation_difference_is_second_order() {
    let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.6, 2.0).unwrap().with_top(2.0));
    let s = GraphSurface::from_reference(cfg.body.clone(), 6, 9, |x, y| 1.0 + 0.08 * x * y - 0.05 * x).unwrap();
    let f = s.grid().sample(|x, y| 1.0 + 0.5 * x + 0.2 * y * y);
    let dw = vertical_speed(&cfg, &s, &f).unwrap();
    let exact = first_variation(&cfg, &s, &f).unwrap();
    let err = |eps: f64| {
        let p = capillary_energy(&cfg, &s.with_heights(&s.heights + &dw * eps).unwrap()).unwrap();
        let m = capillary_energy(&cfg, &s.with_heights(&s.heights - &dw * eps).unwrap()).unwrap();
        ((p - m) / (2.0 * eps) - exact).abs()
    };
    let (e1, e2) = (err(2e-2), err(1e-2));
    let order = (e1 / e2).log2();
    assert!(order > 1.8, "order {order}, errors {e1:e} {e2:e}");
}

#[test]
fn second_difference_matches_index_form_at_flat_disk() {
    let cfg = cylinder_cfg();
    let s = GraphSurface::level(cfg.body.clone(), 12, 15, 1.0).unwrap();
    let f = s.grid().sample(|x, y| 0.3 + x + 0.5 * x * y);
    let (q, _) = second_variation(&cfg, &s, &f).unwrap();
    let d = energy_second_difference(&cfg, &s, &f, 1e-3).unwrap();
    assert!((q - d).abs() < 1e-4 * q.abs().max(1.0), "{q} vs {d}");
}

#[test]
fn interior_rewrite_on_unit_sphere() {
    let sphere = ParametricSurface::new(
        |u, v| Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos()),
        1.0,
        NormalSide::Positive,
    );
    let r = interior_rewrite(&AmbientMetric::Euclidean, &sphere, Vector2::new(1.1, 0.4)).unwrap();
    assert!((r.lhs - 2.0).abs() < 1e-5, "{}", r.lhs);
    assert!(r.residual < 1e-5);
}

#[test]
fn boundary_rewrite_for_disk_in_ball() {
    // Flat disk at height 0.3 inside the unit ball.
    let body = ProfileCurve::sphere_cap(1.0, 1.9).unwrap().with_top(1.0);
    let r0 = (1.0f64 - 0.09).sqrt();
    let disk = ParametricSurface::new(
        move |s, t| Vec3::new(r0 * s * t.cos(), r0 * s * t.sin(), 0.3),
        1.0,
        NormalSide::Positive,
    );
    let r = boundary_rewrite(&AmbientMetric::Euclidean, &disk, 0.7, &body).unwrap();
    assert!(r.residual < 1e-5, "{r:?}");
}

#[test]
fn rigidity_passes_for_flat_disk_and_fails_for_perturbed_metric() {
    let cfg = cylinder_cfg();
    let s = GraphSurface::level(cfg.body.clone(), 8, 11, 1.0).unwrap();
    let rep = rigidity_report(&cfg, &s).unwrap();
    assert!(rep.pass, "{rep:?}");
    let tilted = GraphSurface::from_reference(cfg.body.clone(), 8, 11, |x, _| 1.0 + 0.1 * x).unwrap();
    assert!(!rigidity_report(&cfg, &tilted).unwrap().pass);
}

#[test]
fn descent_flattens_a_tilted_graph_in_a_cylinder() {
    let cfg = cylinder_cfg();
    let init = GraphSurface::from_reference(cfg.body.clone(), 8, 11, |x, y| 1.0 + 0.1 * x + 0.05 * x * y).unwrap();
    let out = minimize_capillary(&cfg, &init, None, &DescentOptions::default()).unwrap();
    let crit = criticality(&cfg, &out.surface).unwrap();
    assert!(
        crit.mean_curvature_spread < 1e-6 && crit.mean_curvature.abs() < 1e-6,
        "{crit:?}"
    );
    for (_, g, gb) in contact_angles(&cfg, &out.surface).unwrap() {
        assert!((g - PI / 2.0).abs() < 1e-4 && (gb - PI / 2.0).abs() < 1e-12);
    }
    let energies: Vec<f64> = out.history.iter().map(|r| r.energy).collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-14));
}

#[test]
fn descent_reaches_a_horosphere() {
    let cfg = horo_cfg();
    let init = GraphSurface::from_reference(cfg.body.clone(), 8, 11, |x, y| 2.0 + 0.05 * x - 0.03 * y * y).unwrap();
    let out = minimize_capillary(&cfg, &init, None, &DescentOptions::default()).unwrap();
    let crit = criticality(&cfg, &out.surface).unwrap();
    assert!((crit.mean_curvature + 2.0).abs() < 1e-4, "{crit:?}");
}
