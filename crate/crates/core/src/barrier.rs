//! Strict barriers at poles where `g(pole) != delta`: mean-convex surfaces
//! meeting the boundary at an angle strictly larger than prescribed.
//!
//! * Conical apex: sections of the cone by the planes returned by
//!   [`cone_comparison`], bent by `t^2 u` so that `H = K > 0`.
//! * Spherical pole: the anisotropic caps `z = G_{s,t}(x)`; the sign of
//!   `H_0` decides between this barrier, the cap foliation and a
//!   hypothesis violation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::capillary::CapillaryConfig;
use crate::cone::{cone_comparison, ComparisonStatus, ConeComparisonReport};
use crate::error::{invalid, LabError, Result};
use crate::foliation::{locals, node_geometry, one_minus_cos_gamma_bar, LeafFamily, Local, PoleMetric};
use crate::metric::{AmbientMetric, Mat3, PerturbationTerm, Plane, ScalarField, Vec3};
use crate::polar::PolarGrid;
use crate::profile::{PoleType, ProfileShape};
use crate::surface::{geometry_from_jet, NormalSide, SurfaceJet};

fn pole(cfg: &CapillaryConfig) -> Vec3 {
    Vec3::new(0.0, 0.0, cfg.body.top)
}

/// `gamma` from `1 - cos gamma` without cancellation near zero.
fn angle_of(one_minus_cos: f64) -> f64 {
    2.0 * (0.5 * one_minus_cos.max(0.0)).sqrt().min(1.0).asin()
}

/// Upward jet of the boundary graph `z = top - phi(|x|^2)` at `x`.
fn boundary_graph_jet(cfg: &CapillaryConfig, x: [f64; 2]) -> Result<SurfaceJet> {
    let q = x[0] * x[0] + x[1] * x[1];
    let (p, p1, p2) = cfg.body.depth_of_squared_radius(q)?;
    Ok(SurfaceJet {
        point: Vec3::new(x[0], x[1], cfg.body.top - p),
        d1: [
            Vec3::new(1.0, 0.0, -2.0 * p1 * x[0]),
            Vec3::new(0.0, 1.0, -2.0 * p1 * x[1]),
        ],
        d2: [
            Vec3::new(0.0, 0.0, -2.0 * p1 - 4.0 * p2 * x[0] * x[0]),
            Vec3::new(0.0, 0.0, -4.0 * p2 * x[0] * x[1]),
            Vec3::new(0.0, 0.0, -2.0 * p1 - 4.0 * p2 * x[1] * x[1]),
        ],
    })
}

/// `H^g` and `H^delta` of the boundary (outward normal) at horizontal position `x`.
pub fn boundary_mean_curvature_pair(cfg: &CapillaryConfig, x: [f64; 2]) -> Result<(f64, f64)> {
    let jet = boundary_graph_jet(cfg, x)?;
    let hg = geometry_from_jet(&cfg.ambient, &jet, NormalSide::Positive)?.mean_curvature;
    let hd = geometry_from_jet(&AmbientMetric::Euclidean, &jet, NormalSide::Positive)?.mean_curvature;
    Ok((hg, hd))
}

/// `H_dM^g(O) - H_dM^delta(O)` at a spherical pole.
pub fn pole_mean_curvature_gap(cfg: &CapillaryConfig) -> Result<f64> {
    let (hg, hd) = boundary_mean_curvature_pair(cfg, [0.0, 0.0])?;
    Ok(hg - hd)
}

/// `H_0 = H^g_dM(O) - H^delta_dM(O) + 2 phi'(0) (2 - a11^-1/2 - a22^-1/2)`,
/// the leading mean curvature of the caps `G_{0,t}` under `g`.
pub fn spherical_h0(cfg: &CapillaryConfig) -> Result<f64> {
    let pm = PoleMetric::of(&cfg.ambient.value(&pole(cfg))?)?;
    let slope = cfg.body.graph_slope_at_pole()?;
    Ok(pole_mean_curvature_gap(cfg)? + 2.0 * slope * (2.0 - 1.0 / pm.a11.sqrt() - 1.0 / pm.a22.sqrt()))
}

/// Adds `beta (x3 - top) I` to the ambient metric with `beta` chosen so that
/// `H_0 = 0`; `H_0` is affine in `beta`.
pub fn tune_h0(cfg: &CapillaryConfig) -> Result<(f64, CapillaryConfig)> {
    let (base, mut terms) = match &cfg.ambient {
        AmbientMetric::Euclidean => (Mat3::identity(), Vec::new()),
        AmbientMetric::Constant(g0) => (*g0, Vec::new()),
        AmbientMetric::Perturbed(p) if p.tail.is_none() => (p.base, p.terms.clone()),
        _ => return Err(invalid("H_0 tuning needs a constant or polynomially perturbed metric")),
    };
    terms.push(PerturbationTerm {
        tensor: Mat3::zeros(),
        field: ScalarField::Linear {
            gradient: Vec3::z(),
            offset: -cfg.body.top,
        },
    });
    let build = |beta: f64| -> Result<CapillaryConfig> {
        let mut ts = terms.clone();
        ts.last_mut().expect("tuning term").tensor = Mat3::identity() * beta;
        Ok(cfg.clone().with_ambient(AmbientMetric::perturbed(base, ts)?))
    };
    let h0 = spherical_h0(&build(0.0)?)?;
    let h1 = spherical_h0(&build(1.0)?)?;
    if (h1 - h0).abs() < 1e-14 {
        return Err(LabError::Degenerate(
            "H_0 does not depend on the vertical gradient".into(),
        ));
    }
    let beta = -h0 / (h1 - h0);
    Ok((beta, build(beta)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct SphericalBarrier {
    pub s: f64,
    pub t: f64,
    pub min_mean_curvature: f64,
    /// `min (gamma - gamma_bar)` over the rim samples.
    pub min_angle_margin: f64,
    /// Largest `|cos gamma - cos gamma_bar - predicted| / t^2` on the rim,
    /// against `2 phi' xhat_a^2 t^2 (1 - (b_a + s)^2 / (a_aa a^33))`.
    pub angle_expansion_defect: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "route", rename_all = "kebab-case")]
pub enum SphericalRoute {
    Barrier {
        h0: f64,
        barrier: SphericalBarrier,
    },
    /// `H_0 = 0` with `a11 = a22 = 1`: the cap foliation applies.
    CapFoliation {
        h0: f64,
    },
    HypothesisViolation {
        h0: f64,
        reason: String,
    },
}

/// Tolerance on `H_0` for the dispatch.
pub const H0_TOLERANCE: f64 = 1e-9;

/// Mean curvature and rim angles of `Sigma_{s,t}`, sampled on
/// `rings x angles` points of the ellipse-shaped parameter domain.
pub fn spherical_barrier(
    cfg: &CapillaryConfig,
    s: f64,
    t: f64,
    rings: usize,
    angles: usize,
) -> Result<SphericalBarrier> {
    if !matches!(cfg.body.pole, PoleType::Spherical { k: 2 }) {
        return Err(invalid("cap barriers need a spherical pole of order 2"));
    }
    if !(s > 0.0 && t > 0.0) || rings < 1 || angles < 4 {
        return Err(invalid("barrier parameters must be positive"));
    }
    let pm = PoleMetric::of(&cfg.ambient.value(&pole(cfg))?)?;
    let slope = cfg.body.graph_slope_at_pole()?;
    let coef = [slope * (pm.b[0] - 1.0 + s), slope * (pm.b[1] - 1.0 + s)];
    let (sw, cw) = pm.rotation.sin_cos();
    let rot = |v: [f64; 2]| [cw * v[0] - sw * v[1], sw * v[0] + cw * v[1]];
    let a_aa = [pm.a11, pm.a22];
    let mut min_h = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut defect: f64 = 0.0;
    for k in 0..angles {
        let th = 2.0 * PI * k as f64 / angles as f64;
        let (st, ct) = th.sin_cos();
        let c = coef[0] * ct * ct + coef[1] * st * st;
        // c q + phi(q) = t^2 in q = r^2
        let mut q = t * t / (c + slope);
        for _ in 0..60 {
            let (p, p1, _) = cfg.body.depth_of_squared_radius(q)?;
            let step = (c * q + p - t * t) / (c + p1);
            q -= step;
            if step.abs() <= 1e-16 * q {
                break;
            }
        }
        let rb = q.sqrt();
        for ring in 0..=rings {
            let frac = 1.0 - ring as f64 / rings as f64;
            if ring == rings && k > 0 {
                continue;
            }
            let xt = [frac * rb * ct, frac * rb * st];
            let gz = coef[0] * xt[0] * xt[0] + coef[1] * xt[1] * xt[1] - t * t;
            let x = rot(xt);
            let e1 = rot([1.0, 0.0]);
            let e2 = rot([0.0, 1.0]);
            let jet = SurfaceJet {
                point: Vec3::new(x[0], x[1], cfg.body.top + gz),
                d1: [
                    Vec3::new(e1[0], e1[1], 2.0 * coef[0] * xt[0]),
                    Vec3::new(e2[0], e2[1], 2.0 * coef[1] * xt[1]),
                ],
                d2: [
                    Vec3::new(0.0, 0.0, 2.0 * coef[0]),
                    Vec3::zeros(),
                    Vec3::new(0.0, 0.0, 2.0 * coef[1]),
                ],
            };
            let geo = geometry_from_jet(&cfg.ambient, &jet, NormalSide::Positive)?;
            min_h = min_h.min(geo.mean_curvature);
            if ring == 0 {
                let bp = crate::foliation::boundary_point(cfg, &geo.point, &geo.normal)?;
                min_margin = min_margin.min(angle_of(bp.one_minus_cos) - angle_of(bp.one_minus_cos_bar));
                let xhat = [xt[0] * slope.sqrt() / t, xt[1] * slope.sqrt() / t];
                let predicted: f64 = (0..2)
                    .map(|a| {
                        2.0 * slope
                            * xhat[a]
                            * xhat[a]
                            * t
                            * t
                            * (1.0 - (pm.b[a] + s).powi(2) / (a_aa[a] * pm.a_upper33))
                    })
                    .sum();
                let measured = bp.one_minus_cos_bar - bp.one_minus_cos;
                defect = defect.max((measured - predicted).abs() / (t * t));
            }
        }
    }
    Ok(SphericalBarrier {
        s,
        t,
        min_mean_curvature: min_h,
        min_angle_margin: min_margin,
        angle_expansion_defect: defect,
        certified: min_h > 0.0 && min_margin > 0.0,
    })
}

/// Sign of `H_0` decides the construction at a spherical pole.
pub fn spherical_dispatch(cfg: &CapillaryConfig) -> Result<SphericalRoute> {
    let h0 = spherical_h0(cfg)?;
    let pm = PoleMetric::of(&cfg.ambient.value(&pole(cfg))?)?;
    if h0 < -H0_TOLERANCE {
        return Ok(SphericalRoute::HypothesisViolation {
            h0,
            reason: "H_0 < 0: the boundary is not mean convex enough relative to the model".into(),
        });
    }
    if h0 <= H0_TOLERANCE {
        return Ok(if pm.horizontally_isometric() {
            SphericalRoute::CapFoliation { h0 }
        } else {
            SphericalRoute::HypothesisViolation {
                h0,
                reason: "H_0 = 0 requires a11 = a22 = 1".into(),
            }
        });
    }
    let mut last = None;
    for s in [0.5, 0.25, 0.125, 0.0625, 0.03125] {
        for j in 0..8 {
            let t = 0.2 * 0.5f64.powi(j);
            let b = spherical_barrier(cfg, s, t, 8, 64)?;
            if b.certified {
                return Ok(SphericalRoute::Barrier { h0, barrier: b });
            }
            last = Some(b);
        }
    }
    Ok(SphericalRoute::HypothesisViolation {
        h0,
        reason: format!(
            "no certified (s, t) found; last attempt {:?}",
            last.map(|b| (b.s, b.t, b.min_mean_curvature, b.min_angle_margin))
        ),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConicalBarrier {
    pub t: f64,
    /// Target mean curvature of the bent section.
    pub k: f64,
    pub min_mean_curvature: f64,
    pub max_mean_curvature: f64,
    /// `min (gamma - gamma_bar)` on the rim.
    pub min_angle_margin: f64,
    /// Same margin for the unbent plane section.
    pub section_angle_margin: f64,
    /// Constant `f` in `cos gamma - cos gamma_t = t f` on the rim.
    pub rim_shift: f64,
    pub newton_residual: f64,
    pub certified: bool,
    pub comparison: ConeComparisonReport,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum ConicalBarrierOutcome {
    Constructed(ConicalBarrier),
    /// `g(apex) = delta`: the level foliation is the right tool.
    Redirect {
        reason: String,
    },
    PreconditionFailed {
        comparison: ConeComparisonReport,
    },
}

/// Cross-section family `apex + s (center + frame y)` of the circular cone
/// by the planes `n . (x - apex) = -s`.
fn cone_sections(abar: f64, apex: Vec3, normal: Vec3) -> Result<LeafFamily> {
    let plane = Plane::from_normal(normal, -1.0)?;
    let q0 = plane.base;
    let e = plane.span;
    let b = |p: &Vec3, q: &Vec3| p.x * q.x + p.y * q.y - abar * abar * p.z * q.z;
    let m = nalgebra::Matrix2::new(b(&e[0], &e[0]), b(&e[0], &e[1]), b(&e[1], &e[0]), b(&e[1], &e[1]));
    let l = nalgebra::Vector2::new(b(&q0, &e[0]), b(&q0, &e[1]));
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(LabError::Precondition(
            "cutting plane does not meet the cone in an ellipse".into(),
        ));
    }
    let minv = m.try_inverse().expect("positive definite");
    let mid = -(minv * l);
    let kappa2 = l.dot(&(minv * l)) - b(&q0, &q0);
    if kappa2 <= 0.0 {
        return Err(LabError::Precondition("empty cone section".into()));
    }
    let inv_sqrt = eig.eigenvectors
        * nalgebra::Matrix2::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let a = inv_sqrt * kappa2.sqrt();
    let center = q0 + e[0] * mid[0] + e[1] * mid[1];
    let mut frame = [e[0] * a[(0, 0)] + e[1] * a[(1, 0)], e[0] * a[(0, 1)] + e[1] * a[(1, 1)]];
    // Leaf normal points toward the apex, i.e. along +n.
    if frame[0].cross(&frame[1]).dot(&normal) < 0.0 {
        frame[1] = -frame[1];
    }
    if center.z >= 0.0 {
        return Err(LabError::Precondition("cone section lies above the apex".into()));
    }
    Ok(LeafFamily::ConeSection { apex, center, frame })
}

fn barrier_residual(
    cfg: &CapillaryConfig,
    fam: &LeafFamily,
    grid: &PolarGrid,
    t: f64,
    k: f64,
    base_omc: &[f64],
    i: usize,
    l: &Local,
) -> Result<f64> {
    let (geo, bp) = node_geometry(cfg, fam, grid, i, l)?;
    Ok(match bp {
        Some(b) => (base_omc[i] - b.one_minus_cos) / t,
        None => geo.mean_curvature - k,
    })
}

/// Bends the plane section `tP` into `Sigma_{t, t^2 u}` with `H = K` in
/// the interior and the section's own boundary angle, then certifies
/// `H > 0` and `gamma > gamma_bar` at every node.
pub fn conical_barrier(cfg: &CapillaryConfig, t: f64, n_cheb: usize, n_theta: usize) -> Result<ConicalBarrierOutcome> {
    let abar = match (&cfg.body.shape, cfg.body.pole) {
        (ProfileShape::Cone { slope }, PoleType::Conical) => *slope,
        _ => return Err(invalid("the conical barrier needs an exact circular cone")),
    };
    if !(t > 0.0 && t < cfg.body.rho_max) {
        return Err(invalid("section parameter must lie inside the body"));
    }
    let apex = pole(cfg);
    let g0 = cfg.ambient.value(&apex)?;
    let pm = PoleMetric::of(&g0)?;
    if pm.is_identity {
        return Ok(ConicalBarrierOutcome::Redirect {
            reason: "g(apex) = delta: use the level foliation".into(),
        });
    }
    let comparison = cone_comparison(&g0, abar, 360)?;
    let plane = match (
        &comparison.status,
        comparison.strict_margins_positive,
        &comparison.plane,
    ) {
        (ComparisonStatus::Admissible, Some(true), Some(p)) => *p,
        _ => return Ok(ConicalBarrierOutcome::PreconditionFailed { comparison }),
    };
    let normal = Vec3::from(plane.normal);
    let fam = cone_sections(abar, apex, normal)?;
    let grid = PolarGrid::new(n_cheb, n_theta)?;
    let n = grid.len();
    let alpha = t * t;

    let zero = DVector::zeros(n);
    let base_locals = locals(&grid, t, alpha, &zero);
    let mut base_omc = vec![0.0; n];
    let mut base_margin = f64::INFINITY;
    let mut k = 0.0f64;
    for (i, l) in base_locals.iter().enumerate() {
        let (geo, bp) = node_geometry(cfg, &fam, &grid, i, l)?;
        k = k.max(geo.mean_curvature.abs());
        if let Some(b) = bp {
            base_omc[i] = b.one_minus_cos;
            base_margin = base_margin.min(angle_of(b.one_minus_cos) - angle_of(b.one_minus_cos_bar));
        }
    }
    let k = k + 1.0;

    // Unknowns (u, f): H = K inside, cos gamma - cos gamma_t = t f on the
    // rim, int u = 0. Constants solve the limit operator's homogeneous
    // Neumann problem, so the rim shift f must be free.
    let w = grid.weights().clone();
    let split = |z: &DVector<f64>| (z.rows(0, n).into_owned(), z[n]);
    let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let (u, f) = split(z);
        let ls = locals(&grid, t, alpha, &u);
        let mut r = DVector::zeros(n + 1);
        for (i, l) in ls.iter().enumerate() {
            r[i] = barrier_residual(cfg, &fam, &grid, t, k, &base_omc, i, l)?;
            if grid.is_boundary(i) {
                r[i] -= f;
            }
        }
        r[n] = w.dot(&u);
        Ok(r)
    };
    let jacobian = |z: &DVector<f64>| -> Result<DMatrix<f64>> {
        let (u, _) = split(z);
        let ls = locals(&grid, t, alpha, &u);
        let ops = grid.operators();
        let mats = [&ops.dx, &ops.dy, &ops.dxx, &ops.dxy, &ops.dyy];
        let mut j = DMatrix::zeros(n + 1, n + 1);
        for (i, l) in ls.iter().enumerate() {
            let mut p = [0.0; 6];
            for (c, pc) in p.iter_mut().enumerate() {
                let h = 1e-6 * (l[c].abs() + alpha);
                let (mut lp, mut lm) = (*l, *l);
                lp[c] += h;
                lm[c] -= h;
                *pc = (barrier_residual(cfg, &fam, &grid, t, k, &base_omc, i, &lp)?
                    - barrier_residual(cfg, &fam, &grid, t, k, &base_omc, i, &lm)?)
                    / (2.0 * h);
            }
            j[(i, i)] += alpha * p[0];
            for (c, m) in mats.iter().enumerate() {
                for col in 0..n {
                    j[(i, col)] += alpha * p[c + 1] * m[(i, col)];
                }
            }
            if grid.is_boundary(i) {
                j[(i, n)] = -1.0;
            }
        }
        for col in 0..n {
            j[(n, col)] = w[col];
        }
        Ok(j)
    };
    let mut z = DVector::zeros(n + 1);
    let mut r = residual(&z)?;
    for _ in 0..30 {
        if r.amax() < 1e-10 {
            break;
        }
        let step = jacobian(&z)?
            .lu()
            .solve(&r)
            .ok_or_else(|| LabError::Degenerate("barrier Jacobian is singular".into()))?;
        let trial = &z - &step;
        let rt = match residual(&trial) {
            Ok(rt) if rt.amax() < r.amax() => rt,
            _ => break,
        };
        z = trial;
        r = rt;
    }
    let (u, rim_shift) = split(&z);
    let ls = locals(&grid, t, alpha, &u);
    let (mut min_h, mut max_h, mut margin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for (i, l) in ls.iter().enumerate() {
        let (geo, bp) = node_geometry(cfg, &fam, &grid, i, l)?;
        min_h = min_h.min(geo.mean_curvature);
        max_h = max_h.max(geo.mean_curvature);
        if let Some(b) = bp {
            let gbar = angle_of(one_minus_cos_gamma_bar(cfg, b.rho)?);
            margin = margin.min(angle_of(b.one_minus_cos) - gbar);
        }
    }
    Ok(ConicalBarrierOutcome::Constructed(ConicalBarrier {
        t,
        k,
        min_mean_curvature: min_h,
        max_mean_curvature: max_h,
        min_angle_margin: margin,
        section_angle_margin: base_margin,
        rim_shift,
        newton_residual: r.amax(),
        certified: min_h > 0.0 && margin > 0.0,
        comparison,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileCurve;

    fn stretched(a33: f64) -> CapillaryConfig {
        let g0 = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, a33));
        CapillaryConfig::euclidean(ProfileCurve::sphere_cap(1.0, 0.8).unwrap())
            .with_ambient(AmbientMetric::constant(g0).unwrap())
    }

    #[test]
    fn h0_of_a_vertical_stretch() {
        // Boundary graph z = -|x|^2 / 2 near the pole; H^g = 4 phi' sqrt(a33).
        for a33 in [0.8, 1.0, 1.3] {
            let h0 = spherical_h0(&stretched(a33)).unwrap();
            assert!((h0 - 2.0 * (a33.sqrt() - 1.0)).abs() < 1e-12, "{h0}");
        }
    }

    #[test]
    fn dispatch_follows_the_sign_of_h0() {
        assert!(matches!(
            spherical_dispatch(&stretched(0.8)).unwrap(),
            SphericalRoute::HypothesisViolation { .. }
        ));
        match spherical_dispatch(&stretched(1.3)).unwrap() {
            SphericalRoute::Barrier { barrier, .. } => {
                assert!(barrier.certified && barrier.min_mean_curvature > 0.0 && barrier.min_angle_margin > 0.0)
            }
            other => panic!("{other:?}"),
        }
        let (_, tuned) = tune_h0(&stretched(1.3)).unwrap();
        assert!(spherical_h0(&tuned).unwrap().abs() < 1e-12);
        assert!(matches!(
            spherical_dispatch(&tuned).unwrap(),
            SphericalRoute::CapFoliation { .. }
        ));
    }

    #[test]
    fn cap_angle_expansion_defect_shrinks_with_t() {
        let cfg = stretched(1.3);
        let d1 = spherical_barrier(&cfg, 0.1, 0.02, 2, 32)
            .unwrap()
            .angle_expansion_defect;
        let d2 = spherical_barrier(&cfg, 0.1, 0.01, 2, 32)
            .unwrap()
            .angle_expansion_defect;
        // Remainder O(t^3) at least; constant g0 kills the odd t^3 term.
        assert!(d1 / d2 > 1.7, "{d1} {d2}");
    }

    #[test]
    fn conical_barrier_redirects_at_delta() {
        let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap());
        assert!(matches!(
            conical_barrier(&cfg, 0.05, 7, 8).unwrap(),
            ConicalBarrierOutcome::Redirect { .. }
        ));
    }

    #[test]
    fn conical_barrier_is_certified_for_an_admissible_metric() {
        let g0 = crate::cone::sample_admissible_metrics(0.8, 1, 7, 20000).unwrap()[0];
        let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap())
            .with_ambient(AmbientMetric::constant(g0).unwrap());
        match conical_barrier(&cfg, 0.05, 9, 12).unwrap() {
            ConicalBarrierOutcome::Constructed(b) => {
                assert!(b.certified, "{b:?}");
                assert!(b.newton_residual < 1e-9);
                // Rim nodes carry the angle equation; H stays near K there too.
                assert!(b.min_mean_curvature > 0.5 * b.k);
            }
            other => panic!("{other:?}"),
        }
    }
}
