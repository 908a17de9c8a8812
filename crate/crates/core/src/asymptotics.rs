//! Small-parameter expansions near the pole, each checked by a fitted
//! log-log order: tilted-plane angles, boundary mean-curvature Taylor
//! remainders, the prescribed-angle shift along the boundary, and the
//! pointwise and flux forms of the first variation of mean curvature
//! under a metric perturbation.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::barrier::boundary_mean_curvature_pair;
use crate::capillary::CapillaryConfig;
use crate::error::{invalid, Result};
use crate::fit::{loglog_slope, richardson_halving};
use crate::foliation::one_minus_cos_gamma_bar;
use crate::metric::{angle_between_planes, inner, AmbientMetric, Mat3, Plane, Vec3};
use crate::polar::PolarGrid;
use crate::profile::PoleType;
use crate::surface::{boundary_normal, geometry_from_jet, profile_jet, unit_from_covector, NormalSide, SurfaceJet};

#[derive(Clone, Debug, Serialize)]
pub struct OrderFit {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub order: f64,
}

impl OrderFit {
    fn new(t: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let order = loglog_slope(&t, &value)?;
        Ok(OrderFit { t, value, order })
    }
}

/// `(1 - cos)_delta - (1 - cos)_g` for the horizontal plane and its tilt by
/// `t^k` under the constant metric `delta + t h`. Leading order `2k + 1`.
pub fn plane_angle_expansion(h: &Mat3, k: u32, ts: &[f64]) -> Result<OrderFit> {
    let flat = Plane::new(Vec3::zeros(), Vec3::x(), Vec3::y())?;
    let mut vals = Vec::with_capacity(ts.len());
    for &t in ts {
        let tilt = t.powi(k as i32);
        let tilted = Plane::new(Vec3::zeros(), Vec3::x(), Vec3::new(0.0, tilt.cos(), tilt.sin()))?;
        let g = AmbientMetric::constant(Mat3::identity() + h * t)?;
        let cd = angle_between_planes(&AmbientMetric::Euclidean, &flat, &tilted, &Vec3::zeros())?;
        let cg = angle_between_planes(&g, &flat, &tilted, &Vec3::zeros())?;
        vals.push(cd.one_minus_cos - cg.one_minus_cos);
    }
    OrderFit::new(ts.to_vec(), vals)
}

/// Radius of the boundary at the leaf depth `t^k`.
fn pole_radius(cfg: &CapillaryConfig, t: f64, k: u32) -> Result<f64> {
    Ok(cfg.body.radius(t.powi(k as i32))?.psi)
}

/// `H^g_dM` and `H^delta_dM` at `(phi(t) x, -d(phi(t) |x|))` for every node `x`.
pub fn boundary_mean_curvatures(
    cfg: &CapillaryConfig,
    t: f64,
    k: u32,
    grid: &PolarGrid,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let r = pole_radius(cfg, t, k)?;
    let mut hg = DVector::zeros(grid.len());
    let mut hd = DVector::zeros(grid.len());
    for i in 0..grid.len() {
        let (x, y) = grid.cartesian(i);
        let (a, b) = boundary_mean_curvature_pair(cfg, [r * x, r * y])?;
        hg[i] = a;
        hd[i] = b;
    }
    Ok((hg, hd))
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanCurvatureTaylor {
    /// `max |H^g_dM - H^delta_dM - H~|` against `t`.
    pub remainder: OrderFit,
    /// Richardson limit of `int_D (H^g_dM - H^delta_dM - H~) / t^(k-1)`.
    pub odd_integral_limit: f64,
}

/// Remainder `H^g_dM(p) - H^delta_dM(p) - H~(p)`, where `H~` is the mean
/// curvature under `g` of the horizontal plane through `p` (normal up).
/// The leading part is odd in `x`, so its disk integral vanishes in the limit.
pub fn mean_curvature_taylor(cfg: &CapillaryConfig, ts: &[f64], grid: &PolarGrid) -> Result<MeanCurvatureTaylor> {
    let k = match cfg.body.pole {
        PoleType::Spherical { k } => k,
        _ => return Err(invalid("boundary Taylor remainders need a spherical pole")),
    };
    if ts.windows(2).any(|w| (w[1] - 0.5 * w[0]).abs() > 1e-12 * w[0]) {
        return Err(invalid("parameters must halve successively"));
    }
    let r_of = |t: f64| -> Result<DVector<f64>> {
        let (hg, hd) = boundary_mean_curvatures(cfg, t, k, grid)?;
        let r = pole_radius(cfg, t, k)?;
        let mut out = hg - hd;
        for i in 0..grid.len() {
            let (x, y) = grid.cartesian(i);
            let q = r * r * (x * x + y * y);
            let depth = cfg.body.depth_of_squared_radius(q)?.0;
            let jet = SurfaceJet {
                point: Vec3::new(r * x, r * y, cfg.body.top - depth),
                d1: [Vec3::x(), Vec3::y()],
                d2: [Vec3::zeros(); 3],
            };
            out[i] -= geometry_from_jet(&cfg.ambient, &jet, NormalSide::Positive)?.mean_curvature;
        }
        Ok(out)
    };
    let mut maxes = Vec::with_capacity(ts.len());
    let mut integrals = Vec::with_capacity(ts.len());
    for &t in ts {
        let r = r_of(t)?;
        maxes.push(r.amax());
        integrals.push(grid.integrate(&r) / t.powi(k as i32 - 1));
    }
    Ok(MeanCurvatureTaylor {
        remainder: OrderFit::new(ts.to_vec(), maxes)?,
        odd_integral_limit: richardson_halving(&integrals, 1),
    })
}

/// `cos gamma_bar(t + t^2 u) - cos gamma_bar(t) + Abar(eta, eta) t^2 u`
/// along the boundary, maximized over `u` in `samples`. Vanishes
/// identically on straight cones; curved profiles show `O(t^4)`.
pub fn standard_angle_difference(cfg: &CapillaryConfig, samples: &[f64], ts: &[f64]) -> Result<OrderFit> {
    let mut vals = Vec::with_capacity(ts.len());
    for &t in ts {
        let frame = cfg.body.geometry(t, 0.0)?;
        let base = one_minus_cos_gamma_bar(cfg, t)?;
        let mut worst: f64 = 0.0;
        for &u in samples {
            let shifted = one_minus_cos_gamma_bar(cfg, t + t * t * u)?;
            worst = worst.max((base - shifted + frame.a_eta * t * t * u).abs());
        }
        vals.push(worst);
    }
    OrderFit::new(ts.to_vec(), vals)
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstVariationReport {
    /// Pointwise residual `2 (H - Hbar) - [d tr h - div h](X) + div W + <h, Abar>`.
    pub pointwise: OrderFit,
    /// `int [h(X, eta) - h(N, nu)] + int (2 / sin gamma_bar)(cos gamma_bar - cos gamma)`
    /// over the boundary circle at depth `t`.
    pub flux: OrderFit,
}

/// Perturbation `h = g - delta` and its coordinate derivatives at `p`.
fn perturbation(metric: &AmbientMetric, p: &Vec3) -> Result<(Mat3, [Mat3; 3])> {
    let jet = metric.jet(p)?;
    Ok((jet.value - Mat3::identity(), jet.d))
}

/// `(sqrt(det sigma) W^rho, sqrt(det sigma) W^theta)` with `W = h(X, .)^T`.
fn weighted_w(metric: &AmbientMetric, cfg: &CapillaryConfig, rho: f64, theta: f64) -> Result<[f64; 2]> {
    let jet = profile_jet(&cfg.body, rho, theta)?;
    let geo = geometry_from_jet(&AmbientMetric::Euclidean, &jet, NormalSide::Positive)?;
    let (h, _) = perturbation(metric, &jet.point)?;
    let hx = [inner(&h, &geo.normal, &jet.d1[0]), inner(&h, &geo.normal, &jet.d1[1])];
    let w = geo.sigma_inv * nalgebra::Vector2::new(hx[0], hx[1]);
    Ok([geo.area_density * w[0], geo.area_density * w[1]])
}

/// Pointwise and flux residuals of the mean-curvature first variation on a
/// conical boundary, for a metric `g = delta + h` with `h(apex) = 0`.
pub fn first_variation_check(cfg: &CapillaryConfig, ts: &[f64], angles: usize) -> Result<FirstVariationReport> {
    if cfg.body.pole != PoleType::Conical {
        return Err(invalid("the first-variation check runs on conical boundaries"));
    }
    let metric = &cfg.ambient;
    let mut point_res = Vec::with_capacity(ts.len());
    let mut flux_res = Vec::with_capacity(ts.len());
    for &t in ts {
        let mut worst: f64 = 0.0;
        let mut flux = 0.0;
        for j in 0..angles {
            let theta = 2.0 * PI * j as f64 / angles as f64;
            let jet = profile_jet(&cfg.body, t, theta)?;
            let bar = geometry_from_jet(&AmbientMetric::Euclidean, &jet, NormalSide::Positive)?;
            let hg = geometry_from_jet(metric, &jet, NormalSide::Positive)?.mean_curvature;
            let (h, dh) = perturbation(metric, &jet.point)?;
            let x = bar.normal;
            let dtr: f64 = (0..3).map(|k| x[k] * dh[k].trace()).sum();
            let mut divh = 0.0;
            for i in 0..3 {
                for j2 in 0..3 {
                    divh += dh[i][(i, j2)] * x[j2];
                }
            }
            let e = 1e-5 * t;
            let wp = weighted_w(metric, cfg, t + e, theta)?;
            let wm = weighted_w(metric, cfg, t - e, theta)?;
            let ep = 1e-5;
            let vp = weighted_w(metric, cfg, t, theta + ep)?;
            let vm = weighted_w(metric, cfg, t, theta - ep)?;
            let div_w = ((wp[0] - wm[0]) / (2.0 * e) + (vp[1] - vm[1]) / (2.0 * ep)) / bar.area_density;
            let hab = nalgebra::Matrix2::new(
                inner(&h, &jet.d1[0], &jet.d1[0]),
                inner(&h, &jet.d1[0], &jet.d1[1]),
                inner(&h, &jet.d1[1], &jet.d1[0]),
                inner(&h, &jet.d1[1], &jet.d1[1]),
            );
            let si = bar.sigma_inv;
            let h_a = (si * hab * si * bar.second_form).trace();
            let r = 2.0 * (hg - bar.mean_curvature) - (dtr - divh - div_w - h_a);
            worst = worst.max(r.abs());

            // Flux through the circle bounding the level disk at depth t.
            let p = jet.point;
            let g = metric.value(&p)?;
            let ginv = g.try_inverse().ok_or_else(|| invalid("singular metric"))?;
            let xg = boundary_normal(metric, &cfg.body, t, theta)?;
            let ng = unit_from_covector(&ginv, &Vec3::z());
            let diff = xg - ng;
            let omc = 0.5 * inner(&g, &diff, &diff);
            let omc_bar = one_minus_cos_gamma_bar(cfg, t)?;
            let sin_bar = (omc_bar * (2.0 - omc_bar)).sqrt();
            let eta = jet.d1[0].normalize();
            let nu = Vec3::new(theta.cos(), theta.sin(), 0.0);
            let dl = jet.d1[1].norm() * 2.0 * PI / angles as f64;
            flux += (inner(&h, &x, &eta) - inner(&h, &Vec3::z(), &nu) + 2.0 / sin_bar * (omc - omc_bar)) * dl;
        }
        point_res.push(worst);
        flux_res.push(flux.abs());
    }
    Ok(FirstVariationReport {
        pointwise: OrderFit::new(ts.to_vec(), point_res)?,
        flux: OrderFit::new(ts.to_vec(), flux_res)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{ProfileCurve, ProfileShape};

    fn halving(n: usize) -> Vec<f64> {
        (0..n).map(|j| 0.1 * 0.5f64.powi(j as i32)).collect()
    }

    #[test]
    fn tilted_plane_orders() {
        let h = Mat3::new(0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4);
        for k in [1, 2] {
            let fit = plane_angle_expansion(&h, k, &halving(5)).unwrap();
            assert!((fit.order - (2 * k + 1) as f64).abs() < 0.2, "{}", fit.order);
        }
    }

    #[test]
    fn straight_cone_has_no_angle_shift() {
        let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap());
        let ts = halving(3);
        let fit = standard_angle_difference(&cfg, &[1.0], &ts);
        // All values vanish, so no slope exists.
        assert!(fit.is_err());
        let curved = ProfileCurve::new(
            ProfileShape::Polynomial {
                coeffs: vec![0.0, 0.8, 0.3],
            },
            PoleType::Conical,
            1.0,
        )
        .unwrap();
        let fit = standard_angle_difference(&CapillaryConfig::euclidean(curved), &[-1.0, 1.0], &halving(5)).unwrap();
        assert!(fit.order > 3.8);
    }
}
