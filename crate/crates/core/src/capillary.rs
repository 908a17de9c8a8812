//! The capillary functional `|Sigma| + c Vol(E) - int_Omega cos(gamma_bar)` on
//! graph surfaces, its exact discrete gradient, the second variation and
//! stability eigenproblem, the pointwise curvature rewrites, an
//! infinitesimal-rigidity checklist and a preconditioned descent minimizer.
//!
//! Conventions: `N` points up, `E` is the part of the body below the graph,
//! `Omega` is the part of the boundary surface above the trace and `eta` is
//! the unit conormal of the trace in the boundary surface pointing down.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::curves::gauss_legendre;
use crate::disc::{eigen_smallest, DiskField, DiskGrid, GridMetric, NodeKind};
use crate::error::{invalid, LabError, Result};
use crate::graph::GraphSurface;
use crate::metric::{inner, norm_sq, AmbientMetric, Mat3, Vec3};
use crate::profile::ProfileCurve;
use crate::surface::{
    geometry_from_jet, profile_coordinates, profile_jet, unit_from_covector, Mat2, NormalSide, ParametricSurface,
    SurfaceGeometry,
};

/// Model geometry against which boundary data and rigidity are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpace {
    Euclidean,
    Hyperbolic,
}

impl ModelSpace {
    pub fn metric(self) -> AmbientMetric {
        match self {
            ModelSpace::Euclidean => AmbientMetric::Euclidean,
            ModelSpace::Hyperbolic => AmbientMetric::Hyperbolic,
        }
    }

    pub fn scalar_curvature(self) -> f64 {
        match self {
            ModelSpace::Euclidean => 0.0,
            ModelSpace::Hyperbolic => -6.0,
        }
    }

    /// Coefficient of `cot gamma_bar` in the boundary integrand.
    pub fn cot_coefficient(self) -> f64 {
        match self {
            ModelSpace::Euclidean => 0.0,
            ModelSpace::Hyperbolic => 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PrescribedAngle {
    /// Angle between the model boundary normal and the vertical.
    Model,
    Constant {
        gamma: f64,
    },
}

#[derive(Clone, Debug)]
pub struct CapillaryConfig {
    pub ambient: AmbientMetric,
    pub body: ProfileCurve,
    pub volume_coefficient: f64,
    pub angle: PrescribedAngle,
    pub model: ModelSpace,
}

impl CapillaryConfig {
    pub fn euclidean(body: ProfileCurve) -> Self {
        CapillaryConfig {
            ambient: AmbientMetric::Euclidean,
            body,
            volume_coefficient: 0.0,
            angle: PrescribedAngle::Model,
            model: ModelSpace::Euclidean,
        }
    }

    /// Half-space model with volume coefficient 2.
    pub fn hyperbolic(body: ProfileCurve) -> Result<Self> {
        if body.top - body.rho_max <= 0.0 {
            return Err(invalid("hyperbolic body must stay in the upper half-space"));
        }
        Ok(CapillaryConfig {
            ambient: AmbientMetric::Hyperbolic,
            body,
            volume_coefficient: 2.0,
            angle: PrescribedAngle::Model,
            model: ModelSpace::Hyperbolic,
        })
    }

    pub fn with_ambient(mut self, ambient: AmbientMetric) -> Self {
        self.ambient = ambient;
        self
    }

    pub fn cos_gamma_bar(&self, rho: f64) -> Result<f64> {
        match self.angle {
            // The vertical angle is conformally invariant, so both models agree.
            PrescribedAngle::Model => Ok(self.body.geometry(rho, 0.0)?.cos_gamma),
            PrescribedAngle::Constant { gamma } => Ok(gamma.cos()),
        }
    }

    /// `d cos(gamma_bar) / d rho`.
    pub fn d_rho_cos_gamma_bar(&self, rho: f64) -> Result<f64> {
        let h = 1e-4 * self.body.rho_max;
        let lo = (rho - 2.0 * h).max(0.0);
        let hi = (rho + 2.0 * h).min(self.body.rho_max);
        if hi - lo < 4.0 * h * (1.0 - 1e-9) {
            // One-sided near the ends of the working band.
            let s = if lo == 0.0 { h } else { -h };
            let f = |k: f64| self.cos_gamma_bar(rho + k * s);
            return Ok((-3.0 * f(0.0)? + 4.0 * f(1.0)? - f(2.0)?) / (2.0 * s));
        }
        let f = |k: f64| self.cos_gamma_bar(rho + k * h);
        Ok((f(-2.0)? - 8.0 * f(-1.0)? + 8.0 * f(1.0)? - f(2.0)?) / (12.0 * h))
    }

    /// Checks `sin(gamma_bar) > 0` on the working band.
    pub fn validate(&self, samples: usize) -> Result<()> {
        for i in 0..=samples {
            let rho = self.body.rho_max * (0.01 + 0.99 * i as f64 / samples as f64);
            let c = self.cos_gamma_bar(rho)?;
            if c.abs() >= 1.0 - 1e-12 {
                return Err(LabError::Precondition(format!(
                    "sin(gamma_bar) vanishes at rho = {rho}"
                )));
            }
        }
        Ok(())
    }
}

/// Energy decomposition with gradients with respect to nodal heights.
#[derive(Clone, Debug)]
pub struct EnergyTerms {
    pub area: f64,
    /// `Vol(E)`; relative to the body's volume when that is not finite.
    pub volume: f64,
    /// `int_Omega cos(gamma_bar)` over the lateral boundary.
    pub wetting: f64,
    pub total: f64,
    pub area_gradient: DVector<f64>,
    pub volume_gradient: DVector<f64>,
    pub wetting_gradient: DVector<f64>,
    /// Lumped surface area per node.
    pub area_weights: DVector<f64>,
}

impl EnergyTerms {
    pub fn gradient(&self, c: f64) -> DVector<f64> {
        &self.area_gradient + &self.volume_gradient * c - &self.wetting_gradient
    }
}

/// `sqrt(det g)` along a vertical line and its horizontal derivatives,
/// closed form where the density depends on height only.
fn volume_above(metric: &AmbientMetric, x: f64, y: f64, w: f64, z_top: f64) -> Result<(f64, f64, [f64; 2])> {
    let density = |z: f64| -> Result<(f64, [f64; 2])> {
        let jet = metric.jet(&Vec3::new(x, y, z))?;
        let rho = jet.value.determinant().sqrt();
        let ginv = jet
            .value
            .try_inverse()
            .ok_or_else(|| LabError::Degenerate("singular metric".into()))?;
        let dx = 0.5 * rho * (ginv * jet.d[0]).trace();
        let dy = 0.5 * rho * (ginv * jet.d[1]).trace();
        Ok((rho, [dx, dy]))
    };
    match metric {
        AmbientMetric::Euclidean => Ok((z_top - w, -1.0, [0.0; 2])),
        AmbientMetric::Constant(g) => {
            let r = g.determinant().sqrt();
            Ok((r * (z_top - w), -r, [0.0; 2]))
        }
        AmbientMetric::Hyperbolic => {
            metric.check_domain(&Vec3::new(x, y, w))?;
            Ok((0.5 * (w.powi(-2) - z_top.powi(-2)), -w.powi(-3), [0.0; 2]))
        }
        AmbientMetric::Perturbed(_) => {
            let (nodes, weights) = gauss_legendre(16);
            let half = 0.5 * (z_top - w);
            let (mut v, mut d) = (0.0, [0.0; 2]);
            for (t, wt) in nodes.iter().zip(&weights) {
                let (r, dr) = density(w + half * (t + 1.0))?;
                v += half * wt * r;
                d[0] += half * wt * dr[0];
                d[1] += half * wt * dr[1];
            }
            Ok((v, -density(w)?.0, d))
        }
    }
}

fn point_density(metric: &AmbientMetric, p: &Vec3) -> Result<f64> {
    Ok(metric.value(p)?.determinant().sqrt())
}

/// Depth of the body's boundary above horizontal radius `r`: the first
/// `rho` with `psi(rho) >= r`, with `d rho / d r`.
fn top_depth(body: &ProfileCurve, r: f64) -> Result<(f64, f64)> {
    let psi0 = body.radius(0.0)?.psi;
    if r <= psi0 {
        return Ok((0.0, 0.0));
    }
    let n = 256;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    for i in 1..=n {
        let rho = body.rho_max * i as f64 / n as f64;
        if body.radius(rho)?.psi >= r {
            hi = rho;
            break;
        }
        lo = rho;
    }
    if hi.is_nan() {
        return Err(LabError::Precondition(format!("radius {r} exceeds the body")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if body.radius(mid)?.psi >= r {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * body.rho_max {
            break;
        }
    }
    let rho = 0.5 * (lo + hi);
    let d1 = body.radius(rho)?.d1;
    Ok((rho, if d1 > 0.0 { 1.0 / d1 } else { 0.0 }))
}

/// Volume of the body for height-only densities, `None` otherwise.
fn body_volume(metric: &AmbientMetric, body: &ProfileCurve) -> Result<Option<f64>> {
    if matches!(metric, AmbientMetric::Perturbed(_)) {
        return Ok(None);
    }
    let (x, w) = gauss_legendre(12);
    let panels = 32;
    let len = body.rho_max / panels as f64;
    let mut v = 0.0;
    for p in 0..panels {
        for (t, wt) in x.iter().zip(&w) {
            let rho = len * (p as f64 + 0.5 * (t + 1.0));
            let psi = body.radius(rho)?.psi;
            v += 0.5 * len * wt * PI * psi * psi * point_density(metric, &Vec3::new(0.0, 0.0, body.top - rho))?;
        }
    }
    Ok(Some(v))
}

/// `int_0^rho cos(gamma_bar) dA` per unit angle along the meridian at `theta`,
/// with its `rho` derivative.
fn wetting_primitive(cfg: &CapillaryConfig, rho: f64, theta: f64) -> Result<(f64, f64)> {
    let density = |r: f64| -> Result<f64> {
        let jet = profile_jet(&cfg.body, r, theta)?;
        let g = cfg.ambient.value(&jet.point)?;
        let e = norm_sq(&g, &jet.d1[0]);
        let f = inner(&g, &jet.d1[0], &jet.d1[1]);
        let gg = norm_sq(&g, &jet.d1[1]);
        Ok(cfg.cos_gamma_bar(r)? * (e * gg - f * f).max(0.0).sqrt())
    };
    let (x, w) = gauss_legendre(24);
    let panels = 4;
    let len = rho / panels as f64;
    let mut v = 0.0;
    for p in 0..panels {
        for (t, wt) in x.iter().zip(&w) {
            v += 0.5 * len * wt * density(len * (p as f64 + 0.5 * (t + 1.0)))?;
        }
    }
    Ok((v, density(rho)?))
}

/// Energy and its exact gradient for the discrete surface.
pub fn energy_terms(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<EnergyTerms> {
    surf.validate()?;
    let grid = surf.grid();
    let n = grid.len();
    let nr = grid.n_r();
    let nt = grid.n_theta();
    let dtheta = 2.0 * PI / nt as f64;
    let d = crate::disc::periodic_derivative_matrix(nt);
    let w = &surf.heights;
    let want_volume = true;
    let ring = |j: usize| DVector::from_fn(nt, |k, _| w[grid.index(j, k)]);
    let radius_of = |j: usize| if j == 0 { 0.0 } else { grid.polar(grid.index(j, 0)).0 };
    let rings: Vec<DVector<f64>> = (0..=nr + 1).map(ring).collect();
    let ring_dt: Vec<DVector<f64>> = rings
        .iter()
        .enumerate()
        .map(|(j, r)| if j == 0 { DVector::zeros(nt) } else { &d * r })
        .collect();
    // Boundary radius R_k = psi(top - w_k) and its angular derivative.
    let mut big_r = DVector::zeros(nt);
    let mut dr_dw = DVector::zeros(nt);
    for k in 0..nt {
        let jet = surf.boundary_radius(k)?;
        big_r[k] = jet.psi;
        dr_dw[k] = -jet.d1;
    }
    let big_rp = &d * &big_r;

    let mut area = 0.0;
    let mut vol_above = 0.0;
    let mut g_area = DVector::zeros(n);
    let mut g_vol = DVector::zeros(n);
    let mut weights = DVector::zeros(n);
    // Gradients with respect to R_k and R'_k, chained at the end.
    let mut g_area_r = DVector::<f64>::zeros(nt);
    let mut g_area_rp = DVector::<f64>::zeros(nt);
    let mut g_vol_r = DVector::<f64>::zeros(nt);
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];

    for e in 0..=nr {
        let (ra, rb) = (radius_of(e), radius_of(e + 1));
        let len = rb - ra;
        for k in 0..nt {
            let (sn, cs) = grid.theta(k).sin_cos();
            let ia = grid.index(e, k);
            let ib = grid.index(e + 1, k);
            let (rr, rp) = (big_r[k], big_rp[k]);
            for &sg in &gauss {
                let s = ra + sg * len;
                let (pa, pb) = (1.0 - sg, sg);
                let om = 0.5 * len * dtheta;
                let hw = pa * rings[e][k] + pb * rings[e + 1][k];
                let ws = (rings[e + 1][k] - rings[e][k]) / len;
                let wt = pa * ring_dt[e][k] + pb * ring_dt[e + 1][k];
                let x = Vec3::new(rr * s * cs, rr * s * sn, hw);
                let xs = Vec3::new(rr * cs, rr * sn, ws);
                let xt = Vec3::new(rp * s * cs - rr * s * sn, rp * s * sn + rr * s * cs, wt);
                let jet = cfg.ambient.jet(&x)?;
                let g = jet.value;
                let (gxs, gxt) = (g * xs, g * xt);
                let ee = xs.dot(&gxs);
                let ff = xs.dot(&gxt);
                let gg = xt.dot(&gxt);
                let a = (ee * gg - ff * ff).max(0.0).sqrt();
                if !(a > 0.0) {
                    return Err(LabError::Degenerate("graph parametrization degenerates".into()));
                }
                area += om * a;
                weights[ia] += om * a * pa;
                weights[ib] += om * a * pb;
                let da_xs = (gxs * gg - gxt * ff) / a;
                let da_xt = (gxt * ee - gxs * ff) / a;
                let mut da_x = Vec3::zeros();
                for m in 0..3 {
                    let gm = &jet.d[m];
                    da_x[m] =
                        (gg * xs.dot(&(gm * xs)) - 2.0 * ff * xs.dot(&(gm * xt)) + ee * xt.dot(&(gm * xt))) / (2.0 * a);
                }
                // Scalars: w, w_s, w_t, R, R'.
                let d_w = da_x.z;
                let d_ws = da_xs.z;
                let d_wt = da_xt.z;
                let d_r = da_x.x * s * cs + da_x.y * s * sn + da_xs.x * cs + da_xs.y * sn - da_xt.x * s * sn
                    + da_xt.y * s * cs;
                let d_rp = da_xt.x * s * cs + da_xt.y * s * sn;
                g_area[ia] += om * (d_w * pa - d_ws / len);
                g_area[ib] += om * (d_w * pb + d_ws / len);
                for l in 0..nt {
                    let c = om * d_wt * d[(k, l)];
                    if e > 0 {
                        g_area[grid.index(e, l)] += c * pa;
                    }
                    g_area[grid.index(e + 1, l)] += c * pb;
                }
                g_area_r[k] += om * d_r;
                g_area_rp[k] += om * d_rp;

                if want_volume {
                    let r_h = rr * s;
                    let (rho_top, drho_dr) = top_depth(&cfg.body, r_h)?;
                    let z_top = cfg.body.top - rho_top;
                    let (fv, dfv_w, dfv_xy) = volume_above(&cfg.ambient, x.x, x.y, hw, z_top)?;
                    let top_density = point_density(&cfg.ambient, &Vec3::new(x.x, x.y, z_top))?;
                    let dfv_r_top = -top_density * drho_dr;
                    let jac = rr * rr * s;
                    vol_above += om * jac * fv;
                    g_vol[ia] += om * jac * dfv_w * pa;
                    g_vol[ib] += om * jac * dfv_w * pb;
                    let dfv_dr = dfv_r_top * s + (dfv_xy[0] * s * cs + dfv_xy[1] * s * sn);
                    g_vol_r[k] += om * (2.0 * rr * s * fv + jac * dfv_dr);
                }
            }
        }
    }
    // Chain R and R' = D R through R_l = psi(top - w_l).
    let g_area_r_total = &g_area_r + d.transpose() * &g_area_rp;
    for l in 0..nt {
        let i = grid.boundary_index(l);
        g_area[i] += g_area_r_total[l] * dr_dw[l];
        g_vol[i] += g_vol_r[l] * dr_dw[l];
    }

    let mut wetting = 0.0;
    let mut g_wet = DVector::zeros(n);
    for k in 0..nt {
        let (phi, dphi) = wetting_primitive(cfg, surf.boundary_rho(k), grid.theta(k))?;
        wetting += dtheta * phi;
        g_wet[grid.boundary_index(k)] = -dtheta * dphi;
    }

    let volume = match body_volume(&cfg.ambient, &cfg.body)? {
        Some(v) => v - vol_above,
        None => -vol_above,
    };
    let g_volume = -g_vol;
    let total = area + cfg.volume_coefficient * volume - wetting;
    Ok(EnergyTerms {
        area,
        volume,
        wetting,
        total,
        area_gradient: g_area,
        volume_gradient: g_volume,
        wetting_gradient: g_wet,
        area_weights: weights,
    })
}

pub fn capillary_energy(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<f64> {
    Ok(energy_terms(cfg, surf)?.total)
}

/// `<partial_z, N>_g` at every node (pole: ring average).
pub fn vertical_normal_components(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<DVector<f64>> {
    let grid = surf.grid();
    let view = surf.view();
    let mut out = DVector::zeros(grid.len());
    for i in 1..grid.len() {
        let (s, t) = grid.polar(i);
        let geo = view.geometry(&cfg.ambient, Vector2::new(s, t))?;
        out[i] = (geo.metric * geo.normal).z;
    }
    out[0] = (1..=grid.n_theta()).map(|i| out[i]).sum::<f64>() / grid.n_theta() as f64;
    Ok(out)
}

/// Height change realizing the normal speed `f`.
pub fn vertical_speed(cfg: &CapillaryConfig, surf: &GraphSurface, f: &DiskField) -> Result<DVector<f64>> {
    Ok(f.values.component_div(&vertical_normal_components(cfg, surf)?))
}

/// Derivative of the energy along the normal variation with speed `f`,
/// the boundary sliding along the boundary surface.
pub fn first_variation(cfg: &CapillaryConfig, surf: &GraphSurface, f: &DiskField) -> Result<f64> {
    let terms = energy_terms(cfg, surf)?;
    Ok(terms
        .gradient(cfg.volume_coefficient)
        .dot(&vertical_speed(cfg, surf, f)?))
}

/// Plain gradient residual: interior nodes per unit area, boundary nodes per
/// unit length.
pub fn gradient_residual(surf: &GraphSurface, grad: &DVector<f64>) -> (f64, f64) {
    let grid = surf.grid();
    let mut interior: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for i in 0..grid.len() {
        match grid.kind(i) {
            NodeKind::Boundary { angle } => boundary = boundary.max(grad[i].abs() / grid.boundary_weights()[angle]),
            _ => interior = interior.max(grad[i].abs() / grid.mass()[i]),
        }
    }
    (interior, boundary)
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalityReport {
    /// Constant mean curvature `-(c + lambda)` of the best volume multiplier.
    pub mean_curvature: f64,
    pub interior_residual: f64,
    pub boundary_residual: f64,
    /// Residual of the plain energy gradient.
    pub gradient_residual: f64,
    /// Weak mean curvature at interior nodes.
    pub weak_mean_curvature: Vec<f64>,
    /// Largest `|H_i - mean|` over interior nodes.
    pub mean_curvature_spread: f64,
    /// Largest `|gamma - gamma_bar|` over boundary nodes.
    pub angle_residual: f64,
}

impl CriticalityReport {
    pub fn is_critical(&self, tol: f64) -> bool {
        self.interior_residual <= tol && self.boundary_residual <= tol && self.angle_residual <= tol.sqrt()
    }
}

pub fn criticality(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<CriticalityReport> {
    let terms = energy_terms(cfg, surf)?;
    let c = cfg.volume_coefficient;
    let g = terms.gradient(c);
    let v = &terms.volume_gradient;
    let grid = surf.grid();
    let nz = vertical_normal_components(cfg, surf)?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..grid.len() {
        if !matches!(grid.kind(i), NodeKind::Boundary { .. }) {
            num += g[i] * v[i] / grid.mass()[i];
            den += v[i] * v[i] / grid.mass()[i];
        }
    }
    let lambda = if den > 0.0 { -num / den } else { 0.0 };
    let lag = &g + v * lambda;
    let (interior_residual, boundary_residual) = gradient_residual(surf, &lag);
    let (gi, gb) = gradient_residual(surf, &g);
    let mut weak = Vec::new();
    for i in 0..grid.len() {
        if let NodeKind::Interior { .. } = grid.kind(i) {
            weak.push(terms.area_gradient[i] / (terms.area_weights[i] * nz[i]));
        }
    }
    let mean = weak.iter().sum::<f64>() / weak.len() as f64;
    let spread = weak.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max);
    let mut angle_residual: f64 = 0.0;
    for (_, gamma, gamma_bar) in contact_angles(cfg, surf)? {
        angle_residual = angle_residual.max((gamma - gamma_bar).abs());
    }
    Ok(CriticalityReport {
        mean_curvature: -(c + lambda),
        interior_residual,
        boundary_residual,
        gradient_residual: gi.max(gb),
        weak_mean_curvature: weak,
        mean_curvature_spread: spread,
        angle_residual,
    })
}

/// `(theta, gamma, gamma_bar)` at every boundary node.
pub fn contact_angles(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<Vec<(f64, f64, f64)>> {
    let view = surf.view();
    let grid = surf.grid();
    (0..grid.n_theta())
        .map(|k| {
            let t = grid.theta(k);
            let bf = boundary_frame(&cfg.ambient, &view, t, &cfg.body)?;
            Ok((t, bf.cos_gamma.acos(), cfg.cos_gamma_bar(bf.rho)?.acos()))
        })
        .collect()
}

/// Frames at a boundary point of a surface parametrized by `(s, t)` with the
/// boundary at `s = 1` and `s` increasing outward.
#[derive(Clone, Debug)]
pub struct BoundaryFrame {
    pub geometry: SurfaceGeometry,
    pub body_geometry: SurfaceGeometry,
    pub tangent: Vec3,
    pub conormal: Vec3,
    pub eta: Vec3,
    pub cos_gamma: f64,
    pub sin_gamma: f64,
    pub kappa: f64,
    pub rho: f64,
    pub body_theta: f64,
    /// `x_rho` component of `eta`.
    pub eta_rho: f64,
}

pub fn boundary_frame(
    metric: &AmbientMetric,
    surface: &ParametricSurface,
    t: f64,
    body: &ProfileCurve,
) -> Result<BoundaryFrame> {
    let s = Vector2::new(1.0, t);
    let jet = surface.jet(s);
    let geo = geometry_from_jet(metric, &jet, surface.side)?;
    let g = geo.metric;
    let ginv = g
        .try_inverse()
        .ok_or_else(|| LabError::Degenerate("singular metric".into()))?;
    let [xs, xt] = jet.d1;
    let tangent = xt / norm_sq(&g, &xt).sqrt();
    let nu = xs - tangent * inner(&g, &xs, &tangent);
    let conormal = nu / norm_sq(&g, &nu).sqrt();
    let gamma = metric.christoffel(&jet.point)?;
    let accel = jet.d2[2] + gamma.correction(&ginv, &xt, &xt);
    let kappa = -inner(&g, &accel, &conormal) / norm_sq(&g, &xt);
    let (rho, body_theta) = profile_coordinates(body, &jet.point, 1e-7)?;
    let bjet = profile_jet(body, rho, body_theta)?;
    let bgeo = geometry_from_jet(metric, &bjet, NormalSide::Positive)?;
    let xr = bjet.d1[0];
    let e = xr - tangent * inner(&g, &xr, &tangent);
    let eta = e / norm_sq(&g, &e).sqrt();
    let cos_gamma = inner(&g, &bgeo.normal, &geo.normal).clamp(-1.0, 1.0);
    let eta_rho = bgeo.tangent_coordinates(&eta)[0];
    Ok(BoundaryFrame {
        geometry: geo,
        body_geometry: bgeo,
        tangent,
        conormal,
        eta,
        cos_gamma,
        sin_gamma: (1.0 - cos_gamma * cos_gamma).sqrt(),
        kappa,
        rho,
        body_theta,
        eta_rho,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RewriteResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl RewriteResidual {
    fn new(lhs: f64, rhs: f64) -> Self {
        RewriteResidual {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
        }
    }
}

/// `|A|^2 + Ric(N)` against `R/2 - K + |A|^2/2 + H^2/2`.
pub fn interior_rewrite(
    metric: &AmbientMetric,
    surface: &ParametricSurface,
    s: Vector2<f64>,
) -> Result<RewriteResidual> {
    let fd = surface.full_geometry(metric, s)?;
    let geo = fd.geometry;
    let curv = metric.curvature(&geo.point)?;
    let a2 = geo.second_form_norm_sq();
    let lhs = a2 + curv.ricci_of(&geo.normal);
    let rhs = 0.5 * curv.scalar - fd.gauss_curvature + 0.5 * a2 + 0.5 * geo.mean_curvature.powi(2);
    Ok(RewriteResidual::new(lhs, rhs))
}

/// `A_bdry(eta,eta)/sin - cot A(nu,nu)` against `-H cot + H_bdry/sin - kappa`
/// with the actual contact angle.
pub fn boundary_rewrite(
    metric: &AmbientMetric,
    surface: &ParametricSurface,
    t: f64,
    body: &ProfileCurve,
) -> Result<RewriteResidual> {
    let bf = boundary_frame(metric, surface, t, body)?;
    if bf.sin_gamma < 1e-10 {
        return Err(LabError::Degenerate("tangential contact".into()));
    }
    let cot = bf.cos_gamma / bf.sin_gamma;
    let lhs = bf.body_geometry.second_form_on(&bf.eta) / bf.sin_gamma - cot * bf.geometry.second_form_on(&bf.conormal);
    let rhs = -bf.geometry.mean_curvature * cot + bf.body_geometry.mean_curvature / bf.sin_gamma - bf.kappa;
    Ok(RewriteResidual::new(lhs, rhs))
}

/// Both rewrites at one surface point of a graph; the boundary one only at
/// boundary nodes.
#[derive(Clone, Debug, Serialize)]
pub struct RewriteReport {
    pub interior: RewriteResidual,
    pub boundary: Option<RewriteResidual>,
}

pub fn rewrite_residuals(cfg: &CapillaryConfig, surf: &GraphSurface, node: usize) -> Result<RewriteReport> {
    let view = surf.view();
    let (s, t) = surf.grid().polar(node);
    let interior = interior_rewrite(&cfg.ambient, &view, Vector2::new(s, t))?;
    let boundary = match surf.grid().kind(node) {
        NodeKind::Boundary { .. } => Some(boundary_rewrite(&cfg.ambient, &view, t, &cfg.body)?),
        _ => None,
    };
    Ok(RewriteReport { interior, boundary })
}

/// Boundary coefficient `q` from the frame and prescribed angle.
fn q_coefficient(cfg: &CapillaryConfig, bf: &BoundaryFrame) -> Result<(f64, f64)> {
    let cos_bar = cfg.cos_gamma_bar(bf.rho)?;
    let sin_bar = (1.0 - cos_bar * cos_bar).sqrt();
    if sin_bar < 1e-10 {
        return Err(LabError::Degenerate("sin(gamma_bar) vanishes".into()));
    }
    let d_eta_cos = bf.eta_rho * cfg.d_rho_cos_gamma_bar(bf.rho)?;
    let a_eta = bf.body_geometry.second_form_on(&bf.eta);
    let a_nu = bf.geometry.second_form_on(&bf.conormal);
    let q = a_eta / sin_bar - cos_bar / sin_bar * a_nu + d_eta_cos / (sin_bar * sin_bar);
    // Same quantity through the boundary rewrite.
    let via = -bf.geometry.mean_curvature * cos_bar / sin_bar + bf.body_geometry.mean_curvature / sin_bar - bf.kappa
        + d_eta_cos / (sin_bar * sin_bar);
    Ok((q, via))
}

/// Pulled-back metric of the view in reference Cartesian coordinates.
fn reference_metric(metric: AmbientMetric, view: ParametricSurface) -> GridMetric {
    GridMetric::Field(Arc::new(move |x: f64, y: f64| {
        let s = x.hypot(y);
        let t = y.atan2(x);
        let p = Vector2::new(s, t);
        let [xs, xt] = view.first_derivatives(p);
        let g = metric
            .value(&view.point(p))
            .unwrap_or_else(|_| Mat3::from_element(f64::NAN));
        let (e, f, gg) = (norm_sq(&g, &xs), inner(&g, &xs, &xt), norm_sq(&g, &xt));
        let (c, sn) = (t.cos(), t.sin());
        let xx = c * c * e - 2.0 * c * sn * f / s + sn * sn * gg / (s * s);
        let xy = c * sn * e + (c * c - sn * sn) * f / s - c * sn * gg / (s * s);
        let yy = sn * sn * e + 2.0 * sn * c * f / s + c * c * gg / (s * s);
        Mat2::new(xx, xy, xy, yy)
    }))
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    /// Grid carrying the induced metric; nodes match the surface's.
    pub grid: DiskGrid,
    /// `|A|^2 + Ric(N)` at nodes.
    pub potential: DVector<f64>,
    /// `q` at boundary nodes.
    pub q: DVector<f64>,
    /// `q` recomputed through the boundary rewrite.
    pub q_via_rewrite: DVector<f64>,
    pub mu1: f64,
    pub eigenfunction: DiskField,
    /// Mass-weighted variance of the eigenfunction over its mean square.
    pub eigen_variance: f64,
    pub q_one_one: f64,
}

impl StabilityReport {
    /// `Q(f, g)` as a bilinear form.
    pub fn form(&self, f: &DiskField, g: &DiskField) -> f64 {
        let mut a = self.grid.stiffness().clone();
        for i in 0..self.grid.len() {
            a[(i, i)] -= self.grid.mass()[i] * self.potential[i];
        }
        for k in 0..self.grid.n_theta() {
            let i = self.grid.boundary_index(k);
            a[(i, i)] -= self.grid.boundary_weights()[k] * self.q[k];
        }
        f.values.dot(&(a * &g.values))
    }
}

/// Criticality tolerance gating the second variation.
pub const CRITICALITY_TOLERANCE: f64 = 1e-6;

/// Stability data at a critical surface.
pub fn stability(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<StabilityReport> {
    let crit = criticality(cfg, surf)?;
    if !crit.is_critical(CRITICALITY_TOLERANCE) {
        return Err(LabError::Precondition(format!(
            "surface is not critical: interior {:.3e}, boundary {:.3e}, angle {:.3e}",
            crit.interior_residual, crit.boundary_residual, crit.angle_residual
        )));
    }
    let g = surf.grid();
    let view = surf.view();
    let grid = DiskGrid::new(
        g.n_r(),
        g.n_theta(),
        reference_metric(cfg.ambient.clone(), view.clone()),
    )?;
    let mut potential = DVector::zeros(g.len());
    for i in 1..g.len() {
        let (s, t) = g.polar(i);
        let geo = view.geometry(&cfg.ambient, Vector2::new(s, t))?;
        let curv = cfg.ambient.curvature(&geo.point)?;
        potential[i] = geo.second_form_norm_sq() + curv.ricci_of(&geo.normal);
    }
    potential[0] = (1..=g.n_theta()).map(|i| potential[i]).sum::<f64>() / g.n_theta() as f64;
    let mut q = DVector::zeros(g.n_theta());
    let mut q_via = DVector::zeros(g.n_theta());
    for k in 0..g.n_theta() {
        let bf = boundary_frame(&cfg.ambient, &view, g.theta(k), &cfg.body)?;
        let (a, b) = q_coefficient(cfg, &bf)?;
        q[k] = a;
        q_via[k] = b;
    }
    let eig = eigen_smallest(&grid, &potential, &q)?;
    let f = &eig.function.values;
    let m = grid.mass();
    let mean = m.dot(f) / grid.area();
    let var = m.dot(&f.map(|v| (v - mean).powi(2))) / m.dot(&f.component_mul(f));
    let mut report = StabilityReport {
        grid,
        potential,
        q,
        q_via_rewrite: q_via,
        mu1: eig.value,
        eigenfunction: eig.function,
        eigen_variance: var,
        q_one_one: 0.0,
    };
    let one = DiskField::new(DVector::from_element(g.len(), 1.0));
    report.q_one_one = report.form(&one, &one);
    Ok(report)
}

/// `Q(f, f)` with its stability report.
pub fn second_variation(cfg: &CapillaryConfig, surf: &GraphSurface, f: &DiskField) -> Result<(f64, StabilityReport)> {
    let report = stability(cfg, surf)?;
    Ok((report.form(f, f), report))
}

/// Second central difference of the energy along the normal variation `f`.
pub fn energy_second_difference(cfg: &CapillaryConfig, surf: &GraphSurface, f: &DiskField, eps: f64) -> Result<f64> {
    let dw = vertical_speed(cfg, surf, f)?;
    let e0 = capillary_energy(cfg, surf)?;
    let ep = capillary_energy(cfg, &surf.with_heights(&surf.heights + &dw * eps)?)?;
    let em = capillary_energy(cfg, &surf.with_heights(&surf.heights - &dw * eps)?)?;
    Ok((ep - 2.0 * e0 + em) / (eps * eps))
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityItem {
    pub name: &'static str,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub items: Vec<RigidityItem>,
    pub pass: bool,
}

pub const RIGIDITY_TOLERANCE: f64 = 1e-6;

/// Max-norm residuals of the seven infinitesimal-rigidity conditions.
pub fn rigidity_report(cfg: &CapillaryConfig, surf: &GraphSurface) -> Result<RigidityReport> {
    let grid = surf.grid();
    let view = surf.view();
    let model = cfg.model.metric();
    let mut r_g: f64 = 0.0;
    let mut a_norm: f64 = 0.0;
    let mut gauss: f64 = 0.0;
    for i in 1..grid.len() {
        if let NodeKind::Interior { .. } = grid.kind(i) {
            let (s, t) = grid.polar(i);
            let fd = view.full_geometry(&cfg.ambient, Vector2::new(s, t))?;
            let curv = cfg.ambient.curvature(&fd.geometry.point)?;
            r_g = r_g.max((curv.scalar - cfg.model.scalar_curvature()).abs());
            let a = match cfg.model {
                ModelSpace::Euclidean => fd.geometry.second_form_norm_sq(),
                ModelSpace::Hyperbolic => fd.geometry.traceless_norm_sq(),
            };
            a_norm = a_norm.max(a.max(0.0).sqrt());
            gauss = gauss.max(fd.gauss_curvature.abs());
        }
    }
    let mut h_bdry: f64 = 0.0;
    let mut angle: f64 = 0.0;
    let mut sigma: f64 = 0.0;
    let mut kappa: f64 = 0.0;
    for k in 0..grid.n_theta() {
        let bf = boundary_frame(&cfg.ambient, &view, grid.theta(k), &cfg.body)?;
        let bjet = profile_jet(&cfg.body, bf.rho, bf.body_theta)?;
        let mgeo = geometry_from_jet(&model, &bjet, NormalSide::Positive)?;
        h_bdry = h_bdry.max((bf.body_geometry.mean_curvature - mgeo.mean_curvature).abs());
        let cos_bar = cfg.cos_gamma_bar(bf.rho)?;
        angle = angle.max((bf.cos_gamma - cos_bar).abs());
        sigma = sigma.max((bf.body_geometry.sigma - mgeo.sigma).amax());
        let sin_bar = (1.0 - cos_bar * cos_bar).sqrt();
        let d_eta_cos = bf.eta_rho * cfg.d_rho_cos_gamma_bar(bf.rho)?;
        let target = bf.body_geometry.mean_curvature / sin_bar
            + cfg.model.cot_coefficient() * cos_bar / sin_bar
            + d_eta_cos / (sin_bar * sin_bar);
        kappa = kappa.max((bf.kappa - target).abs());
    }
    let items: Vec<RigidityItem> = [
        ("scalar curvature", r_g),
        ("second fundamental form", a_norm),
        ("boundary mean curvature", h_bdry),
        ("contact angle", angle),
        ("boundary metric", sigma),
        ("gauss curvature", gauss),
        ("geodesic curvature", kappa),
    ]
    .into_iter()
    .map(|(name, residual)| RigidityItem {
        name,
        residual,
        pass: residual <= RIGIDITY_TOLERANCE,
    })
    .collect();
    let pass = items.iter().all(|i| i.pass);
    Ok(RigidityReport { items, pass })
}

/// Pointwise lower and upper height bounds.
#[derive(Clone, Debug)]
pub struct Barriers {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct DescentOptions {
    pub max_iterations: usize,
    /// Stop once the gradient residual drops below this.
    pub tolerance: f64,
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iterations: 400,
            tolerance: 1e-9,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DescentRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub surface: GraphSurface,
    pub history: Vec<DescentRecord>,
    pub converged: bool,
}

fn clamp(h: &DVector<f64>, barriers: Option<&Barriers>) -> DVector<f64> {
    match barriers {
        None => h.clone(),
        Some(b) => DVector::from_fn(h.len(), |i, _| h[i].clamp(b.lower[i], b.upper[i])),
    }
}

/// Sobolev-preconditioned descent with Armijo backtracking; the boundary
/// ring moves freely and therefore slides along the boundary surface.
pub fn minimize_capillary(
    cfg: &CapillaryConfig,
    init: &GraphSurface,
    barriers: Option<&Barriers>,
    opts: &DescentOptions,
) -> Result<DescentResult> {
    let out = descend(cfg, init, barriers, opts)?;
    if out.converged {
        return Ok(out);
    }
    let hist: Vec<f64> = out.history.iter().map(|r| r.residual).collect();
    Err(LabError::NoConvergence {
        iterations: hist.len(),
        residual: *hist.last().unwrap_or(&f64::NAN),
        history: hist,
    })
}

/// Descent that also returns the last iterate when it stalls.
pub fn descend(
    cfg: &CapillaryConfig,
    init: &GraphSurface,
    barriers: Option<&Barriers>,
    opts: &DescentOptions,
) -> Result<DescentResult> {
    if let Some(b) = barriers {
        if b.lower.len() != init.heights.len() || b.upper.len() != init.heights.len() {
            return Err(invalid("barrier length does not match the grid"));
        }
        if (0..init.heights.len()).any(|i| init.heights[i] < b.lower[i] || init.heights[i] > b.upper[i]) {
            return Err(LabError::Precondition("initial surface violates the barriers".into()));
        }
    }
    let grid = init.grid().clone();
    let mut pre = grid.stiffness().clone();
    for i in 0..grid.len() {
        pre[(i, i)] += grid.mass()[i];
    }
    let pre = pre
        .cholesky()
        .ok_or_else(|| LabError::Internal("preconditioner is not positive definite".into()))?;
    let c = cfg.volume_coefficient;
    let mut surf = init.clone();
    let mut terms = energy_terms(cfg, &surf)?;
    let mut history = Vec::new();
    for it in 0..=opts.max_iterations {
        let g = terms.gradient(c);
        let (ri, rb) = gradient_residual(&surf, &g);
        let residual = ri.max(rb);
        history.push(DescentRecord {
            iteration: it,
            energy: terms.total,
            residual,
        });
        if residual < opts.tolerance {
            return Ok(DescentResult {
                surface: surf,
                history,
                converged: true,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let dir = -pre.solve(&g);
        let slope = g.dot(&dir);
        let attempt = |t: f64| -> Option<(GraphSurface, EnergyTerms)> {
            let cand = surf.with_heights(clamp(&(&surf.heights + &dir * t), barriers)).ok()?;
            let ct = energy_terms(cfg, &cand).ok()?;
            Some((cand, ct))
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            if let Some((cand, ct)) = attempt(t) {
                // Near the optimum energy differences drown in rounding;
                // a smaller gradient then decides.
                let noise = 64.0 * f64::EPSILON * terms.total.abs().max(1.0);
                let flat = ct.total <= terms.total + noise && {
                    let (ci, cb) = gradient_residual(&cand, &ct.gradient(c));
                    ci.max(cb) < residual
                };
                if ct.total <= terms.total + opts.armijo * t * slope || flat {
                    accepted = Some((cand, ct, t));
                    break;
                }
            }
            t *= 0.5;
        }
        // Minimizer of the quadratic through E(0), E'(0) and the accepted trial.
        if let Some((_, ct, t)) = &accepted {
            let curv = (ct.total - terms.total - slope * t) / (t * t);
            if curv > 0.0 {
                let t_star = -slope / (2.0 * curv);
                if t_star.is_finite() && t_star < 1e3 && (t_star - t).abs() > 1e-3 * t {
                    if let Some((cand, c2)) = attempt(t_star) {
                        if c2.total < ct.total {
                            accepted = Some((cand, c2, t_star));
                        }
                    }
                }
            }
        }
        let accepted = accepted.map(|(s, c, _)| (s, c));
        match accepted {
            Some((s, ct)) => {
                surf = s;
                terms = ct;
            }
            None => break,
        }
    }
    Ok(DescentResult {
        surface: surf,
        history,
        converged: false,
    })
}

/// Unit vector helper shared with tests.
pub fn unit_normal_of_plane(g: &Mat3, a: &Vec3, b: &Vec3) -> Result<Vec3> {
    let ginv = g
        .try_inverse()
        .ok_or_else(|| LabError::Degenerate("singular metric".into()))?;
    Ok(unit_from_covector(&ginv, &a.cross(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cylinder_cfg() -> CapillaryConfig {
        CapillaryConfig::euclidean(ProfileCurve::cylinder(1.0, 2.0).unwrap().with_top(2.0))
    }

    #[test]
    fn flat_disk_in_cylinder_has_area_pi_at_every_height() {
        let cfg = cylinder_cfg();
        for z in [0.3, 1.0, 1.7] {
            let s = GraphSurface::level(cfg.body.clone(), 6, 9, z).unwrap();
            let e = capillary_energy(&cfg, &s).unwrap();
            assert!((e - PI).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn flat_disk_is_critical_for_every_variation() {
        let cfg = cylinder_cfg();
        let s = GraphSurface::level(cfg.body.clone(), 6, 9, 1.0).unwrap();
        let grid = s.grid().clone();
        let f = grid.sample(|x, y| 1.0 + x - 0.3 * y * y);
        assert!(first_variation(&cfg, &s, &f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tilted_graph_costs_more_area() {
        let cfg = cylinder_cfg();
        let flat = GraphSurface::level(cfg.body.clone(), 6, 9, 1.0).unwrap();
        let tilt = GraphSurface::from_reference(cfg.body.clone(), 6, 9, |x, _| 1.0 + 0.1 * x).unwrap();
        assert!(capillary_energy(&cfg, &tilt).unwrap() > capillary_energy(&cfg, &flat).unwrap() + 1e-4);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap().with_top(2.0));
        let s = GraphSurface::from_reference(cfg.body.clone(), 4, 7, |x, y| 1.0 + 0.1 * x - 0.05 * y * y).unwrap();
        let t = energy_terms(&cfg, &s).unwrap();
        let g = t.gradient(0.0);
        for i in [0, 3, 9, s.grid().boundary_index(2)] {
            let h = 1e-6;
            let mut p = s.heights.clone();
            p[i] += h;
            let mut m = s.heights.clone();
            m[i] -= h;
            let fd = (capillary_energy(&cfg, &s.with_heights(p).unwrap()).unwrap()
                - capillary_energy(&cfg, &s.with_heights(m).unwrap()).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "node {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hyperbolic_volume_gradient_matches_differences() {
        let body = ProfileCurve::sphere_cap(1.0, 1.0).unwrap().with_top(2.5);
        let cfg = CapillaryConfig::hyperbolic(body).unwrap();
        let s = GraphSurface::from_reference(cfg.body.clone(), 4, 7, |x, _| 1.8 + 0.05 * x).unwrap();
        let g = energy_terms(&cfg, &s).unwrap().gradient(2.0);
        for i in [0, 5, s.grid().boundary_index(1)] {
            let h = 1e-6;
            let mut p = s.heights.clone();
            p[i] += h;
            let mut m = s.heights.clone();
            m[i] -= h;
            let fd = (capillary_energy(&cfg, &s.with_heights(p).unwrap()).unwrap()
                - capillary_energy(&cfg, &s.with_heights(m).unwrap()).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "node {i}: {fd} vs {}", g[i]);
        }
    }
}
