//! Closed curves on a rotationally symmetric boundary surface, the turning
//! integral `int 1/r dlambda` and the pointwise boundary decompositions of
//! the Euclidean, hyperbolic and circle-factor models.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::metric::{inner, norm_sq, AmbientMetric, Vec3};
use crate::profile::ProfileCurve;
use crate::surface::{geometry_from_jet, profile_jet, unit_from_covector, NormalSide, SurfaceJet};

/// Position `(rho, theta)` and its parameter derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub rho: f64,
    pub theta: f64,
    pub d_rho: f64,
    pub d_theta: f64,
}

/// Periodic parametrization `t in [0, 2 pi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CurveShape {
    /// Level circle at depth `rho`.
    Level { rho: f64 },
    /// `rho = rho0 + sum (a_k cos kt + b_k sin kt)`,
    /// `theta = winding t + sum (c_k cos kt + d_k sin kt)`.
    Fourier {
        rho0: f64,
        rho_cos: Vec<f64>,
        rho_sin: Vec<f64>,
        theta_cos: Vec<f64>,
        theta_sin: Vec<f64>,
        winding: i32,
    },
    /// Periodic cubic spline through samples at uniform `t`; `theta` samples
    /// are unwrapped and the final turn is supplied by `winding`.
    Sampled {
        rho: Vec<f64>,
        theta: Vec<f64>,
        winding: i32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurve {
    pub shape: CurveShape,
    /// Optional monotone reparametrization `t -> t + eps sin(k t)`.
    pub reparam: Option<(f64, u32)>,
    splines: Option<(PeriodicSpline, PeriodicSpline)>,
}

impl BoundaryCurve {
    pub fn new(shape: CurveShape) -> Result<Self> {
        let splines = match &shape {
            CurveShape::Sampled { rho, theta, winding } => {
                if rho.len() != theta.len() || rho.len() < 4 {
                    return Err(invalid("sampled curve needs at least four matched samples"));
                }
                let n = theta.len() as f64;
                // Remove the secular winding so the remainder is periodic.
                let base: Vec<f64> = theta
                    .iter()
                    .enumerate()
                    .map(|(i, th)| th - *winding as f64 * 2.0 * PI * i as f64 / n)
                    .collect();
                Some((PeriodicSpline::new(rho)?, PeriodicSpline::new(&base)?))
            }
            _ => None,
        };
        Ok(BoundaryCurve {
            shape,
            reparam: None,
            splines,
        })
    }

    pub fn level(rho: f64) -> Self {
        Self::new(CurveShape::Level { rho }).expect("level curve is valid")
    }

    pub fn reparametrized(mut self, eps: f64, k: u32) -> Result<Self> {
        if eps.abs() * k as f64 >= 1.0 {
            return Err(invalid("reparametrization must be monotone"));
        }
        self.reparam = Some((eps, k));
        Ok(self)
    }

    pub fn winding(&self) -> i32 {
        match &self.shape {
            CurveShape::Level { .. } => 1,
            CurveShape::Fourier { winding, .. } | CurveShape::Sampled { winding, .. } => *winding,
        }
    }

    pub fn is_separating(&self) -> bool {
        self.winding().abs() == 1
    }

    fn eval_base(&self, t: f64) -> CurvePoint {
        match &self.shape {
            CurveShape::Level { rho } => CurvePoint {
                rho: *rho,
                theta: t,
                d_rho: 0.0,
                d_theta: 1.0,
            },
            CurveShape::Fourier {
                rho0,
                rho_cos,
                rho_sin,
                theta_cos,
                theta_sin,
                winding,
            } => {
                let (mut rho, mut d_rho) = (*rho0, 0.0);
                let (mut theta, mut d_theta) = (*winding as f64 * t, *winding as f64);
                for (k, a) in rho_cos.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    rho += a * (kf * t).cos();
                    d_rho -= a * kf * (kf * t).sin();
                }
                for (k, b) in rho_sin.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    rho += b * (kf * t).sin();
                    d_rho += b * kf * (kf * t).cos();
                }
                for (k, c) in theta_cos.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    theta += c * (kf * t).cos();
                    d_theta -= c * kf * (kf * t).sin();
                }
                for (k, d) in theta_sin.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    theta += d * (kf * t).sin();
                    d_theta += d * kf * (kf * t).cos();
                }
                CurvePoint {
                    rho,
                    theta,
                    d_rho,
                    d_theta,
                }
            }
            CurveShape::Sampled { winding, .. } => {
                let (sr, st) = self.splines.as_ref().expect("sampled curve has splines");
                let (rho, d_rho) = sr.eval(t);
                let (base, d_base) = st.eval(t);
                let w = *winding as f64;
                CurvePoint {
                    rho,
                    theta: base + w * t,
                    d_rho,
                    d_theta: d_base + w,
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> CurvePoint {
        match self.reparam {
            None => self.eval_base(t),
            Some((eps, k)) => {
                let kf = k as f64;
                let s = t + eps * (kf * t).sin();
                let ds = 1.0 + eps * kf * (kf * t).cos();
                let p = self.eval_base(s);
                CurvePoint {
                    d_rho: p.d_rho * ds,
                    d_theta: p.d_theta * ds,
                    ..p
                }
            }
        }
    }

    /// Checks closedness and the declared winding number.
    pub fn check_closed(&self) -> Result<()> {
        let a = self.eval(0.0);
        let b = self.eval(2.0 * PI);
        let turns = (b.theta - a.theta) / (2.0 * PI);
        if (b.rho - a.rho).abs() > 1e-12 || (turns - self.winding() as f64).abs() > 1e-12 {
            return Err(invalid("curve is not closed with its declared winding"));
        }
        Ok(())
    }
}

/// Periodic cubic spline on `[0, 2 pi)` with uniform knots.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSpline {
    y: Vec<f64>,
    m: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn new(y: &[f64]) -> Result<Self> {
        let n = y.len();
        let h = 2.0 * PI / n as f64;
        let mut a = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
            a[(i, im)] += h / 6.0;
            a[(i, i)] += 2.0 * h / 3.0;
            a[(i, ip)] += h / 6.0;
            rhs[i] = (y[ip] - 2.0 * y[i] + y[im]) / h;
        }
        let m = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| LabError::Internal("periodic spline system is singular".into()))?;
        Ok(PeriodicSpline {
            y: y.to_vec(),
            m: m.iter().copied().collect(),
            h,
        })
    }

    /// Value and first derivative.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.y.len();
        let tt = t.rem_euclid(2.0 * PI);
        let i = ((tt / self.h).floor() as usize).min(n - 1);
        let j = (i + 1) % n;
        let h = self.h;
        let b = (tt - i as f64 * h) / h;
        let a = 1.0 - b;
        let (m0, m1) = (self.m[i], self.m[j]);
        let v = a * self.y[i] + b * self.y[j] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.y[j] - self.y[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (v, d)
    }

    pub fn knots(&self) -> usize {
        self.y.len()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

fn turning_density(prof: &ProfileCurve, p: &CurvePoint) -> Result<f64> {
    let j = prof.radius(p.rho)?;
    if j.psi <= 0.0 {
        return Err(invalid("curve touches the axis"));
    }
    let speed = (p.d_rho * p.d_rho * (1.0 + j.d1 * j.d1) + p.d_theta * p.d_theta * j.psi * j.psi).sqrt();
    Ok(speed / j.psi)
}

/// `int_l <D_e1 e1, -e2> dlambda`, whose integrand is `1 / r` on the height
/// level through each point.
pub fn turning_integral(prof: &ProfileCurve, curve: &BoundaryCurve) -> Result<f64> {
    curve.check_closed()?;
    match &curve.shape {
        CurveShape::Sampled { .. } if curve.reparam.is_none() => {
            // Piecewise cubic: Gauss-Legendre per knot interval.
            let knots = curve.splines.as_ref().map(|s| s.0.knots()).unwrap_or(1);
            let h = 2.0 * PI / knots as f64;
            let (x, w) = gauss_legendre(12);
            let mut sum = 0.0;
            for i in 0..knots {
                let a = i as f64 * h;
                for (xi, wi) in x.iter().zip(&w) {
                    let t = a + 0.5 * h * (xi + 1.0);
                    sum += 0.5 * h * wi * turning_density(prof, &curve.eval(t))?;
                }
            }
            Ok(sum)
        }
        _ => {
            // Periodic trapezoid, refined until spectral convergence.
            let mut n = 64usize;
            let mut prev = f64::NAN;
            loop {
                let h = 2.0 * PI / n as f64;
                let mut sum = 0.0;
                for i in 0..n {
                    sum += turning_density(prof, &curve.eval(i as f64 * h))?;
                }
                let val = sum * h;
                if (val - prev).abs() <= 1e-13 * val.abs().max(1.0) || n >= 1 << 16 {
                    return Ok(val);
                }
                prev = val;
                n *= 2;
            }
        }
    }
}

/// Ambient model for the pointwise boundary decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum BoundaryModel {
    Euclidean,
    Hyperbolic,
    /// Product `S^1 x W` with flat (`tau = 0`) or hyperbolic (`tau = -1`)
    /// conformal factor.
    CircleFactor {
        tau: i32,
    },
}

impl BoundaryModel {
    fn metric(&self) -> Result<AmbientMetric> {
        match self {
            BoundaryModel::Euclidean => Ok(AmbientMetric::Euclidean),
            BoundaryModel::Hyperbolic => Ok(AmbientMetric::Hyperbolic),
            BoundaryModel::CircleFactor { tau: 0 } => Ok(AmbientMetric::Euclidean),
            BoundaryModel::CircleFactor { tau: -1 } => Ok(AmbientMetric::Hyperbolic),
            BoundaryModel::CircleFactor { .. } => Err(invalid("circle factor needs tau in {0, -1}")),
        }
    }

    /// Coefficient of `cot gamma` in the decomposition.
    pub fn cot_coefficient(&self) -> f64 {
        match self {
            BoundaryModel::Euclidean => 0.0,
            BoundaryModel::Hyperbolic => 2.0,
            BoundaryModel::CircleFactor { tau } => -2.0 * *tau as f64,
        }
    }

    /// Jet of the boundary surface and its normal side (outward).
    fn boundary_jet(&self, prof: &ProfileCurve, rho: f64, theta: f64) -> Result<(SurfaceJet, NormalSide)> {
        match self {
            BoundaryModel::CircleFactor { .. } => {
                // Coordinates (theta, x2, x3) with the meridian x2 = psi, x3 = top - rho.
                let j = prof.radius(rho)?;
                Ok((
                    SurfaceJet {
                        point: Vec3::new(theta, j.psi, prof.top - rho),
                        d1: [Vec3::new(0.0, j.d1, -1.0), Vec3::new(1.0, 0.0, 0.0)],
                        d2: [Vec3::new(0.0, j.d2, 0.0), Vec3::zeros(), Vec3::zeros()],
                    },
                    NormalSide::Negative,
                ))
            }
            _ => Ok((profile_jet(prof, rho, theta)?, NormalSide::Positive)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryIntegrand {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub cos_gamma: f64,
    pub mean_curvature: f64,
}

/// Prescribed angle data computed under the model metric at depth `rho`:
/// `(cos gamma, |x_rho|_g, H, jet)`.
fn model_angle(model: &BoundaryModel, prof: &ProfileCurve, rho: f64) -> Result<(f64, f64, f64)> {
    let metric = model.metric()?;
    let (jet, side) = model.boundary_jet(prof, rho, 0.0)?;
    let geo = geometry_from_jet(&metric, &jet, side)?;
    let g = metric.value(&jet.point)?;
    let up = Vec3::z() / norm_sq(&g, &Vec3::z()).sqrt();
    let cos = inner(&g, &geo.normal, &up);
    Ok((cos, norm_sq(&g, &jet.d1[0]).sqrt(), geo.mean_curvature))
}

/// `H/sin + c cot + (1/sin^2) d_eta cos` on the level at depth `rho`,
/// against the model's geodesic curvature of that level.
pub fn boundary_integrand(model: &BoundaryModel, prof: &ProfileCurve, rho: f64) -> Result<BoundaryIntegrand> {
    let (cos, speed, h) = model_angle(model, prof, rho)?;
    let sin2 = 1.0 - cos * cos;
    if sin2.sqrt() <= 1e-10 {
        return Err(LabError::Degenerate("tangential contact".into()));
    }
    let sin = sin2.sqrt();
    // Fourth-order difference of cos gamma along the meridian.
    let step = 1e-3 * prof.rho_max.min(rho).min(prof.rho_max - rho).max(1e-6);
    let c = |r: f64| model_angle(model, prof, r).map(|v| v.0);
    let d_cos =
        (c(rho - 2.0 * step)? - 8.0 * c(rho - step)? + 8.0 * c(rho + step)? - c(rho + 2.0 * step)?) / (12.0 * step);
    let d_eta_cos = d_cos / speed;
    let lhs = h / sin + model.cot_coefficient() * cos / sin + d_eta_cos / sin2;
    let radius = prof.radius(rho)?.psi;
    let rhs = match model {
        BoundaryModel::Euclidean => 1.0 / radius,
        BoundaryModel::Hyperbolic => (prof.top - rho) / radius,
        BoundaryModel::CircleFactor { .. } => 0.0,
    };
    Ok(BoundaryIntegrand {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        cos_gamma: cos,
        mean_curvature: h,
    })
}

/// Angle derivative along the model unit conormal and along a conormal of
/// unit length for the scaled metric `c^2 sigma_bar` (`c >= 1`).
pub fn angle_derivative_comparison(prof: &ProfileCurve, rho: f64, scale: f64) -> Result<(f64, f64)> {
    if scale < 1.0 {
        return Err(invalid("scaling factor must be at least one"));
    }
    let f = prof.geometry(rho, 0.0)?;
    // d gamma = -d cos / sin
    let d_bar = -f.d_eta_cos_gamma / f.sin_gamma;
    Ok((d_bar, d_bar / scale))
}

/// g-unit outward normal of a model boundary surface; used by callers that
/// need the prescribed-angle normal field.
pub fn model_boundary_normal(model: &BoundaryModel, prof: &ProfileCurve, rho: f64, theta: f64) -> Result<Vec3> {
    let metric = model.metric()?;
    let (jet, side) = model.boundary_jet(prof, rho, theta)?;
    let g = metric.value(&jet.point)?;
    let ginv = g
        .try_inverse()
        .ok_or_else(|| LabError::Degenerate("singular metric".into()))?;
    Ok(unit_from_covector(&ginv, &jet.d1[0].cross(&jet.d1[1])) * side.sign())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_circle_turns_exactly_once() {
        let prof = ProfileCurve::sphere_cap(1.0, 1.9).unwrap();
        let v = turning_integral(&prof, &BoundaryCurve::level(0.7)).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn tilted_loop_on_cylinder_exceeds_bound() {
        let prof = ProfileCurve::cylinder(1.0, 2.0).unwrap();
        let c = BoundaryCurve::new(CurveShape::Fourier {
            rho0: 1.0,
            rho_cos: vec![],
            rho_sin: vec![0.1],
            theta_cos: vec![],
            theta_sin: vec![],
            winding: 1,
        })
        .unwrap();
        let v = turning_integral(&prof, &c).unwrap();
        assert!(v > 2.0 * PI + 0.01, "{v}");
    }

    #[test]
    fn cylinder_decomposition_is_inverse_radius() {
        let prof = ProfileCurve::cylinder(2.0, 2.0).unwrap();
        let r = boundary_integrand(&BoundaryModel::Euclidean, &prof, 1.0).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-9);
        let hyp = ProfileCurve::cylinder(2.0, 2.0).unwrap().with_top(3.0);
        let r = boundary_integrand(&BoundaryModel::Hyperbolic, &hyp, 1.0).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-9, "{}", r.lhs);
    }

    #[test]
    fn every_model_balances_on_curved_profiles() {
        let cap = ProfileCurve::sphere_cap(1.5, 2.4).unwrap().with_top(4.0);
        let cone = ProfileCurve::cone(0.7, 2.0).unwrap().with_top(3.0);
        for prof in [&cap, &cone] {
            for model in [
                BoundaryModel::Euclidean,
                BoundaryModel::Hyperbolic,
                BoundaryModel::CircleFactor { tau: 0 },
                BoundaryModel::CircleFactor { tau: -1 },
            ] {
                for rho in [0.3, 0.9, 1.6] {
                    let r = boundary_integrand(&model, prof, rho).unwrap();
                    assert!(r.residual < 1e-7, "{model:?} rho={rho}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn scaled_conormal_never_exceeds_model_derivative() {
        let prof = ProfileCurve::sphere_cap(1.0, 1.5).unwrap();
        let (bar, scaled) = angle_derivative_comparison(&prof, 0.8, 1.7).unwrap();
        assert!(bar >= scaled && scaled >= 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn periodic_spline_interpolates() {
        let n = 32;
        let y: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let s = PeriodicSpline::new(&y).unwrap();
        let (v, d) = s.eval(1.0);
        assert!((v - 1f64.sin()).abs() < 1e-4 && (d - 1f64.cos()).abs() < 1e-3);
    }
}
