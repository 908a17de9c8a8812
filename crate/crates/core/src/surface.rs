//! Extrinsic and intrinsic geometry of parametrized surfaces in an ambient
//! metric. Conventions: `A(X, Y) = -<nabla_X Y, N>`, `H = tr(sigma^-1 A)`,
//! so a round sphere with outward normal has `H = 2 / R`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{LabError, Result};
use crate::metric::{inner, norm_sq, AmbientMetric, Christoffel, Mat3, Vec3};
use crate::profile::ProfileCurve;

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;

/// Which side of the surface the unit normal points to, relative to the
/// covector `X_1 x X_2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalSide {
    Positive,
    Negative,
}

impl NormalSide {
    pub fn sign(self) -> f64 {
        match self {
            NormalSide::Positive => 1.0,
            NormalSide::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            NormalSide::Positive => NormalSide::Negative,
            NormalSide::Negative => NormalSide::Positive,
        }
    }
}

/// Position with first and second parameter derivatives; `d2` holds
/// `[X_11, X_12, X_22]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceJet {
    pub point: Vec3,
    pub d1: [Vec3; 2],
    pub d2: [Vec3; 3],
}

impl SurfaceJet {
    pub fn second(&self, a: usize, b: usize) -> Vec3 {
        match (a, b) {
            (0, 0) => self.d2[0],
            (1, 1) => self.d2[2],
            _ => self.d2[1],
        }
    }
}

/// Pointwise extrinsic geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceGeometry {
    pub point: Vec3,
    pub tangents: [Vec3; 2],
    pub metric: Mat3,
    pub sigma: Mat2,
    pub sigma_inv: Mat2,
    /// g-unit normal.
    pub normal: Vec3,
    pub second_form: Mat2,
    pub mean_curvature: f64,
    /// `sqrt(det sigma)`.
    pub area_density: f64,
}

impl SurfaceGeometry {
    /// `|A|^2 = sigma^ac sigma^bd A_ab A_cd`.
    pub fn second_form_norm_sq(&self) -> f64 {
        let m = self.sigma_inv * self.second_form;
        (m * m).trace()
    }

    /// Trace-free part norm `|A - H sigma / 2|^2`.
    pub fn traceless_norm_sq(&self) -> f64 {
        self.second_form_norm_sq() - 0.5 * self.mean_curvature * self.mean_curvature
    }

    /// Coordinates of an ambient tangent vector in the `(X_1, X_2)` basis.
    pub fn tangent_coordinates(&self, v: &Vec3) -> Vec2 {
        let g = &self.metric;
        let rhs = Vec2::new(inner(g, &self.tangents[0], v), inner(g, &self.tangents[1], v));
        self.sigma_inv * rhs
    }

    /// `A(v, v)` for an ambient vector tangent to the surface.
    pub fn second_form_on(&self, v: &Vec3) -> f64 {
        let c = self.tangent_coordinates(v);
        c.dot(&(self.second_form * c))
    }
}

/// g-unit vector dual to the covector `omega` (the g-normal of `ker omega`).
pub fn unit_from_covector(ginv: &Mat3, omega: &Vec3) -> Vec3 {
    let v = ginv * omega;
    v / omega.dot(&v).sqrt()
}

/// Geometry of a surface at one point from its second-order jet.
pub fn geometry_from_jet(metric: &AmbientMetric, jet: &SurfaceJet, side: NormalSide) -> Result<SurfaceGeometry> {
    let mjet = metric.jet(&jet.point)?;
    let gamma = Christoffel::from_jet(&mjet);
    geometry_with(&mjet.value, &gamma, jet, side)
}

/// Same as [`geometry_from_jet`] with a precomputed metric and connection.
pub fn geometry_with(g: &Mat3, gamma: &Christoffel, jet: &SurfaceJet, side: NormalSide) -> Result<SurfaceGeometry> {
    let [x1, x2] = jet.d1;
    let omega = x1.cross(&x2);
    let scale = x1.norm() * x2.norm();
    if !(omega.norm() > 1e-13 * scale) || scale == 0.0 {
        return Err(LabError::Degenerate("rank-deficient parametrization".into()));
    }
    let ginv = g
        .try_inverse()
        .ok_or_else(|| LabError::Degenerate("singular ambient metric".into()))?;
    let normal = unit_from_covector(&ginv, &omega) * side.sign();
    let sigma = Mat2::new(norm_sq(g, &x1), inner(g, &x1, &x2), inner(g, &x2, &x1), norm_sq(g, &x2));
    let det = sigma.determinant();
    let sigma_inv = Mat2::new(sigma[(1, 1)], -sigma[(0, 1)], -sigma[(1, 0)], sigma[(0, 0)]) / det;
    let mut second_form = Mat2::zeros();
    for a in 0..2 {
        for b in a..2 {
            let xa = &jet.d1[a];
            let xb = &jet.d1[b];
            let v = -(inner(g, &jet.second(a, b), &normal) + gamma.contract(xa, xb, &normal));
            second_form[(a, b)] = v;
            second_form[(b, a)] = v;
        }
    }
    let mean_curvature = (sigma_inv * second_form).trace();
    Ok(SurfaceGeometry {
        point: jet.point,
        tangents: [x1, x2],
        metric: *g,
        sigma,
        sigma_inv,
        normal,
        second_form,
        mean_curvature,
        area_density: det.sqrt(),
    })
}

/// Gauss curvature from the first fundamental form and its derivatives
/// (Brioschi). Arguments are `E, F, G` with subscripts for partials.
#[allow(clippy::too_many_arguments)]
pub fn brioschi(
    e: f64,
    f: f64,
    g: f64,
    e_u: f64,
    e_v: f64,
    f_u: f64,
    f_v: f64,
    g_u: f64,
    g_v: f64,
    e_vv: f64,
    f_uv: f64,
    g_uu: f64,
) -> f64 {
    let m1 = nalgebra::Matrix3::new(
        -0.5 * e_vv + f_uv - 0.5 * g_uu,
        0.5 * e_u,
        f_u - 0.5 * e_v,
        f_v - 0.5 * g_u,
        e,
        f,
        0.5 * g_v,
        f,
        g,
    );
    let m2 = nalgebra::Matrix3::new(0.0, 0.5 * e_v, 0.5 * g_u, 0.5 * e_v, e, f, 0.5 * g_u, f, g);
    (m1.determinant() - m2.determinant()) / (e * g - f * f).powi(2)
}

pub type ImmersionFn = Arc<dyn Fn(f64, f64) -> Vec3 + Send + Sync>;

/// A surface given by a closure, differentiated numerically.
#[derive(Clone)]
pub struct ParametricSurface {
    pub immersion: ImmersionFn,
    /// Diameter of the parameter domain; sets difference steps.
    pub scale: f64,
    pub side: NormalSide,
}

impl std::fmt::Debug for ParametricSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricSurface")
            .field("scale", &self.scale)
            .field("side", &self.side)
            .finish()
    }
}

/// Relative step of the central first differences.
pub const FIRST_STEP: f64 = 1e-5;
/// Relative step of the fourth-order second differences.
pub const SECOND_STEP: f64 = 1e-3;
/// Relative step used when differencing the first fundamental form.
pub const GAUSS_STEP: f64 = 1e-2;

/// Full FD geometry including the intrinsic Gauss curvature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdGeometry {
    pub geometry: SurfaceGeometry,
    pub gauss_curvature: f64,
}

impl ParametricSurface {
    pub fn new(immersion: impl Fn(f64, f64) -> Vec3 + Send + Sync + 'static, scale: f64, side: NormalSide) -> Self {
        ParametricSurface {
            immersion: Arc::new(immersion),
            scale,
            side,
        }
    }

    pub fn flipped(&self) -> Self {
        ParametricSurface {
            immersion: self.immersion.clone(),
            scale: self.scale,
            side: self.side.flipped(),
        }
    }

    pub fn point(&self, s: Vec2) -> Vec3 {
        (self.immersion)(s[0], s[1])
    }

    fn at(&self, s: Vec2, du: f64, dv: f64) -> Vec3 {
        (self.immersion)(s[0] + du, s[1] + dv)
    }

    /// Central first derivatives with step `FIRST_STEP * scale`.
    pub fn first_derivatives(&self, s: Vec2) -> [Vec3; 2] {
        let h = FIRST_STEP * self.scale;
        [
            (self.at(s, h, 0.0) - self.at(s, -h, 0.0)) / (2.0 * h),
            (self.at(s, 0.0, h) - self.at(s, 0.0, -h)) / (2.0 * h),
        ]
    }

    /// Fourth-order first derivatives with step `SECOND_STEP * scale`.
    fn accurate_first_derivatives(&self, s: Vec2) -> [Vec3; 2] {
        let h = SECOND_STEP * self.scale;
        let d = |du: f64, dv: f64| {
            (self.at(s, -2.0 * du, -2.0 * dv) - 8.0 * self.at(s, -du, -dv) + 8.0 * self.at(s, du, dv)
                - self.at(s, 2.0 * du, 2.0 * dv))
                / (12.0 * h)
        };
        [d(h, 0.0), d(0.0, h)]
    }

    pub fn jet(&self, s: Vec2) -> SurfaceJet {
        let h = SECOND_STEP * self.scale;
        let f0 = self.point(s);
        let pure = |du: f64, dv: f64| {
            (-self.at(s, 2.0 * du, 2.0 * dv) + 16.0 * self.at(s, du, dv) - 30.0 * f0 + 16.0 * self.at(s, -du, -dv)
                - self.at(s, -2.0 * du, -2.0 * dv))
                / (12.0 * h * h)
        };
        let mixed =
            |k: f64| (self.at(s, k, k) - self.at(s, k, -k) - self.at(s, -k, k) + self.at(s, -k, -k)) / (4.0 * k * k);
        let x12 = (4.0 * mixed(h) - mixed(2.0 * h)) / 3.0;
        SurfaceJet {
            point: f0,
            d1: self.first_derivatives(s),
            d2: [pure(h, 0.0), x12, pure(0.0, h)],
        }
    }

    fn sigma_at(&self, metric: &AmbientMetric, s: Vec2) -> Result<(f64, f64, f64)> {
        let [x1, x2] = self.accurate_first_derivatives(s);
        let g = metric.value(&self.point(s))?;
        Ok((norm_sq(&g, &x1), inner(&g, &x1, &x2), norm_sq(&g, &x2)))
    }

    /// Gauss curvature of the pulled-back metric by Brioschi's formula.
    pub fn gauss_curvature(&self, metric: &AmbientMetric, s: Vec2) -> Result<f64> {
        let h = GAUSS_STEP * self.scale;
        let mut grid = [[(0.0, 0.0, 0.0); 5]; 5];
        for (i, row) in grid.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let off = Vec2::new((i as f64 - 2.0) * h, (j as f64 - 2.0) * h);
                // Only the cross and axis stencils are needed.
                if i == 2 || j == 2 || (i as i32 - 2).abs() == (j as i32 - 2).abs() {
                    *v = self.sigma_at(metric, s + off)?;
                }
            }
        }
        let comp = |i: usize, j: usize, c: usize| -> f64 {
            let t = grid[i][j];
            [t.0, t.1, t.2][c]
        };
        let d_u = |c: usize| (comp(0, 2, c) - 8.0 * comp(1, 2, c) + 8.0 * comp(3, 2, c) - comp(4, 2, c)) / (12.0 * h);
        let d_v = |c: usize| (comp(2, 0, c) - 8.0 * comp(2, 1, c) + 8.0 * comp(2, 3, c) - comp(2, 4, c)) / (12.0 * h);
        let d_uu = |c: usize| {
            (-comp(0, 2, c) + 16.0 * comp(1, 2, c) - 30.0 * comp(2, 2, c) + 16.0 * comp(3, 2, c) - comp(4, 2, c))
                / (12.0 * h * h)
        };
        let d_vv = |c: usize| {
            (-comp(2, 0, c) + 16.0 * comp(2, 1, c) - 30.0 * comp(2, 2, c) + 16.0 * comp(2, 3, c) - comp(2, 4, c))
                / (12.0 * h * h)
        };
        let mixed = |k: usize, c: usize| {
            (comp(2 + k, 2 + k, c) - comp(2 + k, 2 - k, c) - comp(2 - k, 2 + k, c) + comp(2 - k, 2 - k, c))
                / (4.0 * (k as f64 * h).powi(2))
        };
        let d_uv = |c: usize| (4.0 * mixed(1, c) - mixed(2, c)) / 3.0;
        let (e, f, g) = grid[2][2];
        Ok(brioschi(
            e,
            f,
            g,
            d_u(0),
            d_v(0),
            d_u(1),
            d_v(1),
            d_u(2),
            d_v(2),
            d_vv(0),
            d_uv(1),
            d_uu(2),
        ))
    }

    pub fn geometry(&self, metric: &AmbientMetric, s: Vec2) -> Result<SurfaceGeometry> {
        geometry_from_jet(metric, &self.jet(s), self.side)
    }

    /// Extrinsic geometry plus Gauss curvature.
    pub fn full_geometry(&self, metric: &AmbientMetric, s: Vec2) -> Result<FdGeometry> {
        Ok(FdGeometry {
            geometry: self.geometry(metric, s)?,
            gauss_curvature: self.gauss_curvature(metric, s)?,
        })
    }
}

/// Analytic jet of the boundary surface `(rho, theta) -> (psi cos, psi sin, top - rho)`;
/// its positive side is the outward normal.
pub fn profile_jet(prof: &ProfileCurve, rho: f64, theta: f64) -> Result<SurfaceJet> {
    let j = prof.radius(rho)?;
    let (c, s) = (theta.cos(), theta.sin());
    Ok(SurfaceJet {
        point: Vec3::new(j.psi * c, j.psi * s, prof.top - rho),
        d1: [
            Vec3::new(j.d1 * c, j.d1 * s, -1.0),
            Vec3::new(-j.psi * s, j.psi * c, 0.0),
        ],
        d2: [
            Vec3::new(j.d2 * c, j.d2 * s, 0.0),
            Vec3::new(-j.d1 * s, j.d1 * c, 0.0),
            Vec3::new(-j.psi * c, -j.psi * s, 0.0),
        ],
    })
}

/// Profile coordinates `(rho, theta)` of a point on the boundary surface,
/// verifying that it actually lies there.
pub fn profile_coordinates(prof: &ProfileCurve, p: &Vec3, tol: f64) -> Result<(f64, f64)> {
    let rho = prof.top - p.z;
    let theta = p.y.atan2(p.x);
    let psi = prof.radius(rho)?.psi;
    let r = (p.x * p.x + p.y * p.y).sqrt();
    if (r - psi).abs() > tol * (1.0 + psi) {
        return Err(crate::error::invalid(format!(
            "point is off the boundary surface by {:.3e}",
            (r - psi).abs()
        )));
    }
    Ok((rho, theta))
}

/// g-unit outward normal of the boundary surface at profile coordinates.
pub fn boundary_normal(metric: &AmbientMetric, prof: &ProfileCurve, rho: f64, theta: f64) -> Result<Vec3> {
    let jet = profile_jet(prof, rho, theta)?;
    let g = metric.value(&jet.point)?;
    let ginv = g
        .try_inverse()
        .ok_or_else(|| LabError::Degenerate("singular metric".into()))?;
    Ok(unit_from_covector(&ginv, &jet.d1[0].cross(&jet.d1[1])))
}

/// Contact angle `gamma` with `cos gamma = <X, N>_g` at a point of the
/// surface lying on the boundary body.
pub fn contact_angle(metric: &AmbientMetric, surface_normal: &Vec3, prof: &ProfileCurve, point: &Vec3) -> Result<f64> {
    let (rho, theta) = profile_coordinates(prof, point, 1e-8)?;
    let x = boundary_normal(metric, prof, rho, theta)?;
    let g = metric.value(point)?;
    let c = inner(&g, &x, surface_normal);
    if !c.is_finite() {
        return Err(LabError::Degenerate("undefined normals".into()));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere(radius: f64) -> ParametricSurface {
        // (polar angle, azimuth); X_1 x X_2 points outward.
        ParametricSurface::new(
            move |u, v| Vec3::new(radius * u.sin() * v.cos(), radius * u.sin() * v.sin(), radius * u.cos()),
            PI,
            NormalSide::Positive,
        )
    }

    #[test]
    fn flat_plane_is_flat() {
        let s = ParametricSurface::new(|u, v| Vec3::new(u, v, 0.3 * u - 0.2 * v), 2.0, NormalSide::Positive);
        let f = s.full_geometry(&AmbientMetric::Euclidean, Vec2::new(0.1, 0.2)).unwrap();
        assert!(f.geometry.mean_curvature.abs() < 1e-9);
        assert!(f.geometry.second_form.abs().max() < 1e-9);
        assert!(f.gauss_curvature.abs() < 1e-8);
    }

    #[test]
    fn round_sphere() {
        let s = sphere(2.0);
        let f = s.full_geometry(&AmbientMetric::Euclidean, Vec2::new(1.1, 0.4)).unwrap();
        assert!((f.geometry.mean_curvature - 1.0).abs() < 1e-8);
        assert!((f.gauss_curvature - 0.25).abs() < 1e-7);
        assert!((f.geometry.second_form_norm_sq() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn flipping_negates_extrinsic_data() {
        let s = sphere(1.0);
        let m = AmbientMetric::Hyperbolic;
        let shifted = ParametricSurface::new(
            move |u, v| (s.immersion)(u, v) + Vec3::new(0.0, 0.0, 3.0),
            PI,
            NormalSide::Positive,
        );
        let p = Vec2::new(0.7, 1.3);
        let a = shifted.full_geometry(&m, p).unwrap();
        let b = shifted.flipped().full_geometry(&m, p).unwrap();
        assert!((a.geometry.mean_curvature + b.geometry.mean_curvature).abs() < 1e-12);
        assert!((a.geometry.second_form + b.geometry.second_form).abs().max() < 1e-12);
        assert_eq!(a.gauss_curvature, b.gauss_curvature);
    }

    #[test]
    fn profile_jet_matches_closed_forms() {
        let prof = ProfileCurve::sphere_cap(1.0, 1.9).unwrap();
        let jet = profile_jet(&prof, 0.6, 0.8).unwrap();
        let geo = geometry_from_jet(&AmbientMetric::Euclidean, &jet, NormalSide::Positive).unwrap();
        let frame = prof.geometry(0.6, 0.8).unwrap();
        assert!((geo.normal - frame.normal).norm() < 1e-14);
        assert!((geo.mean_curvature - frame.mean_curvature).abs() < 1e-13);
        assert!((geo.second_form[(0, 0)] - frame.a_rho).abs() < 1e-13);
        assert!((geo.second_form[(1, 1)] - frame.a_theta).abs() < 1e-13);
    }

    #[test]
    fn disk_meets_cylinder_orthogonally() {
        let prof = ProfileCurve::cylinder(1.5, 2.0).unwrap();
        let theta: f64 = 0.9;
        let p = Vec3::new(1.5 * theta.cos(), 1.5 * theta.sin(), -0.7);
        let gamma = contact_angle(&AmbientMetric::Euclidean, &Vec3::z(), &prof, &p).unwrap();
        assert!((gamma - PI / 2.0).abs() < 1e-15);
    }
}
