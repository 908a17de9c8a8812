//! Rotationally symmetric boundary bodies
//! `M = {(psi(rho) x, top - rho) : |x| <= 1, 0 <= rho <= rho_max}`
//! and the closed-form geometry of their boundary surfaces.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::Vec3;

/// Radius function `psi(rho)` of the body's boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ProfileShape {
    Cylinder {
        radius: f64,
    },
    /// `psi = slope * rho`
    Cone {
        slope: f64,
    },
    /// `psi = r0 + slope * rho`
    Frustum {
        r0: f64,
        slope: f64,
    },
    /// `psi = sum c_i rho^i`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// Sphere of the given radius whose north pole sits at `rho = 0`.
    SphereCap {
        radius: f64,
    },
    /// Boundary is the graph `depth = phi(|x|^2)`, `phi = sum c_i q^i`
    /// with `c_0 = 0` and `c_1 > 0`.
    SphericalGraph {
        phi: Vec<f64>,
    },
    /// Natural cubic spline through `(rho, psi)` samples.
    Spline {
        rho: Vec<f64>,
        psi: Vec<f64>,
    },
}

/// Declared pole type at `rho = 0`; never inferred from derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoleType {
    SlabDisk,
    Conical,
    /// Pole parameter `tau` with `rho = tau^k`.
    Spherical {
        k: u32,
    },
}

/// `psi` with its first two derivatives at one `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusJet {
    pub psi: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurve {
    pub shape: ProfileShape,
    pub pole: PoleType,
    pub rho_max: f64,
    /// Height of the `rho = 0` level.
    pub top: f64,
    pub weakly_convex: bool,
    spline: Option<CubicSpline>,
}

/// Closed-form boundary geometry at `(rho, theta)` with the outward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileFrame {
    pub point: Vec3,
    pub x_rho: Vec3,
    pub x_theta: Vec3,
    pub normal: Vec3,
    pub cos_gamma: f64,
    pub sin_gamma: f64,
    /// `A(x_rho, x_rho)`
    pub a_rho: f64,
    /// `A(x_theta, x_theta)`
    pub a_theta: f64,
    pub mean_curvature: f64,
    /// Second fundamental form on the unit vector along `x_rho` (pointing
    /// away from the pole).
    pub a_eta: f64,
    /// Derivative of `cos gamma` along that unit vector.
    pub d_eta_cos_gamma: f64,
    /// Length element of the level circle per unit `theta`.
    pub line_element: f64,
    /// Area element per unit `rho` and `theta`.
    pub area_element: f64,
}

impl ProfileCurve {
    pub fn new(shape: ProfileShape, pole: PoleType, rho_max: f64) -> Result<Self> {
        let spline = match &shape {
            ProfileShape::Spline { rho, psi } => Some(CubicSpline::natural(rho, psi)?),
            _ => None,
        };
        let prof = ProfileCurve {
            shape,
            pole,
            rho_max,
            top: 0.0,
            weakly_convex: false,
            spline,
        };
        prof.validate()?;
        Ok(prof)
    }

    pub fn cylinder(radius: f64, rho_max: f64) -> Result<Self> {
        Self::new(ProfileShape::Cylinder { radius }, PoleType::SlabDisk, rho_max)
    }

    pub fn cone(slope: f64, rho_max: f64) -> Result<Self> {
        Self::new(ProfileShape::Cone { slope }, PoleType::Conical, rho_max)
    }

    pub fn sphere_cap(radius: f64, rho_max: f64) -> Result<Self> {
        Self::new(
            ProfileShape::SphereCap { radius },
            PoleType::Spherical { k: 2 },
            rho_max,
        )
    }

    pub fn with_top(mut self, top: f64) -> Self {
        self.top = top;
        self
    }

    /// Sets the weak-convexity flag after verifying it on samples.
    pub fn mark_weakly_convex(mut self) -> Result<Self> {
        if !self.check_weak_convexity(400) {
            return Err(invalid("profile is not weakly convex"));
        }
        self.weakly_convex = true;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho_max > 0.0) {
            return Err(invalid("profile domain must have positive length"));
        }
        match &self.shape {
            ProfileShape::Cylinder { radius } if *radius <= 0.0 => {
                return Err(invalid("cylinder radius must be positive"))
            }
            ProfileShape::Cone { slope } if *slope <= 0.0 => return Err(invalid("cone slope must be positive")),
            ProfileShape::SphereCap { radius } if self.rho_max > 2.0 * radius => {
                return Err(invalid("sphere cap domain exceeds the diameter"))
            }
            ProfileShape::SphericalGraph { phi } => {
                if phi.len() < 2 || phi[0] != 0.0 || phi[1] <= 0.0 {
                    return Err(invalid("spherical graph needs phi(0) = 0 and phi'(0) > 0"));
                }
            }
            _ => {}
        }
        let j0 = self.radius_jet_unchecked(0.0);
        match self.pole {
            PoleType::SlabDisk if j0.psi <= 0.0 => return Err(invalid("slab pole requires psi(0) > 0")),
            PoleType::Conical if !(j0.psi.abs() < 1e-14 && j0.d1 > 0.0) => {
                return Err(invalid("conical pole requires psi(0) = 0 and psi'(0) > 0"))
            }
            PoleType::Spherical { k } => {
                if k < 1 {
                    return Err(invalid("spherical exponent must be at least 1"));
                }
                if !matches!(
                    self.shape,
                    ProfileShape::SphereCap { .. } | ProfileShape::SphericalGraph { .. }
                ) {
                    return Err(invalid("spherical pole requires a graph-of-squared-radius shape"));
                }
            }
            _ => {}
        }
        for i in 0..=200 {
            let rho = self.rho_max * i as f64 / 200.0;
            if self.radius_jet_unchecked(rho).psi < 0.0 {
                return Err(invalid("profile radius must be non-negative"));
            }
        }
        Ok(())
    }

    /// Squared radius `q = psi^2` and derivatives for graph-type shapes.
    fn squared_radius(&self, rho: f64) -> Option<(f64, f64, f64)> {
        match &self.shape {
            ProfileShape::SphereCap { radius } => {
                Some((2.0 * radius * rho - rho * rho, 2.0 * radius - 2.0 * rho, -2.0))
            }
            ProfileShape::SphericalGraph { phi } => {
                let q = invert_increasing(|q| poly(phi, q).0, rho, rho / phi[1]);
                let (_, p1, p2) = poly(phi, q);
                let q1 = 1.0 / p1;
                Some((q, q1, -p2 * q1 * q1 * q1))
            }
            _ => None,
        }
    }

    fn radius_jet_unchecked(&self, rho: f64) -> RadiusJet {
        if let Some((q, q1, q2)) = self.squared_radius(rho) {
            if q <= 0.0 {
                return RadiusJet {
                    psi: 0.0,
                    d1: f64::INFINITY,
                    d2: f64::NEG_INFINITY,
                };
            }
            let psi = q.sqrt();
            let d1 = q1 / (2.0 * psi);
            let d2 = q2 / (2.0 * psi) - q1 * q1 / (4.0 * psi * q);
            return RadiusJet { psi, d1, d2 };
        }
        match &self.shape {
            ProfileShape::Cylinder { radius } => RadiusJet {
                psi: *radius,
                d1: 0.0,
                d2: 0.0,
            },
            ProfileShape::Cone { slope } => RadiusJet {
                psi: slope * rho,
                d1: *slope,
                d2: 0.0,
            },
            ProfileShape::Frustum { r0, slope } => RadiusJet {
                psi: r0 + slope * rho,
                d1: *slope,
                d2: 0.0,
            },
            ProfileShape::Polynomial { coeffs } => {
                let (psi, d1, d2) = poly(coeffs, rho);
                RadiusJet { psi, d1, d2 }
            }
            ProfileShape::Spline { .. } => {
                let (psi, d1, d2) = self.spline.as_ref().expect("spline built").eval(rho);
                RadiusJet { psi, d1, d2 }
            }
            ProfileShape::SphereCap { .. } | ProfileShape::SphericalGraph { .. } => unreachable!(),
        }
    }

    /// `psi` and derivatives; `rho` must lie in the closed domain.
    pub fn radius(&self, rho: f64) -> Result<RadiusJet> {
        if !(rho >= -1e-14 && rho <= self.rho_max * (1.0 + 1e-12)) {
            return Err(invalid(format!("rho = {rho} outside [0, {}]", self.rho_max)));
        }
        Ok(self.radius_jet_unchecked(rho.max(0.0)))
    }

    /// Depth below the pole as a function of the squared horizontal radius,
    /// with two derivatives. Only for spherical poles.
    pub fn depth_of_squared_radius(&self, q: f64) -> Result<(f64, f64, f64)> {
        match &self.shape {
            ProfileShape::SphereCap { radius } => {
                let s = radius * radius - q;
                if s <= 0.0 {
                    return Err(invalid("squared radius beyond the sphere"));
                }
                let r = s.sqrt();
                Ok((radius - r, 0.5 / r, 0.25 / (r * s)))
            }
            ProfileShape::SphericalGraph { phi } => Ok(poly(phi, q)),
            _ => Err(invalid("depth graph is only defined for spherical poles")),
        }
    }

    /// `phi'(0)` of a spherical pole's depth graph.
    pub fn graph_slope_at_pole(&self) -> Result<f64> {
        Ok(self.depth_of_squared_radius(0.0)?.1)
    }

    pub fn pole_exponent(&self) -> u32 {
        match self.pole {
            PoleType::Spherical { k } => k,
            _ => 1,
        }
    }

    /// Depth `rho` and derivatives as functions of the pole parameter
    /// `tau`: `rho = tau^k` for spherical poles, `rho = tau` otherwise.
    pub fn pole_depth(&self, tau: f64) -> (f64, f64, f64) {
        let k = self.pole_exponent() as i32;
        match k {
            1 => (tau, 1.0, 0.0),
            _ => (
                tau.powi(k),
                k as f64 * tau.powi(k - 1),
                (k * (k - 1)) as f64 * tau.powi(k - 2),
            ),
        }
    }

    pub fn point(&self, rho: f64, theta: f64) -> Result<Vec3> {
        let j = self.radius(rho)?;
        Ok(Vec3::new(j.psi * theta.cos(), j.psi * theta.sin(), self.top - rho))
    }

    /// Closed-form geometry of the boundary surface at `(rho, theta)`.
    pub fn geometry(&self, rho: f64, theta: f64) -> Result<ProfileFrame> {
        if !(rho > 0.0 || (rho == 0.0 && self.pole == PoleType::SlabDisk)) || rho > self.rho_max {
            return Err(invalid(format!("rho = {rho} is not in the profile interior")));
        }
        let j = self.radius(rho)?;
        let (c, s) = (theta.cos(), theta.sin());
        let w2 = 1.0 + j.d1 * j.d1;
        let w = w2.sqrt();
        let point = Vec3::new(j.psi * c, j.psi * s, self.top - rho);
        let x_rho = Vec3::new(j.d1 * c, j.d1 * s, -1.0);
        let x_theta = Vec3::new(-j.psi * s, j.psi * c, 0.0);
        let normal = Vec3::new(c, s, j.d1) / w;
        let a_rho = -j.d2 / w;
        let a_theta = j.psi / w;
        let mean_curvature = a_rho / w2 + a_theta / (j.psi * j.psi);
        Ok(ProfileFrame {
            point,
            x_rho,
            x_theta,
            normal,
            cos_gamma: j.d1 / w,
            sin_gamma: 1.0 / w,
            a_rho,
            a_theta,
            mean_curvature,
            a_eta: a_rho / w2,
            d_eta_cos_gamma: j.d2 / (w2 * w2),
            line_element: j.psi,
            area_element: j.psi * w,
        })
    }

    /// Curvature of the meridian `(psi, -rho)` toward the axis is
    /// non-negative, i.e. `psi'' <= 0`, at `samples + 1` points.
    pub fn check_weak_convexity(&self, samples: usize) -> bool {
        (0..=samples).all(|i| {
            let rho = self.rho_max * (i as f64 + 0.5) / (samples as f64 + 1.0);
            let j = self.radius_jet_unchecked(rho);
            j.d2 <= 1e-12 * (1.0 + j.d1.abs())
        })
    }
}

/// Value and two derivatives of `sum c_i x^i`.
fn poly(c: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for ci in c.iter().rev() {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + v;
        v = v * x + ci;
    }
    (v, d1, d2)
}

/// Solves `f(q) = target` for an increasing `f` by safeguarded Newton with
/// numerical slope.
fn invert_increasing(f: impl Fn(f64) -> f64, target: f64, guess: f64) -> f64 {
    if target == 0.0 {
        return 0.0;
    }
    let mut q = guess.max(0.0);
    for _ in 0..100 {
        let h = 1e-7 * q.abs().max(1e-12);
        let fq = f(q) - target;
        let slope = (f(q + h) - f(q - h)) / (2.0 * h);
        let step = fq / slope;
        q -= step;
        if step.abs() <= 1e-15 * q.abs().max(1e-300) {
            break;
        }
    }
    q
}

/// Natural cubic spline with two-derivative evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(invalid("spline needs at least three matched samples"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("spline abscissae must increase strictly"));
        }
        // Tridiagonal system for second derivatives, m_0 = m_{n-1} = 0.
        let mut m = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let c = h1 / 6.0;
            let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Ok(CubicSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let i = match self.x.partition_point(|v| *v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_closed_forms() {
        let p = ProfileCurve::cylinder(2.0, 1.0).unwrap();
        let f = p.geometry(0.5, 0.3).unwrap();
        assert_eq!(f.cos_gamma, 0.0);
        assert_eq!(f.a_theta, 2.0);
        assert_eq!(f.a_rho, 0.0);
        assert!((f.mean_curvature - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cone_contact_angle() {
        let a = 1.7;
        let p = ProfileCurve::cone(a, 1.0).unwrap();
        let f = p.geometry(0.4, 1.1).unwrap();
        assert!((f.cos_gamma - a / (1.0 + a * a).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sphere_cap_has_mean_curvature_two_over_radius() {
        let p = ProfileCurve::sphere_cap(1.0, 1.9).unwrap();
        for rho in [0.1, 0.5, 1.0, 1.7] {
            let f = p.geometry(rho, 0.2).unwrap();
            assert!(
                (f.mean_curvature - 2.0).abs() < 1e-12,
                "rho {rho}: {}",
                f.mean_curvature
            );
        }
    }

    #[test]
    fn pole_types_are_checked() {
        assert!(ProfileCurve::new(ProfileShape::Cone { slope: 1.0 }, PoleType::SlabDisk, 1.0).is_err());
        assert!(ProfileCurve::new(ProfileShape::Cylinder { radius: 1.0 }, PoleType::Conical, 1.0).is_err());
        assert!(ProfileCurve::new(
            ProfileShape::Cylinder { radius: 1.0 },
            PoleType::Spherical { k: 2 },
            1.0
        )
        .is_err());
    }

    #[test]
    fn spherical_graph_inverts_depth() {
        let p = ProfileCurve::new(
            ProfileShape::SphericalGraph {
                phi: vec![0.0, 0.5, 0.2],
            },
            PoleType::Spherical { k: 2 },
            0.5,
        )
        .unwrap();
        let rho = 0.3;
        let j = p.radius(rho).unwrap();
        let (d, _, _) = p.depth_of_squared_radius(j.psi * j.psi).unwrap();
        assert!((d - rho).abs() < 1e-13);
        let h = 1e-5;
        let fd = (p.radius(rho + h).unwrap().psi - p.radius(rho - h).unwrap().psi) / (2.0 * h);
        assert!((fd - j.d1).abs() < 1e-8);
        let fd2 = (p.radius(rho + h).unwrap().d1 - p.radius(rho - h).unwrap().d1) / (2.0 * h);
        assert!((fd2 - j.d2).abs() < 1e-6);
    }

    #[test]
    fn spline_reproduces_line_and_convexity_flag() {
        let rho: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let psi: Vec<f64> = rho.iter().map(|r| 1.0 + 0.5 * r).collect();
        let p = ProfileCurve::new(ProfileShape::Spline { rho, psi }, PoleType::SlabDisk, 1.0).unwrap();
        let j = p.radius(0.37).unwrap();
        assert!((j.psi - 1.185).abs() < 1e-12 && (j.d1 - 0.5).abs() < 1e-12);
        assert!(p.mark_weakly_convex().is_ok());
        let bulge = ProfileCurve::new(
            ProfileShape::Polynomial {
                coeffs: vec![1.0, 0.0, 0.5],
            },
            PoleType::SlabDisk,
            1.0,
        )
        .unwrap();
        assert!(bulge.mark_weakly_convex().is_err());
    }
}
