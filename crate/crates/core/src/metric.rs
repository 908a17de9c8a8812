//! Ambient Riemannian metrics on (subsets of) R^3 and their pointwise tensor
//! calculus. All tensors are stored with lower indices; the inverse metric is
//! the only raised object and is produced explicitly.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, LabError, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Euclidean-coordinate inner product `a^T g b`.
#[inline]
pub fn inner(g: &Mat3, a: &Vec3, b: &Vec3) -> f64 {
    a.dot(&(g * b))
}

#[inline]
pub fn norm_sq(g: &Mat3, a: &Vec3) -> f64 {
    inner(g, a, a)
}

/// Checks symmetry (relative 1e-12) and positive definiteness.
pub fn check_spd(m: &Mat3) -> Result<()> {
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() > 1e-12 * scale {
        return Err(invalid("matrix is not symmetric"));
    }
    if m.cholesky().is_none() {
        return Err(invalid("matrix is not positive definite"));
    }
    Ok(())
}

/// Scalar coefficient fields multiplying a constant symmetric tensor in a
/// perturbation. Each kind carries closed-form first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    /// `offset + gradient . x`
    Linear {
        gradient: Vec3,
        offset: f64,
    },
    /// `x^T hessian x / 2`
    Quadratic {
        hessian: Mat3,
    },
    /// `amplitude * exp(-|x - center|^2 / width^2)`
    Gaussian {
        center: Vec3,
        width: f64,
        amplitude: f64,
    },
}

impl ScalarField {
    pub fn value(&self, p: &Vec3) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Linear { gradient, offset } => offset + gradient.dot(p),
            ScalarField::Quadratic { hessian } => 0.5 * p.dot(&(hessian * p)),
            ScalarField::Gaussian {
                center,
                width,
                amplitude,
            } => amplitude * (-(p - center).norm_squared() / (width * width)).exp(),
        }
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        match self {
            ScalarField::Constant(_) => Vec3::zeros(),
            ScalarField::Linear { gradient, .. } => *gradient,
            ScalarField::Quadratic { hessian } => 0.5 * (hessian + hessian.transpose()) * p,
            ScalarField::Gaussian { center, width, .. } => {
                let d = p - center;
                -2.0 / (width * width) * self.value(p) * d
            }
        }
    }

    pub fn hessian(&self, p: &Vec3) -> Mat3 {
        match self {
            ScalarField::Constant(_) | ScalarField::Linear { .. } => Mat3::zeros(),
            ScalarField::Quadratic { hessian } => 0.5 * (hessian + hessian.transpose()),
            ScalarField::Gaussian { center, width, .. } => {
                let d = p - center;
                let w2 = width * width;
                let v = self.value(p);
                v * (4.0 / (w2 * w2) * d * d.transpose() - 2.0 / w2 * Mat3::identity())
            }
        }
    }
}

/// One summand `tensor * field(x)` of a perturbation `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationTerm {
    pub tensor: Mat3,
    pub field: ScalarField,
}

pub type TailFn = Arc<dyn Fn(&Vec3) -> Mat3 + Send + Sync>;

/// `g(x) = base + sum_i tensor_i field_i(x) + tail(x)`.
#[derive(Clone)]
pub struct Perturbation {
    pub base: Mat3,
    pub terms: Vec<PerturbationTerm>,
    /// Optional evaluable remainder; differentiated numerically.
    pub tail: Option<TailFn>,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("base", &self.base)
            .field("terms", &self.terms)
            .field("tail", &self.tail.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

/// Step used for central differences of the numerical tail.
pub const TAIL_FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug)]
pub enum AmbientMetric {
    Euclidean,
    Constant(Mat3),
    Perturbed(Perturbation),
    /// Upper half-space model `(x3)^-2 delta`, sectional curvature -1.
    Hyperbolic,
}

/// Metric value and its first coordinate derivatives, `d[k] = d_k g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricJet {
    pub value: Mat3,
    pub d: [Mat3; 3],
}

/// `gamma[i][j][k] = Gamma_{ij,k} = <nabla_i d_j, d_k>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel(pub [[[f64; 3]; 3]; 3]);

impl Christoffel {
    pub fn zero() -> Self {
        Christoffel([[[0.0; 3]; 3]; 3])
    }

    pub fn from_jet(jet: &MetricJet) -> Self {
        let mut out = [[[0.0; 3]; 3]; 3];
        for (i, oi) in out.iter_mut().enumerate() {
            for (j, oij) in oi.iter_mut().enumerate() {
                for (k, o) in oij.iter_mut().enumerate() {
                    *o = 0.5 * (jet.d[i][(k, j)] + jet.d[j][(i, k)] - jet.d[k][(i, j)]);
                }
            }
        }
        Christoffel(out)
    }

    /// `Gamma(x, y, z) = Gamma_{ij,k} x^i y^j z^k`.
    pub fn contract(&self, x: &Vec3, y: &Vec3, z: &Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    s += self.0[i][j][k] * xy * z[k];
                }
            }
        }
        s
    }

    /// Vector `Gamma^k_{ij} x^i y^j`, the connection correction to `D_x y`.
    pub fn correction(&self, ginv: &Mat3, x: &Vec3, y: &Vec3) -> Vec3 {
        let mut low = Vec3::zeros();
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += self.0[i][j][k] * x[i] * y[j];
                }
            }
            low[k] = s;
        }
        ginv * low
    }
}

/// Riemann tensor `R_{ijkl} = <R(d_i, d_j) d_k, d_l>` with
/// `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`, plus its traces.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub riemann: [[[[f64; 3]; 3]; 3]; 3],
    pub ricci: Mat3,
    pub scalar: f64,
    pub metric: Mat3,
}

impl Curvature {
    /// Sectional curvature `<R(x,y)y, x> / |x ^ y|^2`.
    pub fn sectional(&self, x: &Vec3, y: &Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.riemann[i][j][k][l] * x[i] * y[j] * y[k] * x[l];
                    }
                }
            }
        }
        let g = &self.metric;
        let area2 = norm_sq(g, x) * norm_sq(g, y) - inner(g, x, y).powi(2);
        s / area2
    }

    pub fn ricci_of(&self, v: &Vec3) -> f64 {
        v.dot(&(self.ricci * v))
    }
}

impl AmbientMetric {
    pub fn constant(g0: Mat3) -> Result<Self> {
        check_spd(&g0)?;
        Ok(AmbientMetric::Constant(g0))
    }

    pub fn perturbed(base: Mat3, terms: Vec<PerturbationTerm>) -> Result<Self> {
        check_spd(&base)?;
        for t in &terms {
            if (t.tensor - t.tensor.transpose()).abs().max() > 1e-12 {
                return Err(invalid("perturbation tensor is not symmetric"));
            }
        }
        Ok(AmbientMetric::Perturbed(Perturbation {
            base,
            terms,
            tail: None,
        }))
    }

    pub fn with_tail(self, tail: TailFn) -> Result<Self> {
        match self {
            AmbientMetric::Perturbed(mut p) => {
                p.tail = Some(tail);
                Ok(AmbientMetric::Perturbed(p))
            }
            _ => Err(invalid("only perturbed metrics carry a tail")),
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, AmbientMetric::Hyperbolic)
    }

    pub fn check_domain(&self, p: &Vec3) -> Result<()> {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(LabError::Domain(p.x, p.y, p.z));
        }
        if self.is_hyperbolic() && p.z <= 0.0 {
            return Err(LabError::Domain(p.x, p.y, p.z));
        }
        Ok(())
    }

    fn raw_value(&self, p: &Vec3) -> Mat3 {
        match self {
            AmbientMetric::Euclidean => Mat3::identity(),
            AmbientMetric::Constant(g) => *g,
            AmbientMetric::Hyperbolic => Mat3::identity() / (p.z * p.z),
            AmbientMetric::Perturbed(pert) => {
                let mut g = pert.base;
                for t in &pert.terms {
                    g += t.tensor * t.field.value(p);
                }
                if let Some(tail) = &pert.tail {
                    g += tail(p);
                }
                g
            }
        }
    }

    /// Metric value only.
    pub fn value(&self, p: &Vec3) -> Result<Mat3> {
        self.check_domain(p)?;
        let g = self.raw_value(p);
        if let AmbientMetric::Perturbed(_) = self {
            if g.cholesky().is_none() {
                return Err(invalid(format!(
                    "perturbed metric is not positive definite at ({}, {}, {})",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(g)
    }

    /// Metric value and first derivatives.
    pub fn jet(&self, p: &Vec3) -> Result<MetricJet> {
        let value = self.value(p)?;
        let mut d = [Mat3::zeros(); 3];
        match self {
            AmbientMetric::Euclidean | AmbientMetric::Constant(_) => {}
            AmbientMetric::Hyperbolic => {
                d[2] = Mat3::identity() * (-2.0 / p.z.powi(3));
            }
            AmbientMetric::Perturbed(pert) => {
                for t in &pert.terms {
                    let grad = t.field.gradient(p);
                    for (k, dk) in d.iter_mut().enumerate() {
                        *dk += t.tensor * grad[k];
                    }
                }
                if let Some(tail) = &pert.tail {
                    let h = TAIL_FD_STEP;
                    for (k, dk) in d.iter_mut().enumerate() {
                        let mut e = Vec3::zeros();
                        e[k] = h;
                        *dk += (tail(&(p + e)) - tail(&(p - e))) / (2.0 * h);
                    }
                }
            }
        }
        Ok(MetricJet { value, d })
    }

    /// Second derivatives `dd[k][l] = d_k d_l g`.
    pub fn second_derivatives(&self, p: &Vec3) -> Result<[[Mat3; 3]; 3]> {
        self.check_domain(p)?;
        let mut dd = [[Mat3::zeros(); 3]; 3];
        match self {
            AmbientMetric::Euclidean | AmbientMetric::Constant(_) => {}
            AmbientMetric::Hyperbolic => {
                dd[2][2] = Mat3::identity() * (6.0 / p.z.powi(4));
            }
            AmbientMetric::Perturbed(pert) => {
                for t in &pert.terms {
                    let hess = t.field.hessian(p);
                    for k in 0..3 {
                        for l in 0..3 {
                            dd[k][l] += t.tensor * hess[(k, l)];
                        }
                    }
                }
                if let Some(tail) = &pert.tail {
                    let h = TAIL_FD_STEP;
                    for k in 0..3 {
                        for l in 0..3 {
                            let mut ek = Vec3::zeros();
                            ek[k] = h;
                            let mut el = Vec3::zeros();
                            el[l] = h;
                            let v = (tail(&(p + ek + el)) - tail(&(p + ek - el)) - tail(&(p - ek + el))
                                + tail(&(p - ek - el)))
                                / (4.0 * h * h);
                            dd[k][l] += v;
                        }
                    }
                }
            }
        }
        Ok(dd)
    }

    pub fn christoffel(&self, p: &Vec3) -> Result<Christoffel> {
        Ok(Christoffel::from_jet(&self.jet(p)?))
    }

    pub fn curvature(&self, p: &Vec3) -> Result<Curvature> {
        let jet = self.jet(p)?;
        let dd = self.second_derivatives(p)?;
        Ok(curvature_from_derivatives(&jet, &dd))
    }
}

/// Riemann, Ricci and scalar curvature from a second-order metric jet.
pub fn curvature_from_derivatives(jet: &MetricJet, dd: &[[Mat3; 3]; 3]) -> Curvature {
    let g = jet.value;
    let ginv = g.try_inverse().expect("metric jet must be invertible");
    let gamma = Christoffel::from_jet(jet);
    // Gamma^m_{ij}
    let mut up = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for m in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += ginv[(m, l)] * gamma.0[i][j][l];
                }
                up[i][j][m] = s;
            }
        }
    }
    // d_i Gamma_{jk,l} = (d_i d_j g_lk + d_i d_k g_jl - d_i d_l g_jk) / 2
    let d_gamma = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        0.5 * (dd[i][j][(l, k)] + dd[i][k][(j, l)] - dd[i][l][(j, k)])
    };
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut s = d_gamma(i, j, k, l) - d_gamma(j, i, k, l);
                    for m in 0..3 {
                        s += -up[j][k][m] * gamma.0[i][l][m] + up[i][k][m] * gamma.0[j][l][m];
                    }
                    r[i][j][k][l] = s;
                }
            }
        }
    }
    let mut ricci = Mat3::zeros();
    for j in 0..3 {
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for l in 0..3 {
                    s += ginv[(i, l)] * r[i][j][k][l];
                }
            }
            ricci[(j, k)] = s;
        }
    }
    let scalar = (ginv.component_mul(&ricci)).sum();
    Curvature {
        riemann: r,
        ricci,
        scalar,
        metric: g,
    }
}

/// An affine plane through `base` spanned by two directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub base: Vec3,
    pub span: [Vec3; 2],
}

impl Plane {
    pub fn new(base: Vec3, u: Vec3, v: Vec3) -> Result<Self> {
        if u.cross(&v).norm() <= 1e-12 {
            return Err(invalid("plane spanning directions are dependent"));
        }
        Ok(Plane { base, span: [u, v] })
    }

    /// Plane `{x : normal . x = offset}` with an orthonormal span.
    pub fn from_normal(normal: Vec3, offset: f64) -> Result<Self> {
        let n2 = normal.norm_squared();
        if n2 <= 1e-24 {
            return Err(invalid("zero plane normal"));
        }
        let base = normal * (offset / n2);
        let n = normal / n2.sqrt();
        let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = n.cross(&helper).normalize();
        let v = n.cross(&u);
        Plane::new(base, u, v)
    }

    /// Euclidean unit normal `u x v / |u x v|`.
    pub fn euclidean_normal(&self) -> Vec3 {
        self.span[0].cross(&self.span[1]).normalize()
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (p - self.base).dot(&self.euclidean_normal()).abs() <= tol * (1.0 + p.norm())
    }

    /// g-normal obtained by projecting the Euclidean normal off the plane:
    /// `n - g_P^{ab} <n, t_a> t_b`. Lies on the same side as the Euclidean
    /// normal because the two differ by a tangent vector.
    pub fn projected_normal(&self, g: &Mat3) -> Vec3 {
        let n = self.euclidean_normal();
        let t = &self.span;
        let gp = nalgebra::Matrix2::new(
            inner(g, &t[0], &t[0]),
            inner(g, &t[0], &t[1]),
            inner(g, &t[1], &t[0]),
            inner(g, &t[1], &t[1]),
        );
        let gpi = gp.try_inverse().expect("plane span is independent");
        let c = nalgebra::Vector2::new(inner(g, &n, &t[0]), inner(g, &n, &t[1]));
        let coef = gpi * c;
        n - t[0] * coef[0] - t[1] * coef[1]
    }
}

/// Cosine of the angle between two unit-normalized vectors, also returning
/// `1 - cos` computed as `|a - b|^2 / 2` so that nearly parallel inputs keep
/// full relative precision in the deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleCosine {
    pub cos: f64,
    pub one_minus_cos: f64,
}

pub fn metric_cosine(g: &Mat3, a: &Vec3, b: &Vec3) -> AngleCosine {
    let an = a / norm_sq(g, a).sqrt();
    let bn = b / norm_sq(g, b).sqrt();
    let d = an - bn;
    let omc = 0.5 * norm_sq(g, &d);
    AngleCosine {
        cos: 1.0 - omc,
        one_minus_cos: omc,
    }
}

/// Cosine of the dihedral angle between two planes through `p` under `m`,
/// computed from the projected g-normals of both planes.
pub fn angle_between_planes(m: &AmbientMetric, a: &Plane, b: &Plane, p: &Vec3) -> Result<AngleCosine> {
    for pl in [a, b] {
        if pl.span[0].cross(&pl.span[1]).norm() <= 1e-12 {
            return Err(invalid("degenerate plane"));
        }
        if !pl.contains(p, 1e-9) {
            return Err(invalid("evaluation point is not on both planes"));
        }
    }
    let g = m.value(p)?;
    Ok(metric_cosine(&g, &a.projected_normal(&g), &b.projected_normal(&g)))
}

/// Leading-order g0-cosine between `u` and `v = u - w` for small `w`,
/// `1 - (|w|^2 u.v - (u.w)(v.w)) / (2 (u.v)^2)` with products under `g0`.
pub fn near_parallel_cosine(g0: &Mat3, u: &Vec3, w: &Vec3) -> f64 {
    let v = u - w;
    let uv = inner(g0, u, &v);
    1.0 - (norm_sq(g0, w) * uv - inner(g0, u, w) * inner(g0, &v, w)) / (2.0 * uv * uv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn euclidean_is_identity_with_zero_derivatives() {
        let m = AmbientMetric::Euclidean;
        let jet = m.jet(&Vec3::new(1.0, -2.0, 3.0)).unwrap();
        assert_eq!(jet.value, Mat3::identity());
        assert!(jet.d.iter().all(|d| d.abs().max() == 0.0));
    }

    #[test]
    fn hyperbolic_value_and_domain_guard() {
        let m = AmbientMetric::Hyperbolic;
        let g = m.value(&Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert!((g - Mat3::identity() * 0.25).abs().max() < 1e-15);
        assert!(matches!(m.value(&Vec3::new(0.0, 0.0, 0.0)), Err(LabError::Domain(..))));
        assert!(m.value(&Vec3::new(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn linear_perturbation_value() {
        let m = AmbientMetric::perturbed(
            Mat3::identity(),
            vec![PerturbationTerm {
                tensor: Mat3::identity(),
                field: ScalarField::Linear {
                    gradient: Vec3::x(),
                    offset: 0.0,
                },
            }],
        )
        .unwrap();
        let g = m.value(&Vec3::new(0.3, 0.0, 0.0)).unwrap();
        assert!((g - Mat3::identity() * 1.3).abs().max() < 1e-15);
    }

    #[test]
    fn christoffel_of_linear_conformal_perturbation() {
        let eps = 0.1;
        let m = AmbientMetric::perturbed(
            Mat3::identity(),
            vec![PerturbationTerm {
                tensor: Mat3::identity() * eps,
                field: ScalarField::Linear {
                    gradient: Vec3::x(),
                    offset: 0.0,
                },
            }],
        )
        .unwrap();
        let gam = m.christoffel(&Vec3::new(0.2, 0.4, -0.1)).unwrap();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expect =
                        0.05 * (delta(i, 0) * delta(k, j) + delta(j, 0) * delta(i, k) - delta(k, 0) * delta(i, j));
                    assert_close(gam.0[i][j][k], expect, 1e-15);
                }
            }
        }
    }

    #[test]
    fn hyperbolic_christoffel_and_curvature() {
        let m = AmbientMetric::Hyperbolic;
        let gam = m.christoffel(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_close(gam.0[2][2][2], -1.0, 1e-15);
        let c = m.curvature(&Vec3::new(0.3, -0.7, 1.7)).unwrap();
        assert_close(c.scalar, -6.0, 1e-10);
        let k = c.sectional(&Vec3::new(1.0, 0.2, 0.0), &Vec3::new(0.1, -0.3, 1.0));
        assert_close(k, -1.0, 1e-10);
    }

    #[test]
    fn constant_metric_has_no_connection_or_curvature() {
        let g0 = Mat3::new(2.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0);
        let m = AmbientMetric::constant(g0).unwrap();
        let p = Vec3::new(0.1, 0.2, 0.3);
        assert_eq!(m.christoffel(&p).unwrap(), Christoffel::zero());
        assert_eq!(m.curvature(&p).unwrap().scalar, 0.0);
    }

    #[test]
    fn gaussian_derivatives_match_differences() {
        let f = ScalarField::Gaussian {
            center: Vec3::new(0.1, -0.2, 0.3),
            width: 0.7,
            amplitude: 0.4,
        };
        let p = Vec3::new(0.3, 0.1, -0.2);
        let h = 1e-5;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fd = (f.value(&(p + e)) - f.value(&(p - e))) / (2.0 * h);
            assert_close(f.gradient(&p)[k], fd, 1e-9);
            let fd2 = (f.gradient(&(p + e)) - f.gradient(&(p - e))) / (2.0 * h);
            for l in 0..3 {
                assert_close(f.hessian(&p)[(l, k)], fd2[l], 1e-8);
            }
        }
    }

    #[test]
    fn plane_angles_trivial_cases() {
        let p = Vec3::zeros();
        let a = Plane::new(p, Vec3::x(), Vec3::y()).unwrap();
        let b = Plane::new(p, Vec3::y(), Vec3::z()).unwrap();
        let c = angle_between_planes(&AmbientMetric::Euclidean, &a, &b, &p).unwrap();
        assert_close(c.cos, 0.0, 1e-15);
        let g0 = AmbientMetric::constant(Mat3::new(2.0, 0.3, 0.1, 0.3, 1.0, 0.0, 0.1, 0.0, 3.0)).unwrap();
        let same = angle_between_planes(&g0, &a, &a, &p).unwrap();
        assert_close(same.cos, 1.0, 1e-15);
        assert!(Plane::new(p, Vec3::x(), Vec3::x() * 2.0).is_err());
    }

    #[test]
    fn projected_normal_is_metric_orthogonal() {
        let g = Mat3::new(2.0, 0.3, 0.1, 0.3, 1.0, 0.0, 0.1, 0.0, 3.0);
        let pl = Plane::new(Vec3::zeros(), Vec3::new(1.0, 0.2, 0.3), Vec3::new(-0.1, 1.0, 0.5)).unwrap();
        let n = pl.projected_normal(&g);
        assert_close(inner(&g, &n, &pl.span[0]), 0.0, 1e-14);
        assert_close(inner(&g, &n, &pl.span[1]), 0.0, 1e-14);
        assert!(n.dot(&pl.euclidean_normal()) > 0.0);
    }
}
