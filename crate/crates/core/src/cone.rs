//! Elliptic cones `(a1 rho cos, a2 rho sin, -c rho)`: closed-form geometry,
//! normalization of a circular cone under a constant metric, and the
//! comparison that produces a truncation plane with dihedral certificates.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::metric::{angle_between_planes, check_spd, AmbientMetric, Mat3, Plane, Vec3};
use crate::surface::{NormalSide, ParametricSurface};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub truncation: Option<Plane>,
}

impl ConeSpec {
    pub fn new(a1: f64, a2: f64, c: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && c > 0.0) {
            return Err(invalid("cone slopes must be positive"));
        }
        Ok(ConeSpec {
            a1,
            a2,
            c,
            truncation: None,
        })
    }

    pub fn circular(abar: f64) -> Result<Self> {
        Self::new(abar, abar, 1.0)
    }

    /// Attaches a truncation plane after checking that it cuts every one of
    /// 360 generators at a positive parameter.
    pub fn truncated(mut self, plane: Plane) -> Result<Self> {
        let n = plane.euclidean_normal();
        let level = n.dot(&plane.base);
        for i in 0..360 {
            let d = self.generator(2.0 * PI * i as f64 / 360.0);
            let nd = n.dot(&d);
            if nd == 0.0 || level / nd <= 0.0 {
                return Err(invalid("truncation plane does not cut a bounded component"));
            }
        }
        self.truncation = Some(plane);
        Ok(self)
    }

    /// Direction of the generator at angle `theta`.
    pub fn generator(&self, theta: f64) -> Vec3 {
        Vec3::new(self.a1 * theta.cos(), self.a2 * theta.sin(), -self.c)
    }

    /// Immersion `(rho, theta)` with the outward normal on its positive side.
    pub fn surface(&self) -> ParametricSurface {
        let s = *self;
        ParametricSurface::new(move |rho, theta| s.generator(theta) * rho, 2.0, NormalSide::Positive)
    }
}

/// Mean curvature of the cone with outward normal.
pub fn cone_mean_curvature(spec: &ConeSpec, rho: f64, theta: f64) -> Result<f64> {
    if rho <= 0.0 {
        return Err(LabError::Degenerate("cone apex is singular".into()));
    }
    let (a1, a2, c) = (spec.a1, spec.a2, spec.c);
    let (ct, st) = (theta.cos(), theta.sin());
    let num = a1 * a2 * c * (a1 * a1 * ct * ct + a2 * a2 * st * st + c * c);
    let den = rho * (a1 * a1 * a2 * a2 + c * c * (a2 * a2 * ct * ct + a1 * a1 * st * st)).powf(1.5);
    Ok(num / den)
}

/// Cosine of the angle between the cone and a horizontal plane.
pub fn cone_dihedral_cos(spec: &ConeSpec, theta: f64) -> f64 {
    let (a1, a2, c) = (spec.a1, spec.a2, spec.c);
    let (ct, st) = (theta.cos(), theta.sin());
    a1 * a2 / (a1 * a1 * a2 * a2 + c * c * (a2 * a2 * ct * ct + a1 * a1 * st * st)).sqrt()
}

/// Result of pushing a circular cone through a metric-normalizing map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedCone {
    pub a1: f64,
    pub a2: f64,
    /// Columns are the normal-form axes; the third points up.
    pub frame: Mat3,
    /// Upper-triangular with `g0 = L^T L`.
    pub map: Mat3,
}

impl NormalizedCone {
    /// Normal-form coordinates of the image of `x`.
    pub fn to_frame(&self, x: &Vec3) -> Vec3 {
        self.frame.transpose() * (self.map * x)
    }

    /// `(rho, theta)` on the normal-form cone `(a1 rho cos, a2 rho sin, -rho)`.
    pub fn image_coordinates(&self, x: &Vec3) -> (f64, f64) {
        let y = self.to_frame(x);
        let rho = -y.z;
        let theta = (y.y / (self.a2 * rho)).atan2(y.x / (self.a1 * rho));
        (rho, theta)
    }
}

/// Upper-triangular factor `L` of `g0 = L^T L`.
pub fn upper_cholesky(g0: &Mat3) -> Result<Mat3> {
    check_spd(g0)?;
    let chol = g0
        .cholesky()
        .ok_or_else(|| invalid("metric is not positive definite"))?;
    Ok(chol.l().transpose())
}

pub fn normalize_image_cone(g0: &Mat3, abar: f64) -> Result<NormalizedCone> {
    if abar <= 0.0 {
        return Err(invalid("cone slope must be positive"));
    }
    let l = upper_cholesky(g0)?;
    let linv = l.try_inverse().ok_or_else(|| invalid("singular factor"))?;
    // x^2 + y^2 = abar^2 z^2
    let q0 = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -abar * abar));
    let q = linv.transpose() * q0 * linv;
    let q = (q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(q);
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (neg, p1, p2) = (idx[0], idx[1], idx[2]);
    let (ln, l1, l2) = (eig.eigenvalues[neg], eig.eigenvalues[p1], eig.eigenvalues[p2]);
    if !(ln < 0.0 && l1 > 0.0 && l2 > 0.0) {
        return Err(LabError::Internal(
            "transformed cone quadric lost signature (2,1)".into(),
        ));
    }
    let mut e3: Vec3 = eig.eigenvectors.column(neg).into();
    if e3.dot(&(l * Vec3::new(0.0, 0.0, -1.0))) > 0.0 {
        e3 = -e3;
    }
    let mut e1: Vec3 = eig.eigenvectors.column(p1).into();
    let pivot = e1.iamax();
    if e1[pivot] < 0.0 {
        e1 = -e1;
    }
    let e2 = e3.cross(&e1);
    Ok(NormalizedCone {
        a1: (-ln / l1).sqrt(),
        a2: (-ln / l2).sqrt(),
        frame: Mat3::from_columns(&[e1, e2, e3]),
        map: l,
    })
}

/// `{x : normal . x = offset}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlaneCoefficients {
    pub normal: [f64; 3],
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonStatus {
    Admissible,
    PreconditionFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeComparisonReport {
    pub status: ComparisonStatus,
    pub abar: f64,
    /// Minimum eigenvalue of `g0 - delta` on the cone's tangent planes.
    pub condition_a_margin: f64,
    /// Minimum of `H^{g0} - H^delta` along the rim.
    pub condition_b_margin: f64,
    pub a1: f64,
    pub a2: f64,
    /// `abar - a1, abar - a2, a1 abar - a2^2, a2 abar - a1^2`.
    pub claim_margins: [f64; 4],
    pub plane: Option<PlaneCoefficients>,
    /// `min_theta (angle_{g0}(p) - arctan(1 / abar))`.
    pub dihedral_margin: Option<f64>,
    /// Minimum interior dihedral angle under `g0` over the samples.
    pub min_dihedral_angle: Option<f64>,
    pub strict: bool,
    /// When strict: every sampled dihedral margin was positive.
    pub strict_margins_positive: Option<bool>,
    pub samples: usize,
}

/// Tolerance for treating `g0` as the Euclidean metric.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
const CONDITION_TOLERANCE: f64 = -1e-9;

/// Mean curvature of the circular cone `C_abar` at `p` under `g0`, read
/// off the normalized image cone.
pub fn pushed_mean_curvature(norm: &NormalizedCone, p: &Vec3) -> Result<f64> {
    let (rho, theta) = norm.image_coordinates(p);
    cone_mean_curvature(&ConeSpec::new(norm.a1, norm.a2, 1.0)?, rho, theta)
}

pub fn cone_comparison(g0: &Mat3, abar: f64, samples: usize) -> Result<ConeComparisonReport> {
    if samples < 3 {
        return Err(invalid("need at least three angular samples"));
    }
    let norm = normalize_image_cone(g0, abar)?;
    let base = ConeSpec::circular(abar)?;
    let diff = g0 - Mat3::identity();
    let thetas: Vec<f64> = (0..samples).map(|i| 2.0 * PI * i as f64 / samples as f64).collect();

    let mut cond_a = f64::INFINITY;
    let mut cond_b = f64::INFINITY;
    let h_delta = cone_mean_curvature(&base, 1.0, 0.0)?;
    for &th in &thetas {
        let t1 = base.generator(th).normalize();
        let t2 = Vec3::new(-th.sin(), th.cos(), 0.0);
        let m = nalgebra::Matrix2::new(
            t1.dot(&(diff * t1)),
            t1.dot(&(diff * t2)),
            t2.dot(&(diff * t1)),
            t2.dot(&(diff * t2)),
        );
        let ev = SymmetricEigen::new(m).eigenvalues;
        cond_a = cond_a.min(ev.min());
        let p = base.generator(th);
        cond_b = cond_b.min(pushed_mean_curvature(&norm, &p)? - h_delta);
    }
    let (a1, a2) = (norm.a1, norm.a2);
    let claim_margins = [abar - a1, abar - a2, a1 * abar - a2 * a2, a2 * abar - a1 * a1];
    let strict = (g0 - Mat3::identity()).norm() > IDENTITY_TOLERANCE;
    let mut report = ConeComparisonReport {
        status: ComparisonStatus::PreconditionFailed,
        abar,
        condition_a_margin: cond_a,
        condition_b_margin: cond_b,
        a1,
        a2,
        claim_margins,
        plane: None,
        dihedral_margin: None,
        min_dihedral_angle: None,
        strict,
        strict_margins_positive: None,
        samples,
    };
    if cond_a < CONDITION_TOLERANCE || cond_b < CONDITION_TOLERANCE {
        return Ok(report);
    }
    report.status = ComparisonStatus::Admissible;

    let e3 = norm.frame.column(2).into_owned();
    let normal = norm.map.transpose() * e3;
    let base_plane_outward = -normal;
    let metric = AmbientMetric::constant(*g0)?;
    let target = (1.0 / abar).atan();
    let mut margin = f64::INFINITY;
    let mut min_angle = f64::INFINITY;
    let mut all_positive = true;
    for &th in &thetas {
        let d = base.generator(th);
        let nd = normal.dot(&d);
        if nd >= 0.0 {
            return Err(LabError::Internal("cutting plane misses a generator".into()));
        }
        let p = d * (-1.0 / nd);
        let side = Plane::new(p, d, Vec3::new(-th.sin(), th.cos(), 0.0))?;
        let helper = if base_plane_outward.x.abs() < 0.9 * base_plane_outward.norm() {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let u = base_plane_outward.cross(&helper);
        let v = base_plane_outward.cross(&u);
        let bottom = Plane::new(p, u, v)?;
        let cos = angle_between_planes(&metric, &side, &bottom, &p)?;
        let interior = PI - cos.cos.clamp(-1.0, 1.0).acos();
        let m = interior - target;
        margin = margin.min(m);
        min_angle = min_angle.min(interior);
        if m <= 0.0 {
            all_positive = false;
        }
    }
    report.plane = Some(PlaneCoefficients {
        normal: [normal.x, normal.y, normal.z],
        offset: -1.0,
    });
    report.dihedral_margin = Some(margin);
    report.min_dihedral_angle = Some(min_angle);
    if strict {
        report.strict_margins_positive = Some(all_positive);
    }
    Ok(report)
}

/// Draws SPD metrics near the identity, biased toward vertical stretching,
/// and keeps those passing both comparison conditions.
pub fn sample_admissible_metrics(abar: f64, count: usize, seed: u64, max_tries: usize) -> Result<Vec<Mat3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..max_tries {
        if out.len() == count {
            break;
        }
        let alpha: f64 = rng.gen_range(0.02..0.6);
        let beta: f64 = rng.gen_range(0.0..0.15);
        let r = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let g0 = Mat3::identity() + Mat3::from_diagonal(&Vec3::new(0.0, 0.0, alpha)) + r * r.transpose() * beta;
        let report = cone_comparison(&g0, abar, 72)?;
        if report.status == ComparisonStatus::Admissible {
            out.push(g0);
        }
    }
    if out.len() < count {
        return Err(invalid(format!(
            "only {} admissible metrics found in {max_tries} draws",
            out.len()
        )));
    }
    Ok(out)
}
