//! CMC capillary leaves near the pole of a body, solved by chord Newton
//! continuation in the leaf parameter `t`.
//!
//! A leaf is `X(y) = G(sigma(y), y)` over the unit disk, where `G` is a
//! reference family and `sigma = tau(t) + alpha(t) u(y)` carries the unknown
//! correction `u`. The boundary circle always lands on the body's boundary.
//! The equations are
//!
//! * interior: `(H - F_t) / beta1(t) = lambda`, one unknown constant;
//! * boundary: `(cos gamma_bar - cos gamma) / beta2(t) = 0`;
//! * gauge: `int_D u = 0`.
//!
//! | regime | tau | alpha | beta1 | beta2 |
//! |---|---|---|---|---|
//! | slab | rho0 + t | 1 | 1 | 1 |
//! | conical | t | t^2 | 1 | t |
//! | spherical k | t^k | t^(k+1) | t^(k-1) | t^(2k-1) |
//! | spherical cap (g0) | t | b t^2 / 2 | t | t^3 |

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::capillary::{CapillaryConfig, PrescribedAngle};
use crate::error::{invalid, LabError, Result};
use crate::fit::{loglog_slope, polyfit};
use crate::metric::{inner, norm_sq, Mat3, Vec3};
use crate::polar::PolarGrid;
use crate::profile::{PoleType, ProfileCurve};
use crate::surface::{boundary_normal, geometry_from_jet, NormalSide, SurfaceGeometry, SurfaceJet};

/// Residual target of the leaf solve (scaled units).
pub const LEAF_TOLERANCE: f64 = 1e-10;
/// A leaf counts as solved below this residual even if iteration stalls.
pub const LEAF_ACCEPT: f64 = 1e-8;
/// Deviation of `g(pole)` from the identity below which it counts as `delta`.
pub const POLE_IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum PoleRegime {
    Slab { rho0: f64 },
    Conical,
    Spherical { k: u32 },
}

/// Reference family `G(s, y)` of leaves.
#[derive(Clone, Debug, PartialEq)]
pub enum LeafFamily {
    /// Horizontal sections `(psi(s) y, top - s)`.
    Level,
    /// Caps `z = top + c |x|^2 - s^2`, `c = phi'(0)(b - 1)`, cut by the body.
    Cap { c: f64, b: f64 },
    /// Sections of a cone by the planes `n . (x - apex) = -s`, as
    /// `apex + s (center + frame y)`.
    ConeSection { apex: Vec3, center: Vec3, frame: [Vec3; 2] },
}

/// Value and partials of `G` at one `(s, y)`.
#[derive(Clone, Copy, Debug)]
struct FamilyJet {
    g: Vec3,
    g_s: Vec3,
    g_ss: Vec3,
    g_y: [Vec3; 2],
    g_sy: [Vec3; 2],
    /// `yy, xy`-ordered as `[11, 12, 22]`.
    g_yy: [Vec3; 3],
}

/// Constant data of `g0 = g(pole)` in a frame rotated about the axis so
/// that the horizontal block is diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoleMetric {
    pub g0: [[f64; 3]; 3],
    /// Rotation angle about the axis bringing `g0` to block form.
    pub rotation: f64,
    pub a11: f64,
    pub a22: f64,
    /// `(g0^-1)_33`
    pub a_upper33: f64,
    /// `b_alpha = sqrt(a_alpha_alpha a^33)`
    pub b: [f64; 2],
    pub is_identity: bool,
}

impl PoleMetric {
    pub fn of(g0: &Mat3) -> Result<Self> {
        let block = nalgebra::Matrix2::new(g0[(0, 0)], g0[(0, 1)], g0[(1, 0)], g0[(1, 1)]);
        let rotation = 0.5 * (2.0 * g0[(0, 1)]).atan2(g0[(0, 0)] - g0[(1, 1)]);
        let r = nalgebra::Rotation2::new(rotation).into_inner();
        let d = r.transpose() * block * r;
        if d[(0, 1)].abs() > 1e-12 * block.norm() {
            return Err(LabError::Internal("axis rotation failed to diagonalize g0".into()));
        }
        let inv = g0
            .try_inverse()
            .ok_or_else(|| LabError::Degenerate("singular pole metric".into()))?;
        let a_upper33 = inv[(2, 2)];
        let (a11, a22) = (d[(0, 0)], d[(1, 1)]);
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = g0[(i, j)];
            }
        }
        Ok(PoleMetric {
            g0: rows,
            rotation,
            a11,
            a22,
            a_upper33,
            b: [(a11 * a_upper33).sqrt(), (a22 * a_upper33).sqrt()],
            is_identity: (g0 - Mat3::identity()).norm() <= POLE_IDENTITY_TOLERANCE,
        })
    }

    /// `a11 = a22 = 1`, the symmetric case admitting the cap foliation.
    pub fn horizontally_isometric(&self) -> bool {
        (self.a11 - 1.0).abs() < 1e-9 && (self.a22 - 1.0).abs() < 1e-9
    }
}

/// Regime scalings at one `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scaling {
    pub tau: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// `F_t`
    pub offset: f64,
}

#[derive(Clone, Debug)]
pub struct FoliationProblem {
    pub config: CapillaryConfig,
    pub regime: PoleRegime,
    pub family: LeafFamily,
    pub pole_metric: PoleMetric,
    /// `f_0, ..., f_{k-2}` of `F_t`; empty outside the spherical regime.
    pub offset_coefficients: Vec<f64>,
    grid: Arc<PolarGrid>,
}

/// Geometry of one leaf at the collocation nodes.
#[derive(Clone, Debug)]
pub struct LeafGeometry {
    pub points: Vec<Vec3>,
    pub geometry: Vec<SurfaceGeometry>,
    /// `(rho, theta)` of each boundary node on the body's boundary.
    pub boundary_coordinates: Vec<(f64, f64)>,
    pub one_minus_cos_gamma: Vec<f64>,
    pub one_minus_cos_gamma_bar: Vec<f64>,
    /// `|X_theta|_g` at the boundary nodes.
    pub line_element: Vec<f64>,
}

impl LeafGeometry {
    pub fn mean_curvature(&self) -> DVector<f64> {
        DVector::from_iterator(self.geometry.len(), self.geometry.iter().map(|g| g.mean_curvature))
    }

    pub fn area_density(&self) -> DVector<f64> {
        DVector::from_iterator(self.geometry.len(), self.geometry.iter().map(|g| g.area_density))
    }

    pub fn cos_gamma(&self, k: usize) -> f64 {
        1.0 - self.one_minus_cos_gamma[k]
    }

    pub fn cos_gamma_bar(&self, k: usize) -> f64 {
        1.0 - self.one_minus_cos_gamma_bar[k]
    }

    /// `cos gamma_bar - cos gamma` without cancellation.
    pub fn angle_defect(&self, k: usize) -> f64 {
        self.one_minus_cos_gamma[k] - self.one_minus_cos_gamma_bar[k]
    }

    pub fn sin_gamma(&self, k: usize) -> f64 {
        let v = self.one_minus_cos_gamma[k];
        (v * (2.0 - v)).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafSolution {
    pub t: f64,
    pub u: Vec<f64>,
    /// Scaled constant mean curvature `(H - F_t) / beta1`.
    pub lambda: f64,
    pub mean_curvature: f64,
    pub interior_residual: f64,
    pub angle_residual: f64,
    pub iterations: usize,
    pub jacobian_builds: usize,
    pub history: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Rebuild the Jacobian at the current iterate when the chord step stalls.
    pub full_jacobian_fallback: bool,
    /// Smallest continuation step before giving up.
    pub min_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: LEAF_TOLERANCE,
            max_iterations: 60,
            full_jacobian_fallback: true,
            min_step: 1e-4,
        }
    }
}

/// Boundary `1 - cos(gamma_bar)` of the prescribed angle at depth `rho`.
pub fn one_minus_cos_gamma_bar(cfg: &CapillaryConfig, rho: f64) -> Result<f64> {
    match cfg.angle {
        PrescribedAngle::Constant { gamma } => Ok(2.0 * (0.5 * gamma).sin().powi(2)),
        PrescribedAngle::Model => {
            let d1 = cfg.body.radius(rho)?.d1;
            if d1.is_infinite() {
                return Ok(0.0);
            }
            let w = (1.0 + d1 * d1).sqrt();
            Ok(if d1 >= 0.0 { 1.0 / (w * (w + d1)) } else { (w - d1) / w })
        }
    }
}

/// `R(s)` with two derivatives, solving `c R^2 + phi(R^2) = s^2`.
fn cap_radius(body: &ProfileCurve, c: f64, s: f64) -> Result<(f64, f64, f64)> {
    let slope = body.graph_slope_at_pole()?;
    if c + slope <= 0.0 {
        return Err(invalid("cap opens faster than the boundary"));
    }
    let mut r = s / (c + slope).sqrt();
    let f = |r: f64| -> Result<(f64, f64, f64)> {
        let (p, p1, p2) = body.depth_of_squared_radius(r * r)?;
        Ok((
            c * r * r + p - s * s,
            2.0 * c * r + 2.0 * r * p1,
            2.0 * c + 2.0 * p1 + 4.0 * r * r * p2,
        ))
    };
    for _ in 0..60 {
        let (v, d, _) = f(r)?;
        let step = v / d;
        r -= step;
        if step.abs() <= 1e-16 * r.abs() {
            break;
        }
    }
    let (_, d, dd) = f(r)?;
    let r1 = 2.0 * s / d;
    let r2 = (2.0 - dd * r1 * r1) / d;
    Ok((r, r1, r2))
}

impl LeafFamily {
    fn jet(&self, body: &ProfileCurve, s: f64, y: [f64; 2]) -> Result<FamilyJet> {
        let e = [Vec3::x(), Vec3::y()];
        match self {
            LeafFamily::Level => {
                let j = body.radius(s)?;
                let yv = Vec3::new(y[0], y[1], 0.0);
                Ok(FamilyJet {
                    g: Vec3::new(j.psi * y[0], j.psi * y[1], body.top - s),
                    g_s: Vec3::new(j.d1 * y[0], j.d1 * y[1], -1.0),
                    g_ss: yv * j.d2,
                    g_y: [e[0] * j.psi, e[1] * j.psi],
                    g_sy: [e[0] * j.d1, e[1] * j.d1],
                    g_yy: [Vec3::zeros(); 3],
                })
            }
            LeafFamily::Cap { c, .. } => {
                let (r, r1, r2) = cap_radius(body, *c, s)?;
                let q = y[0] * y[0] + y[1] * y[1];
                let z = body.top + c * r * r * q - s * s;
                Ok(FamilyJet {
                    g: Vec3::new(r * y[0], r * y[1], z),
                    g_s: Vec3::new(r1 * y[0], r1 * y[1], 2.0 * c * r * r1 * q - 2.0 * s),
                    g_ss: Vec3::new(r2 * y[0], r2 * y[1], 2.0 * c * (r1 * r1 + r * r2) * q - 2.0),
                    g_y: [
                        Vec3::new(r, 0.0, 2.0 * c * r * r * y[0]),
                        Vec3::new(0.0, r, 2.0 * c * r * r * y[1]),
                    ],
                    g_sy: [
                        Vec3::new(r1, 0.0, 4.0 * c * r * r1 * y[0]),
                        Vec3::new(0.0, r1, 4.0 * c * r * r1 * y[1]),
                    ],
                    g_yy: [
                        Vec3::new(0.0, 0.0, 2.0 * c * r * r),
                        Vec3::zeros(),
                        Vec3::new(0.0, 0.0, 2.0 * c * r * r),
                    ],
                })
            }
            LeafFamily::ConeSection { apex, center, frame } => {
                let q = center + frame[0] * y[0] + frame[1] * y[1];
                Ok(FamilyJet {
                    g: apex + q * s,
                    g_s: q,
                    g_ss: Vec3::zeros(),
                    g_y: [frame[0] * s, frame[1] * s],
                    g_sy: [frame[0], frame[1]],
                    g_yy: [Vec3::zeros(); 3],
                })
            }
        }
    }
}

/// Node-local inputs: `sigma` and its Cartesian derivatives
/// `x, y, xx, xy, yy`.
pub(crate) type Local = [f64; 6];

fn leaf_jet(f: &FamilyJet, l: &Local) -> SurfaceJet {
    let [_, sx, sy, sxx, sxy, syy] = *l;
    let ds = [sx, sy];
    let d1 = [f.g_s * sx + f.g_y[0], f.g_s * sy + f.g_y[1]];
    let second = |a: usize, b: usize, sab: f64, yy: Vec3| {
        f.g_ss * (ds[a] * ds[b]) + f.g_s * sab + f.g_sy[b] * ds[a] + f.g_sy[a] * ds[b] + yy
    };
    SurfaceJet {
        point: f.g,
        d1,
        d2: [
            second(0, 0, sxx, f.g_yy[0]),
            second(0, 1, sxy, f.g_yy[1]),
            second(1, 1, syy, f.g_yy[2]),
        ],
    }
}

/// Boundary data at a leaf point lying on the body's boundary.
pub(crate) struct BoundaryPoint {
    pub rho: f64,
    pub theta: f64,
    pub one_minus_cos: f64,
    pub one_minus_cos_bar: f64,
}

pub(crate) fn boundary_point(cfg: &CapillaryConfig, point: &Vec3, normal: &Vec3) -> Result<BoundaryPoint> {
    let rho = cfg.body.top - point.z;
    let theta = point.y.atan2(point.x);
    let xbar = boundary_normal(&cfg.ambient, &cfg.body, rho, theta)?;
    let g = cfg.ambient.value(point)?;
    let diff = xbar - normal;
    Ok(BoundaryPoint {
        rho,
        theta,
        one_minus_cos: 0.5 * norm_sq(&g, &diff),
        one_minus_cos_bar: one_minus_cos_gamma_bar(cfg, rho)?,
    })
}

/// Node-local inputs `sigma = tau + alpha u` with derivatives.
pub(crate) fn locals(grid: &PolarGrid, tau: f64, alpha: f64, u: &DVector<f64>) -> Vec<Local> {
    let ops = grid.operators();
    let d = [&ops.dx * u, &ops.dy * u, &ops.dxx * u, &ops.dxy * u, &ops.dyy * u];
    (0..grid.len())
        .map(|i| {
            [
                tau + alpha * u[i],
                alpha * d[0][i],
                alpha * d[1][i],
                alpha * d[2][i],
                alpha * d[3][i],
                alpha * d[4][i],
            ]
        })
        .collect()
}

pub(crate) fn node_geometry(
    cfg: &CapillaryConfig,
    family: &LeafFamily,
    grid: &PolarGrid,
    i: usize,
    l: &Local,
) -> Result<(SurfaceGeometry, Option<BoundaryPoint>)> {
    let (x, y) = grid.cartesian(i);
    let fam = family.jet(&cfg.body, l[0], [x, y])?;
    let jet = leaf_jet(&fam, l);
    let geo = geometry_from_jet(&cfg.ambient, &jet, NormalSide::Positive)?;
    let bp = if grid.is_boundary(i) {
        Some(boundary_point(cfg, &geo.point, &geo.normal)?)
    } else {
        None
    };
    Ok((geo, bp))
}

impl FoliationProblem {
    /// Regime from the declared pole type; spherical poles with
    /// `g(pole) != delta` use the cap family.
    pub fn new(config: CapillaryConfig, n_cheb: usize, n_theta: usize) -> Result<Self> {
        let regime = match config.body.pole {
            PoleType::SlabDisk => return Err(invalid("slab poles need a base depth; use FoliationProblem::slab")),
            PoleType::Conical => PoleRegime::Conical,
            PoleType::Spherical { k } => PoleRegime::Spherical { k },
        };
        Self::build(config, regime, n_cheb, n_theta)
    }

    pub fn slab(config: CapillaryConfig, rho0: f64, n_cheb: usize, n_theta: usize) -> Result<Self> {
        if config.body.pole != PoleType::SlabDisk {
            return Err(invalid("slab foliation needs a slab pole"));
        }
        if !(rho0 > 0.0 && rho0 < config.body.rho_max) {
            return Err(invalid("base depth must lie inside the body"));
        }
        Self::build(config, PoleRegime::Slab { rho0 }, n_cheb, n_theta)
    }

    fn build(config: CapillaryConfig, regime: PoleRegime, n_cheb: usize, n_theta: usize) -> Result<Self> {
        let pole = Vec3::new(0.0, 0.0, config.body.top);
        let pole_metric = PoleMetric::of(&config.ambient.value(&pole)?)?;
        let family = match regime {
            PoleRegime::Slab { .. } => LeafFamily::Level,
            PoleRegime::Conical => {
                if !pole_metric.is_identity {
                    return Err(LabError::Precondition(
                        "g(apex) differs from delta: no level foliation, use the conical barrier".into(),
                    ));
                }
                LeafFamily::Level
            }
            PoleRegime::Spherical { k } => {
                if pole_metric.is_identity {
                    LeafFamily::Level
                } else if k == 2 && pole_metric.horizontally_isometric() {
                    let slope = config.body.graph_slope_at_pole()?;
                    let b = pole_metric.b[0];
                    LeafFamily::Cap {
                        c: slope * (b - 1.0),
                        b,
                    }
                } else {
                    return Err(LabError::Precondition(
                        "pole metric is not horizontally isometric: use the spherical barrier".into(),
                    ));
                }
            }
        };
        let mut prob = FoliationProblem {
            config,
            regime,
            family,
            pole_metric,
            offset_coefficients: Vec::new(),
            grid: Arc::new(PolarGrid::new(n_cheb, n_theta)?),
        };
        if let PoleRegime::Spherical { k } = regime {
            prob.offset_coefficients = prob.fit_offset(k)?;
        }
        Ok(prob)
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    /// `H_dM(O) - Hbar_dM(O)` plus, for `k > 2`, a least-squares fit of the
    /// disk mean of `H_{t,dM} - Hbar_{t,dM}` against powers of `t`.
    fn fit_offset(&self, k: u32) -> Result<Vec<f64>> {
        let f0 = match self.family {
            LeafFamily::Cap { .. } => crate::barrier::spherical_h0(&self.config)?,
            _ => crate::barrier::pole_mean_curvature_gap(&self.config)?,
        };
        if k <= 2 {
            return Ok(vec![f0]);
        }
        let ts: Vec<f64> = (0..8).map(|j| 0.02 * (j + 1) as f64).collect();
        let mut ys = Vec::with_capacity(ts.len());
        for &t in &ts {
            let (hg, hd) = crate::asymptotics::boundary_mean_curvatures(&self.config, t, k, &self.grid)?;
            let mean = self.grid.integrate(&(hg - hd)) / self.grid.weights().sum();
            ys.push(mean - f0);
        }
        let mut coeffs = vec![f0];
        let fit = polyfit(&ts, &ys, (k - 2) as usize)?;
        coeffs.extend(fit.into_iter().skip(1));
        Ok(coeffs)
    }

    pub fn scaling(&self, t: f64) -> Scaling {
        let offset = self.offset_coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c);
        match (self.regime, &self.family) {
            (PoleRegime::Slab { rho0 }, _) => Scaling {
                tau: rho0 + t,
                alpha: 1.0,
                beta1: 1.0,
                beta2: 1.0,
                offset: 0.0,
            },
            (PoleRegime::Conical, _) => Scaling {
                tau: t,
                alpha: t * t,
                beta1: 1.0,
                beta2: t,
                offset: 0.0,
            },
            (PoleRegime::Spherical { .. }, LeafFamily::Cap { b, .. }) => Scaling {
                tau: t,
                alpha: 0.5 * b * t * t,
                beta1: t,
                beta2: t.powi(3),
                offset,
            },
            (PoleRegime::Spherical { k }, _) => {
                let k = k as i32;
                Scaling {
                    tau: t.powi(k),
                    alpha: t.powi(k + 1),
                    beta1: t.powi(k - 1),
                    beta2: t.powi(2 * k - 1),
                    offset,
                }
            }
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let ok = match self.regime {
            PoleRegime::Slab { rho0 } => rho0 + t > 0.0 && rho0 + t < self.config.body.rho_max,
            _ => t > 0.0,
        };
        if !ok || !t.is_finite() {
            return Err(invalid(format!("leaf parameter t = {t} is outside the foliated range")));
        }
        Ok(())
    }

    fn locals(&self, t: f64, u: &DVector<f64>) -> Vec<Local> {
        let sc = self.scaling(t);
        locals(&self.grid, sc.tau, sc.alpha, u)
    }

    fn node_geometry(&self, i: usize, l: &Local) -> Result<(SurfaceGeometry, Option<BoundaryPoint>)> {
        node_geometry(&self.config, &self.family, &self.grid, i, l)
    }

    /// Scaled residual at node `i` from its local inputs.
    fn local_residual(&self, t: f64, i: usize, l: &Local, lambda: f64) -> Result<f64> {
        let sc = self.scaling(t);
        let (geo, bp) = self.node_geometry(i, l)?;
        Ok(match bp {
            Some(b) => (b.one_minus_cos - b.one_minus_cos_bar) / sc.beta2,
            None => (geo.mean_curvature - sc.offset) / sc.beta1 - lambda,
        })
    }

    /// Leaf geometry for the correction `u`; rejects leaves leaving the body.
    pub fn leaf(&self, t: f64, u: &DVector<f64>) -> Result<LeafGeometry> {
        self.check_t(t)?;
        if u.len() != self.grid.len() {
            return Err(invalid("correction has the wrong length"));
        }
        let locals = self.locals(t, u);
        let nt = self.grid.n_theta();
        let mut out = LeafGeometry {
            points: Vec::with_capacity(locals.len()),
            geometry: Vec::with_capacity(locals.len()),
            boundary_coordinates: Vec::with_capacity(nt),
            one_minus_cos_gamma: Vec::with_capacity(nt),
            one_minus_cos_gamma_bar: Vec::with_capacity(nt),
            line_element: Vec::with_capacity(nt),
        };
        for (i, l) in locals.iter().enumerate() {
            let (geo, bp) = self.node_geometry(i, l)?;
            if let Some(b) = bp {
                let (x, y) = self.grid.cartesian(i);
                let xt = geo.tangents[1] * x - geo.tangents[0] * y;
                let g = self.config.ambient.value(&geo.point)?;
                out.line_element.push(norm_sq(&g, &xt).sqrt());
                out.boundary_coordinates.push((b.rho, b.theta));
                out.one_minus_cos_gamma.push(b.one_minus_cos);
                out.one_minus_cos_gamma_bar.push(b.one_minus_cos_bar);
            } else {
                let p = &geo.point;
                if p.z <= self.config.body.top - self.config.body.rho_max || p.z >= self.config.body.top {
                    return Err(LabError::Precondition(format!("leaf escapes the body at node {i}")));
                }
            }
            out.points.push(geo.point);
            out.geometry.push(geo);
        }
        Ok(out)
    }

    /// `Phi(t, u)`: interior `(H - F_t)/beta1` minus its weighted mean over
    /// the interior nodes, and boundary `(cos gamma - cos gamma_bar)/beta2`.
    /// At `t = 0` outside the slab regime the value is the Richardson limit
    /// from `t = h, 2h, 4h`.
    pub fn phi_map(&self, t: f64, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if t == 0.0 && !matches!(self.regime, PoleRegime::Slab { .. }) {
            let h = 1e-3;
            let a = self.phi_map(h, u)?;
            let b = self.phi_map(2.0 * h, u)?;
            let c = self.phi_map(4.0 * h, u)?;
            let ex = |x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>| (x * 8.0 - y * 6.0 + z) / 3.0;
            return Ok((ex(&a.0, &b.0, &c.0), ex(&a.1, &b.1, &c.1)));
        }
        let sc = self.scaling(t);
        let leaf = self.leaf(t, u)?;
        let nt = self.grid.n_theta();
        let h = leaf.mean_curvature();
        let w = self.grid.weights();
        let (mut num, mut den) = (0.0, 0.0);
        for i in nt..self.grid.len() {
            num += w[i] * (h[i] - sc.offset) / sc.beta1;
            den += w[i];
        }
        let mean = num / den;
        let interior = DVector::from_fn(self.grid.len() - nt, |i, _| (h[i + nt] - sc.offset) / sc.beta1 - mean);
        let boundary = DVector::from_fn(nt, |k, _| -leaf.angle_defect(k) / sc.beta2);
        Ok((interior, boundary))
    }

    /// Residual of the square system in `z = (u, lambda)`.
    pub fn residual(&self, t: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.grid.len();
        let u = z.rows(0, n).into_owned();
        let lambda = z[n];
        let locals = self.locals(t, &u);
        let mut r = DVector::zeros(n + 1);
        for (i, l) in locals.iter().enumerate() {
            r[i] = self.local_residual(t, i, l, lambda)?;
        }
        r[n] = self.grid.weights().dot(&u);
        Ok(r)
    }

    /// Jacobian in `(u, lambda)` of the square system, by the chain rule
    /// through the collocation matrices with node-local central differences.
    pub fn linearization(&self, t: f64, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.grid.len();
        let sc = self.scaling(t);
        let u = z.rows(0, n).into_owned();
        let lambda = z[n];
        let locals = self.locals(t, &u);
        let mut partials = vec![[0.0; 6]; n];
        for (i, l) in locals.iter().enumerate() {
            for k in 0..6 {
                let h = 1e-6 * (l[k].abs() + sc.alpha);
                let mut lp = *l;
                let mut lm = *l;
                lp[k] += h;
                lm[k] -= h;
                partials[i][k] =
                    (self.local_residual(t, i, &lp, lambda)? - self.local_residual(t, i, &lm, lambda)?) / (2.0 * h);
            }
        }
        let ops = self.grid.operators();
        let mats = [&ops.dx, &ops.dy, &ops.dxx, &ops.dxy, &ops.dyy];
        let mut j = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            j[(i, i)] += sc.alpha * partials[i][0];
            for (k, m) in mats.iter().enumerate() {
                let p = sc.alpha * partials[i][k + 1];
                for c in 0..n {
                    j[(i, c)] += p * m[(i, c)];
                }
            }
            if !self.grid.is_boundary(i) {
                j[(i, n)] = -1.0;
            }
        }
        for c in 0..n {
            j[(n, c)] = self.grid.weights()[c];
        }
        Ok(j)
    }

    /// Chord iteration at fixed `t` from `start`; the Jacobian is frozen
    /// unless the step stalls.
    fn chord(
        &self,
        t: f64,
        start: &DVector<f64>,
        frozen: &mut Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
        opts: &SolveOptions,
    ) -> Result<(DVector<f64>, Vec<f64>, usize)> {
        let mut z = start.clone();
        let mut r = self.residual(t, &z)?;
        let mut history = vec![r.amax()];
        let mut builds = 0;
        let mut stalls = 0;
        if frozen.is_none() {
            *frozen = Some(self.linearization(t, &z)?.lu());
            builds += 1;
        }
        for _ in 0..opts.max_iterations {
            if r.amax() < opts.tolerance {
                break;
            }
            let lu = frozen.as_ref().expect("jacobian present");
            let step = lu
                .solve(&r)
                .ok_or_else(|| LabError::Degenerate("leaf Jacobian is singular".into()))?;
            let trial = &z - step;
            let next = self.residual(t, &trial);
            let improved = matches!(&next, Ok(rn) if rn.amax() < 0.5 * r.amax());
            if improved {
                z = trial;
                r = next?;
                history.push(r.amax());
                stalls = 0;
                continue;
            }
            // Accept a non-contracting step only while it still decreases.
            if let Ok(rn) = &next {
                if rn.amax() < r.amax() {
                    z = trial;
                    r = rn.clone();
                    history.push(r.amax());
                }
            }
            stalls += 1;
            if r.amax() < LEAF_ACCEPT && stalls >= 3 {
                break;
            }
            if !opts.full_jacobian_fallback || stalls > 4 {
                break;
            }
            *frozen = Some(self.linearization(t, &z)?.lu());
            builds += 1;
        }
        let last = r.amax();
        if !(last < LEAF_ACCEPT) {
            return Err(LabError::NoConvergence {
                iterations: history.len() - 1,
                residual: last,
                history,
            });
        }
        Ok((z, history, builds))
    }

    fn pack(&self, t: f64, z: &DVector<f64>, history: Vec<f64>, builds: usize) -> Result<LeafSolution> {
        let n = self.grid.len();
        let u = z.rows(0, n).into_owned();
        let (interior, boundary) = self.phi_map(t, &u)?;
        let sc = self.scaling(t);
        Ok(LeafSolution {
            t,
            u: u.iter().copied().collect(),
            lambda: z[n],
            mean_curvature: sc.offset + sc.beta1 * z[n],
            interior_residual: interior.amax(),
            angle_residual: boundary.amax(),
            iterations: history.len() - 1,
            jacobian_builds: builds,
            history,
        })
    }

    /// Solves one leaf, starting from `guess = (u, lambda)` or zero.
    pub fn solve_leaf_from(&self, t: f64, guess: Option<&LeafSolution>, opts: &SolveOptions) -> Result<LeafSolution> {
        self.check_t(t)?;
        let n = self.grid.len();
        let start = match guess {
            Some(g) => {
                let mut z = DVector::zeros(n + 1);
                z.rows_mut(0, n).copy_from_slice(&g.u);
                z[n] = g.lambda;
                z
            }
            None => DVector::zeros(n + 1),
        };
        let mut frozen = None;
        let (z, history, builds) = self.chord(t, &start, &mut frozen, opts)?;
        self.pack(t, &z, history, builds)
    }

    pub fn solve_leaf(&self, t: f64) -> Result<LeafSolution> {
        self.solve_leaf_from(t, None, &SolveOptions::default())
    }

    /// Continuation through `ts` in the given order, reusing each frozen
    /// Jacobian for the next parameter and halving the step on failure.
    pub fn solve_family(&self, ts: &[f64], opts: &SolveOptions) -> Result<Vec<LeafSolution>> {
        let n = self.grid.len();
        let mut out: Vec<LeafSolution> = Vec::with_capacity(ts.len());
        let mut frozen = None;
        let mut current: Option<(f64, DVector<f64>)> = None;
        for &target in ts {
            self.check_t(target)?;
            let mut builds = 0;
            loop {
                let (from_t, start) = match &current {
                    Some((tp, z)) => (*tp, z.clone()),
                    None => (target, DVector::zeros(n + 1)),
                };
                let mut step_target = target;
                let solved = loop {
                    match self.chord(step_target, &start, &mut frozen, opts) {
                        Ok((z, hist, b)) => break Some((step_target, z, hist, b)),
                        Err(e) => {
                            frozen = None;
                            let step = step_target - from_t;
                            if step.abs() * 0.5 < opts.min_step {
                                return Err(e);
                            }
                            step_target = from_t + 0.5 * step;
                        }
                    }
                };
                let (ts_done, z, hist, b) = solved.expect("loop breaks with a solution");
                builds += b;
                current = Some((ts_done, z.clone()));
                if ts_done == target {
                    out.push(self.pack(target, &z, hist, builds)?);
                    break;
                }
            }
        }
        Ok(out)
    }

    /// `Psi(t) = (int 1/v)^-1 int_bdry cot(gamma_bar)`, with the lapse
    /// `v = -<d_t X, N>` differenced between leaves at `t (1 -+ 1e-3)`.
    pub fn psi_coefficient(&self, leaf: &LeafSolution, opts: &SolveOptions) -> Result<f64> {
        let t = leaf.t;
        let dt = match self.regime {
            PoleRegime::Slab { .. } => 1e-3,
            _ => 1e-3 * t,
        };
        let lo = self.solve_leaf_from(t - dt, Some(leaf), opts)?;
        let hi = self.solve_leaf_from(t + dt, Some(leaf), opts)?;
        let u = |s: &LeafSolution| DVector::from_column_slice(&s.u);
        let g_lo = self.leaf(t - dt, &u(&lo))?;
        let g_hi = self.leaf(t + dt, &u(&hi))?;
        let g_mid = self.leaf(t, &u(leaf))?;
        let w = self.grid.weights();
        let mut inv_lapse = 0.0;
        for i in 0..self.grid.len() {
            let geo = &g_mid.geometry[i];
            let y = (g_hi.points[i] - g_lo.points[i]) / (2.0 * dt);
            let v = -inner(&geo.metric, &y, &geo.normal);
            if !(v > 0.0) {
                return Err(LabError::Degenerate(format!(
                    "lapse vanishes at node {i} (v = {v:.3e})"
                )));
            }
            inv_lapse += w[i] * geo.area_density / v;
        }
        let dtheta = self.grid.boundary_weight();
        let cot: f64 = (0..self.grid.n_theta())
            .map(|k| {
                let c = g_mid.cos_gamma_bar(k);
                let v = g_mid.one_minus_cos_gamma_bar[k];
                let s = (v * (2.0 - v)).sqrt();
                c / s * g_mid.line_element[k] * dtheta
            })
            .sum();
        Ok(cot / inv_lapse)
    }

    /// Residual of `lambda |D_t| = int H_t + int_bdry (cos gamma_bar_t -
    /// cos gamma_t) / sin gamma_t`, with `lambda |D_t|` read as the integral
    /// of the solved leaf's mean curvature over the uncorrected leaf.
    pub fn lambda_identity_residual(&self, leaf: &LeafSolution) -> Result<f64> {
        let base = self.leaf(leaf.t, &DVector::zeros(self.grid.len()))?;
        let w = self.grid.weights();
        let dens = base.area_density();
        let h = base.mean_curvature();
        let mut lhs = 0.0;
        for i in 0..self.grid.len() {
            lhs += w[i] * dens[i] * (leaf.mean_curvature - h[i]);
        }
        let dtheta = self.grid.boundary_weight();
        let flux: f64 = (0..self.grid.n_theta())
            .map(|k| base.angle_defect(k) / base.sin_gamma(k) * base.line_element[k] * dtheta)
            .sum();
        Ok(lhs - flux)
    }

    /// Interface-level row for each solved leaf.
    pub fn boundary_angle_residual(&self, leaf: &LeafSolution) -> Result<f64> {
        let (_, b) = self.phi_map(leaf.t, &DVector::from_column_slice(&leaf.u))?;
        Ok(b.amax())
    }
}

/// Fitted log-log order of `|R(t)|` over the solved leaves.
pub fn fitted_order(ts: &[f64], values: &[f64]) -> Result<f64> {
    loglog_slope(ts, values)
}

/// Sign report of the integrating-factor product along a solved family.
#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport {
    pub t: Vec<f64>,
    /// `exp(+- int Psi) * lambda`, normalized at the smallest `t`.
    pub value: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Largest derivative of the wrong sign (0 when none).
    pub max_violation: f64,
}

/// Slab: `d/dt [exp(-int Psi) H] <= 0`. Conical and spherical:
/// `d/dt [exp(int Psi) lambda] >= 0`, which equals `t^p exp(int C1) lambda`
/// up to a constant factor.
pub fn monotone_quantity(regime: PoleRegime, ts: &[f64], lambda: &[f64], psi: &[f64]) -> Result<MonotoneReport> {
    let n = ts.len();
    if n < 3 || lambda.len() != n || psi.len() != n {
        return Err(invalid("monotone check needs at least three matched samples"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let t: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
    let lam: Vec<f64> = order.iter().map(|&i| lambda[i]).collect();
    let ps: Vec<f64> = order.iter().map(|&i| psi[i]).collect();
    let slab = matches!(regime, PoleRegime::Slab { .. });
    let mut integral = vec![0.0; n];
    for i in 1..n {
        // t Psi is smooth in log t near the pole; Psi itself is smooth for slabs.
        integral[i] = integral[i - 1]
            + if slab {
                0.5 * (ps[i] + ps[i - 1]) * (t[i] - t[i - 1])
            } else {
                0.5 * (t[i] * ps[i] + t[i - 1] * ps[i - 1]) * (t[i] / t[i - 1]).ln()
            };
    }
    let sign = if slab { -1.0 } else { 1.0 };
    let value: Vec<f64> = (0..n).map(|i| (sign * integral[i]).exp() * lam[i]).collect();
    let mut derivative = Vec::with_capacity(n - 2);
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let d = (value[i + 1] - value[i - 1]) / (t[i + 1] - t[i - 1]);
        derivative.push(d);
        let bad = if slab { d } else { -d };
        worst = worst.max(bad);
    }
    Ok(MonotoneReport {
        t,
        value,
        derivative,
        max_violation: worst,
    })
}

/// Largest eigenvalue gap helper for reports: `min eig(g0 - delta)` on the
/// horizontal block.
pub fn horizontal_excess(pm: &PoleMetric) -> f64 {
    let m = nalgebra::Matrix2::new(pm.g0[0][0] - 1.0, pm.g0[0][1], pm.g0[1][0], pm.g0[1][1] - 1.0);
    SymmetricEigen::new(m).eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{PerturbationTerm, ScalarField};

    fn perturbed_cone() -> FoliationProblem {
        let h = Mat3::new(0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4);
        let g = crate::metric::AmbientMetric::perturbed(
            Mat3::identity(),
            vec![PerturbationTerm {
                tensor: h,
                field: ScalarField::Linear {
                    gradient: Vec3::new(0.2, -0.1, 1.0),
                    offset: 0.0,
                },
            }],
        )
        .unwrap();
        let body = ProfileCurve::cone(0.8, 2.0).unwrap();
        FoliationProblem::new(CapillaryConfig::euclidean(body).with_ambient(g), 11, 12).unwrap()
    }

    #[test]
    fn euclidean_cone_levels_solve_exactly() {
        let p = FoliationProblem::new(
            CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap()),
            11,
            12,
        )
        .unwrap();
        let s = p.solve_leaf(0.05).unwrap();
        assert!(s.u.iter().all(|v| v.abs() < 1e-9));
        assert!(s.lambda.abs() < 1e-9);
        assert!(s.angle_residual < 1e-9 && s.interior_residual < 1e-9);
    }

    #[test]
    fn flat_cone_coefficient_is_two_over_t() {
        let p = FoliationProblem::new(
            CapillaryConfig::euclidean(ProfileCurve::cone(1.3, 2.0).unwrap()),
            11,
            12,
        )
        .unwrap();
        let s = p.solve_leaf(0.02).unwrap();
        let psi = p.psi_coefficient(&s, &SolveOptions::default()).unwrap();
        assert!((0.02 * psi - 2.0).abs() < 1e-9, "{psi}");
    }

    #[test]
    fn cylinder_slab_coefficient_vanishes() {
        let body = ProfileCurve::cylinder(1.0, 2.0).unwrap();
        let p = FoliationProblem::slab(CapillaryConfig::euclidean(body), 0.5, 11, 12).unwrap();
        let s = p.solve_leaf(0.1).unwrap();
        assert!(p.psi_coefficient(&s, &SolveOptions::default()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn linearization_matches_differences_of_the_residual() {
        let p = perturbed_cone();
        let n = p.grid().len();
        let z = DVector::from_fn(n + 1, |i, _| 0.1 * ((i as f64) * 0.37).sin());
        let j = p.linearization(0.05, &z).unwrap();
        let dir = DVector::from_fn(n + 1, |i, _| ((i as f64) * 0.11).cos());
        let h = 1e-5;
        let fd =
            (p.residual(0.05, &(&z + &dir * h)).unwrap() - p.residual(0.05, &(&z - &dir * h)).unwrap()) / (2.0 * h);
        let err = (&j * &dir - &fd).amax();
        assert!(err < 1e-6 * fd.amax(), "{err}");
    }

    #[test]
    fn small_t_interior_block_is_the_scaled_laplacian() {
        // Height -t^2 u over a disk of radius abar t: H = Laplacian(u) / abar^2.
        let body = ProfileCurve::cone(0.8, 2.0).unwrap();
        let p = FoliationProblem::new(CapillaryConfig::euclidean(body), 11, 12).unwrap();
        let n = p.grid().len();
        let j = p.linearization(1e-4, &DVector::zeros(n + 1)).unwrap();
        let lap = p.grid().laplacian() / 0.64;
        let nt = p.grid().n_theta();
        let block = j.view((nt, 0), (n - nt, n)).into_owned();
        let target = lap.view((nt, 0), (n - nt, n)).into_owned();
        assert!((block - &target).amax() < 1e-3 * target.amax());
    }

    #[test]
    fn continuation_keeps_the_residual_small() {
        let p = perturbed_cone();
        let ts = [0.1, 0.05, 0.025];
        let fam = p.solve_family(&ts, &SolveOptions::default()).unwrap();
        assert_eq!(fam.len(), 3);
        for s in &fam {
            assert!(s.angle_residual < LEAF_ACCEPT && s.interior_residual < LEAF_ACCEPT);
        }
        // Only the first leaf needs a fresh factorization.
        assert!(fam[1..].iter().all(|s| s.jacobian_builds == 0));
    }

    #[test]
    fn phi_at_zero_is_the_limit() {
        let p = perturbed_cone();
        let u = DVector::zeros(p.grid().len());
        let (i0, b0) = p.phi_map(0.0, &u).unwrap();
        let (i1, b1) = p.phi_map(1e-4, &u).unwrap();
        assert!((i0 - i1).amax() < 1e-3 && (b0 - b1).amax() < 1e-3);
    }

    #[test]
    fn monotone_product_flags_the_wrong_sign() {
        let ts = [0.1, 0.2, 0.3, 0.4];
        let rising = monotone_quantity(PoleRegime::Conical, &ts, &[1.0, 1.1, 1.2, 1.3], &[1.0; 4]).unwrap();
        assert_eq!(rising.max_violation, 0.0);
        let slab = monotone_quantity(PoleRegime::Slab { rho0: 0.5 }, &ts, &[1.0, 1.1, 1.2, 1.3], &[0.0; 4]).unwrap();
        assert!(slab.max_violation > 0.9);
    }

    #[test]
    fn apex_metric_other_than_delta_is_redirected() {
        let g = crate::metric::AmbientMetric::constant(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.4))).unwrap();
        let cfg = CapillaryConfig::euclidean(ProfileCurve::cone(0.8, 2.0).unwrap()).with_ambient(g);
        assert!(matches!(
            FoliationProblem::new(cfg, 11, 12),
            Err(LabError::Precondition(_))
        ));
    }
}
