//! Graph surfaces inside a rotationally symmetric body: heights on the nodes
//! of a [`DiskGrid`], with the boundary ring sliding on the body's boundary.
//!
//! Reference point `s (cos t, sin t)` maps to
//! `(R(t) s cos t, R(t) s sin t, w(s, t))` with `R(t) = psi(top - w(1, t))`,
//! so the boundary trace lies on the boundary surface by construction.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::disc::{periodic_derivative_matrix, DiskGrid, NodeKind};
use crate::error::{invalid, LabError, Result};
use crate::metric::Vec3;
use crate::profile::{ProfileCurve, RadiusJet};
use crate::surface::{NormalSide, ParametricSurface};

#[derive(Clone, Debug)]
pub struct GraphSurface {
    grid: Arc<DiskGrid>,
    body: ProfileCurve,
    pub heights: DVector<f64>,
}

impl GraphSurface {
    pub fn new(body: ProfileCurve, grid: Arc<DiskGrid>, heights: DVector<f64>) -> Result<Self> {
        if heights.len() != grid.len() {
            return Err(invalid("height vector does not match the grid"));
        }
        let s = GraphSurface { grid, body, heights };
        s.validate()?;
        Ok(s)
    }

    /// Heights from a function of the reference disk coordinates.
    pub fn from_reference(body: ProfileCurve, n_r: usize, n_theta: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let grid = Arc::new(DiskGrid::flat(n_r, n_theta)?);
        let h = grid.sample(f).values;
        Self::new(body, grid, h)
    }

    pub fn level(body: ProfileCurve, n_r: usize, n_theta: usize, height: f64) -> Result<Self> {
        Self::from_reference(body, n_r, n_theta, |_, _| height)
    }

    pub fn with_heights(&self, heights: DVector<f64>) -> Result<Self> {
        Self::new(self.body.clone(), self.grid.clone(), heights)
    }

    /// Rejects graphs leaving the body.
    pub fn validate(&self) -> Result<()> {
        let top = self.body.top;
        let bottom = top - self.body.rho_max;
        for (i, w) in self.heights.iter().enumerate() {
            if !w.is_finite() {
                return Err(invalid("non-finite height"));
            }
            let inside = match self.grid.kind(i) {
                NodeKind::Boundary { .. } => {
                    let rho = top - w;
                    rho > 0.0 && rho <= self.body.rho_max && self.body.radius(rho)?.psi > 0.0
                }
                _ => *w < top && *w > bottom,
            };
            if !inside {
                return Err(LabError::Precondition(format!(
                    "graph leaves the body at node {i} (height {w})"
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.grid
    }

    pub fn body(&self) -> &ProfileCurve {
        &self.body
    }

    pub fn boundary_rho(&self, k: usize) -> f64 {
        self.body.top - self.heights[self.grid.boundary_index(k)]
    }

    pub fn boundary_radius(&self, k: usize) -> Result<RadiusJet> {
        self.body.radius(self.boundary_rho(k))
    }

    /// Reference polar coordinates `(s, t)` of node `i`.
    pub fn reference(&self, i: usize) -> (f64, f64) {
        self.grid.polar(i)
    }

    /// Ambient position of node `i`.
    pub fn node_point(&self, i: usize) -> Result<Vec3> {
        let (s, t) = self.reference(i);
        let radius = match self.grid.kind(i) {
            NodeKind::Pole => 0.0,
            _ => self.interpolant().boundary_radius(&self.body, t)?,
        };
        Ok(Vec3::new(radius * s * t.cos(), radius * s * t.sin(), self.heights[i]))
    }

    fn interpolant(&self) -> HeightInterpolant {
        HeightInterpolant::new(&self.grid, &self.heights)
    }

    /// Smooth parametric view over `(s, t)`; not-a-knot cubic along each
    /// diameter, trigonometric in `t`. The positive side points up.
    pub fn view(&self) -> ParametricSurface {
        let interp = Arc::new(self.interpolant());
        let body = self.body.clone();
        ParametricSurface::new(
            move |s, t| {
                let w = interp.height(s, t);
                let r = interp.boundary_radius(&body, t).unwrap_or(f64::NAN);
                Vec3::new(r * s * t.cos(), r * s * t.sin(), w)
            },
            1.0,
            NormalSide::Positive,
        )
    }

    /// Rows `(node, x, y, z)` for export.
    pub fn rows(&self) -> Result<Vec<[f64; 4]>> {
        (0..self.grid.len())
            .map(|i| {
                let p = self.node_point(i)?;
                Ok([i as f64, p.x, p.y, p.z])
            })
            .collect()
    }
}

/// Trigonometric interpolation weights at `t` for `n` (odd) equispaced nodes.
pub fn trig_weights(n: usize, t: f64) -> DVector<f64> {
    DVector::from_fn(n, |l, _| {
        let x = t - 2.0 * PI * l as f64 / n as f64;
        let half = (0.5 * x).sin();
        if half.abs() < 1e-14 {
            // x is a multiple of 2 pi
            1.0
        } else {
            (0.5 * n as f64 * x).sin() / (n as f64 * half)
        }
    })
}

/// Linear map from knot values to not-a-knot spline second derivatives.
#[derive(Clone, Debug)]
pub struct NotAKnotSpline {
    knots: Vec<f64>,
    second: DMatrix<f64>,
}

impl NotAKnotSpline {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 4 || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("not-a-knot spline needs four increasing knots"));
        }
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for i in 1..n - 1 {
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            a[(i, i - 1)] = h0 / 6.0;
            a[(i, i)] = (h0 + h1) / 3.0;
            a[(i, i + 1)] = h1 / 6.0;
            b[(i, i - 1)] = 1.0 / h0;
            b[(i, i)] = -1.0 / h0 - 1.0 / h1;
            b[(i, i + 1)] = 1.0 / h1;
        }
        // Continuous third derivative across the second and penultimate knots.
        for (row, i) in [(0, 1), (n - 1, n - 2)] {
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            a[(row, i - 1)] = h1;
            a[(row, i)] = -(h0 + h1);
            a[(row, i + 1)] = h0;
        }
        let second = a
            .lu()
            .solve(&b)
            .ok_or_else(|| LabError::Internal("spline system is singular".into()))?;
        Ok(NotAKnotSpline { knots, second })
    }

    /// Value of the interpolant at `x` (cubic continuation outside).
    pub fn eval(&self, y: &DVector<f64>, x: f64) -> f64 {
        let m = &self.second * y;
        let n = self.knots.len();
        let i = match self.knots.partition_point(|v| *v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
    }
}

/// Smooth interpolation of nodal heights.
#[derive(Clone, Debug)]
struct HeightInterpolant {
    n_theta: usize,
    pole: f64,
    /// Rings outward, boundary last; each of length `n_theta`.
    rings: Vec<DVector<f64>>,
    spline: NotAKnotSpline,
}

impl HeightInterpolant {
    fn new(grid: &DiskGrid, heights: &DVector<f64>) -> Self {
        let nt = grid.n_theta();
        let rings: Vec<DVector<f64>> = (1..=grid.n_r() + 1)
            .map(|ring| DVector::from_fn(nt, |k, _| heights[grid.index(ring, k)]))
            .collect();
        let radii: Vec<f64> = (1..=grid.n_r() + 1)
            .map(|ring| grid.polar(grid.index(ring, 0)).0)
            .collect();
        let mut knots: Vec<f64> = radii.iter().rev().map(|r| -r).collect();
        knots.push(0.0);
        knots.extend(radii.iter().copied());
        HeightInterpolant {
            n_theta: nt,
            pole: heights[0],
            rings,
            spline: NotAKnotSpline::new(knots).expect("diameter knots increase"),
        }
    }

    fn ring_at(&self, t: f64) -> Vec<f64> {
        let w = trig_weights(self.n_theta, t);
        self.rings.iter().map(|r| r.dot(&w)).collect()
    }

    fn height(&self, s: f64, t: f64) -> f64 {
        let fwd = self.ring_at(t);
        let back = self.ring_at(t + PI);
        let mut y: Vec<f64> = back.iter().rev().copied().collect();
        y.push(self.pole);
        y.extend(fwd);
        self.spline.eval(&DVector::from_vec(y), s)
    }

    fn boundary_radius(&self, body: &ProfileCurve, t: f64) -> Result<f64> {
        let w = trig_weights(self.n_theta, t);
        let b = self.rings.last().expect("boundary ring").dot(&w);
        Ok(body.radius(body.top - b)?.psi)
    }
}

/// Spectral first and second angular derivative matrices.
pub fn angular_operators(n_theta: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = periodic_derivative_matrix(n_theta);
    let d2 = &d * &d;
    (d, d2)
}
