//! Elliptic problems on the unit disk (and on ellipses through the affine
//! stretch) under a grid metric.
//!
//! Nodes: one pole node, `n_r` shifted rings `r_j = (j + 1/2) / n_r` and a
//! boundary ring at `r = 1`, each ring carrying `n_theta` (odd) equispaced
//! angles. The stiffness matrix is the Galerkin form of the Dirichlet energy
//! with piecewise-linear radial and trigonometric angular interpolation,
//! 2-point Gauss in `r` and the trapezoid rule in `theta`; the mass matrix is
//! lumped. Both are symmetric by construction and the stiffness annihilates
//! constants, which is the discrete divergence theorem.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::surface::Mat2;

/// Relative singular-value threshold deciding the discrete nullspace.
pub const NULLSPACE_THRESHOLD: f64 = 1e-8;
/// Default tolerance on `int f - int_bdry g` before a Neumann solve refuses.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

pub type MetricFn = Arc<dyn Fn(f64, f64) -> Mat2 + Send + Sync>;

/// Metric on the reference disk in Cartesian coordinates.
#[derive(Clone)]
pub enum GridMetric {
    Flat,
    /// Pullback of the flat metric under `(x, y) -> (a x, b y)`.
    Ellipse {
        a: f64,
        b: f64,
    },
    Field(MetricFn),
}

impl fmt::Debug for GridMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridMetric::Flat => write!(f, "Flat"),
            GridMetric::Ellipse { a, b } => write!(f, "Ellipse {{ a: {a}, b: {b} }}"),
            GridMetric::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl GridMetric {
    pub fn at(&self, x: f64, y: f64) -> Mat2 {
        match self {
            GridMetric::Flat => Mat2::identity(),
            GridMetric::Ellipse { a, b } => Mat2::new(a * a, 0.0, 0.0, b * b),
            GridMetric::Field(f) => f(x, y),
        }
    }
}

/// Energy coefficients `sqrt(det) g^ab` in polar coordinates.
#[derive(Clone, Copy, Debug)]
struct PolarCoefficients {
    rr: f64,
    rt: f64,
    tt: f64,
    area: f64,
}

fn polar_coefficients(metric: &GridMetric, r: f64, theta: f64) -> PolarCoefficients {
    let (s, c) = theta.sin_cos();
    let g = metric.at(r * c, r * s);
    let er = nalgebra::Vector2::new(c, s);
    let et = nalgebra::Vector2::new(-s, c);
    let root = g.determinant().sqrt();
    let grr = er.dot(&(g * er));
    let grt = er.dot(&(g * et));
    let gtt = et.dot(&(g * et));
    PolarCoefficients {
        rr: r * gtt / root,
        rt: -grt / root,
        tt: grr / (r * root),
        area: r * root,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Pole,
    Interior { ring: usize, angle: usize },
    Boundary { angle: usize },
}

/// Assembled grid: geometry, lumped mass, boundary weights and stiffness.
#[derive(Clone, Debug)]
pub struct DiskGrid {
    n_r: usize,
    n_theta: usize,
    metric: GridMetric,
    radii: Vec<f64>,
    mass: DVector<f64>,
    boundary_weights: DVector<f64>,
    stiffness: DMatrix<f64>,
}

/// Nodal values on a [`DiskGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiskField {
    pub values: DVector<f64>,
    pub mean_zero: bool,
}

impl DiskField {
    pub fn new(values: DVector<f64>) -> Self {
        DiskField {
            values,
            mean_zero: false,
        }
    }
}

/// Spectral differentiation matrix on `n` (odd) equispaced periodic points.
pub fn periodic_derivative_matrix(n: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |k, l| {
        if k == l {
            0.0
        } else {
            let d = k as i64 - l as i64;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (d as f64 * h / 2.0).sin()
        }
    })
}

impl DiskGrid {
    pub fn new(n_r: usize, n_theta: usize, metric: GridMetric) -> Result<Self> {
        if n_r < 2 {
            return Err(invalid("need at least two interior rings"));
        }
        if n_theta < 3 || n_theta % 2 == 0 {
            return Err(invalid("angular resolution must be odd and at least 3"));
        }
        let h = 1.0 / n_r as f64;
        // radii[0] is the pole, radii[n_r + 1] the boundary.
        let mut radii = vec![0.0];
        radii.extend((0..n_r).map(|j| (j as f64 + 0.5) * h));
        radii.push(1.0);
        let mut grid = DiskGrid {
            n_r,
            n_theta,
            metric,
            radii,
            mass: DVector::zeros(0),
            boundary_weights: DVector::zeros(0),
            stiffness: DMatrix::zeros(0, 0),
        };
        grid.assemble()?;
        Ok(grid)
    }

    pub fn flat(n_r: usize, n_theta: usize) -> Result<Self> {
        Self::new(n_r, n_theta, GridMetric::Flat)
    }

    pub fn ellipse(a: f64, b: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(invalid("ellipse semi-axes must be positive"));
        }
        Self::new(n_r, n_theta, GridMetric::Ellipse { a, b })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn len(&self) -> usize {
        1 + (self.n_r + 1) * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn metric(&self) -> &GridMetric {
        &self.metric
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_theta as f64
    }

    /// Index of ring `ring` (0 = pole, `n_r + 1` = boundary) at angle `k`.
    pub fn index(&self, ring: usize, k: usize) -> usize {
        if ring == 0 {
            0
        } else {
            1 + (ring - 1) * self.n_theta + k
        }
    }

    pub fn boundary_index(&self, k: usize) -> usize {
        self.index(self.n_r + 1, k)
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        if i == 0 {
            return NodeKind::Pole;
        }
        let ring = (i - 1) / self.n_theta;
        let angle = (i - 1) % self.n_theta;
        if ring == self.n_r {
            NodeKind::Boundary { angle }
        } else {
            NodeKind::Interior { ring, angle }
        }
    }

    /// Polar coordinates of node `i`.
    pub fn polar(&self, i: usize) -> (f64, f64) {
        match self.kind(i) {
            NodeKind::Pole => (0.0, 0.0),
            NodeKind::Interior { ring, angle } => (self.radii[ring + 1], self.theta(angle)),
            NodeKind::Boundary { angle } => (1.0, self.theta(angle)),
        }
    }

    pub fn cartesian(&self, i: usize) -> (f64, f64) {
        let (r, t) = self.polar(i);
        (r * t.cos(), r * t.sin())
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    /// Boundary line-element weights, one per boundary angle.
    pub fn boundary_weights(&self) -> &DVector<f64> {
        &self.boundary_weights
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn area(&self) -> f64 {
        self.mass.sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_weights.sum()
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> DiskField {
        DiskField::new(DVector::from_fn(self.len(), |i, _| {
            let (x, y) = self.cartesian(i);
            f(x, y)
        }))
    }

    pub fn sample_boundary(&self, g: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_fn(self.n_theta, |k, _| g(self.theta(k)))
    }

    pub fn integrate(&self, f: &DiskField) -> f64 {
        self.mass.dot(&f.values)
    }

    pub fn integrate_boundary(&self, g: &DVector<f64>) -> f64 {
        self.boundary_weights.dot(g)
    }

    /// Boundary ring values of a field.
    pub fn boundary_values(&self, f: &DiskField) -> DVector<f64> {
        DVector::from_fn(self.n_theta, |k, _| f.values[self.boundary_index(k)])
    }

    /// `L^2` norm of `a - b` under the lumped mass.
    pub fn l2_distance(&self, a: &DiskField, b: &DiskField) -> f64 {
        let d = &a.values - &b.values;
        self.mass.dot(&d.component_mul(&d)).sqrt()
    }

    pub fn l2_norm(&self, a: &DiskField) -> f64 {
        self.mass.dot(&a.values.component_mul(&a.values)).sqrt()
    }

    fn assemble(&mut self) -> Result<()> {
        let n = self.len();
        let nt = self.n_theta;
        let dtheta = 2.0 * PI / nt as f64;
        let d = periodic_derivative_matrix(nt);
        let mut k_mat = DMatrix::zeros(n, n);
        let mut mass = DVector::zeros(n);
        let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];

        // Element e spans radii[e]..radii[e + 1]; e = 0 is the pole fan.
        for e in 0..=self.n_r {
            let (ra, rb) = (self.radii[e], self.radii[e + 1]);
            let len = rb - ra;
            for k in 0..nt {
                let theta = self.theta(k);
                let ia = self.index(e, k);
                let ib = self.index(e + 1, k);
                for &s in &gauss {
                    let r = ra + s * len;
                    let c = polar_coefficients(&self.metric, r, theta);
                    let w = 0.5 * len * dtheta;
                    if !(c.area > 0.0 && c.rr.is_finite() && c.tt.is_finite()) {
                        return Err(LabError::Degenerate("grid metric is not positive definite".into()));
                    }
                    let (pa, pb) = (1.0 - s, s);
                    mass[ia] += w * c.area * pa;
                    mass[ib] += w * c.area * pb;
                    // Radial gradient: (u_b - u_a) / len.
                    let gr = [(ia, -1.0 / len), (ib, 1.0 / len)];
                    // Angular gradient: pa D u_a + pb D u_b (pole ring is constant).
                    let mut gt: Vec<(usize, f64)> = Vec::with_capacity(2 * nt);
                    for l in 0..nt {
                        if e > 0 {
                            gt.push((self.index(e, l), pa * d[(k, l)]));
                        }
                        gt.push((self.index(e + 1, l), pb * d[(k, l)]));
                    }
                    for &(i, a) in &gr {
                        for &(j, b) in &gr {
                            k_mat[(i, j)] += w * c.rr * a * b;
                        }
                        for &(j, b) in &gt {
                            k_mat[(i, j)] += w * c.rt * a * b;
                            k_mat[(j, i)] += w * c.rt * a * b;
                        }
                    }
                    for &(i, a) in &gt {
                        for &(j, b) in &gt {
                            k_mat[(i, j)] += w * c.tt * a * b;
                        }
                    }
                }
            }
        }
        let bw = DVector::from_fn(nt, |k, _| {
            let (s, c) = self.theta(k).sin_cos();
            let g = self.metric.at(c, s);
            let et = nalgebra::Vector2::new(-s, c);
            et.dot(&(g * et)).sqrt() * dtheta
        });
        self.stiffness = k_mat;
        self.mass = mass;
        self.boundary_weights = bw;
        Ok(())
    }

    /// Lift boundary-ring data to a full-length vector of boundary integrals.
    fn boundary_load(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        for k in 0..self.n_theta {
            out[self.boundary_index(k)] = self.boundary_weights[k] * g[k];
        }
        out
    }

    /// Dirichlet energy form `int <grad u, grad v>`.
    pub fn dirichlet_form(&self, u: &DiskField, v: &DiskField) -> f64 {
        u.values.dot(&(&self.stiffness * &v.values))
    }

    /// `max |K - K^T|` relative to `max |K|`.
    pub fn symmetry_defect(&self) -> f64 {
        let k = &self.stiffness;
        (k - k.transpose()).amax() / k.amax()
    }

    /// `|1^T K u|`, the discrete divergence-theorem defect
    /// `int Delta_h u - int_bdry d_nu,h u` for any nodal `u`.
    pub fn divergence_defect(&self, u: &DiskField) -> f64 {
        let ku = &self.stiffness * &u.values;
        ku.sum().abs() / ku.amax().max(1.0)
    }

    /// Discrete Laplacian `W^{-1}(-K u + B g)` given the conormal derivative
    /// `g` on the boundary ring.
    pub fn laplacian(&self, u: &DiskField, normal_derivative: &DVector<f64>) -> DiskField {
        let rhs = -(&self.stiffness * &u.values) + self.boundary_load(normal_derivative);
        DiskField::new(rhs.component_div(&self.mass))
    }

    /// Complex Fourier coefficient of mode `m` on interior ring `ring`.
    pub fn fourier_mode(&self, u: &DiskField, ring: usize, m: usize) -> (f64, f64) {
        let nt = self.n_theta as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..self.n_theta {
            let v = u.values[self.index(ring + 1, k)];
            let t = m as f64 * self.theta(k);
            re += v * t.cos() / nt;
            im -= v * t.sin() / nt;
        }
        (re, im)
    }

    /// Largest odd-mode amplitude extrapolated to the pole from the two
    /// innermost rings; vanishes for fields smooth across `r = 0`.
    pub fn pole_parity_defect(&self, u: &DiskField) -> f64 {
        let (r0, r1) = (self.radii[1], self.radii[2]);
        (1..=self.n_theta / 2)
            .step_by(2)
            .map(|m| {
                let a = self.fourier_mode(u, 0, m);
                let b = self.fourier_mode(u, 1, m);
                // Odd modes behave like r near the pole: fit c = alpha + beta r.
                let ex = |x: f64, y: f64| (x * r1 - y * r0) / (r1 - r0);
                ex(a.0, b.0).hypot(ex(a.1, b.1))
            })
            .fold(0.0, f64::max)
    }

    /// Dense export: row-major little-endian f64 payload plus a JSON header.
    pub fn export_stiffness(&self, stem: &Path) -> Result<()> {
        write_dense(&self.stiffness, stem)
    }
}

/// Writes `stem.bin` (row-major f64 LE) and `stem.json` (shape header).
pub fn write_dense(m: &DMatrix<f64>, stem: &Path) -> Result<()> {
    let io = |e: std::io::Error| LabError::Internal(format!("export failed: {e}"));
    let mut bin = std::fs::File::create(stem.with_extension("bin")).map_err(io)?;
    let mut buf = Vec::with_capacity(m.len() * 8);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    bin.write_all(&buf).map_err(io)?;
    let header = serde_json::json!({
        "rows": m.nrows(),
        "cols": m.ncols(),
        "dtype": "f64-le",
        "layout": "row-major",
    });
    std::fs::write(stem.with_extension("json"), header.to_string()).map_err(io)?;
    Ok(())
}

/// Summary of a Neumann solve.
#[derive(Clone, Debug, Serialize)]
pub struct NeumannReport {
    /// `int f - int_bdry g` before projection.
    pub defect: f64,
    /// Constant added to `g` to restore compatibility.
    pub boundary_shift: f64,
    pub residual: f64,
}

/// Factorized bordered Neumann operator; immutable and shareable.
pub struct NeumannSolver<'g> {
    grid: &'g DiskGrid,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tolerance: f64,
}

impl<'g> NeumannSolver<'g> {
    pub fn new(grid: &'g DiskGrid) -> Result<Self> {
        let n = grid.len();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&grid.stiffness);
        for i in 0..n {
            a[(i, n)] = grid.mass[i];
            a[(n, i)] = grid.mass[i];
        }
        Ok(NeumannSolver {
            grid,
            lu: a.lu(),
            tolerance: COMPATIBILITY_TOLERANCE,
        })
    }

    /// Accept data whose compatibility defect is at most `tol`.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    /// Solves `Delta u = f`, `d_nu u = g`, `int u = 0`.
    pub fn solve(&self, f: &DiskField, g: &DVector<f64>) -> Result<(DiskField, NeumannReport)> {
        let grid = self.grid;
        let defect = grid.integrate(f) - grid.integrate_boundary(g);
        if defect.abs() > self.tolerance {
            return Err(LabError::Incompatible { defect });
        }
        let shift = defect / grid.boundary_length();
        let g = g.add_scalar(shift);
        let n = grid.len();
        let rhs = -grid.mass.component_mul(&f.values) + grid.boundary_load(&g);
        let mut b = DVector::zeros(n + 1);
        b.rows_mut(0, n).copy_from(&rhs);
        let sol = self
            .lu
            .solve(&b)
            .ok_or_else(|| LabError::Internal("bordered Neumann system is singular".into()))?;
        let u = sol.rows(0, n).into_owned();
        let res = (&grid.stiffness * &u - &rhs).amax() / rhs.amax().max(1.0);
        Ok((
            DiskField {
                values: u,
                mean_zero: true,
            },
            NeumannReport {
                defect,
                boundary_shift: shift,
                residual: res,
            },
        ))
    }
}

/// One-shot Neumann solve at the default compatibility tolerance.
pub fn laplace_neumann_solve(grid: &DiskGrid, f: &DiskField, g: &DVector<f64>) -> Result<(DiskField, NeumannReport)> {
    NeumannSolver::new(grid)?.solve(f, g)
}

/// Pairing of the data with one nullspace basis element.
#[derive(Clone, Debug, Serialize)]
pub struct NullPairing {
    pub basis_index: usize,
    pub pairing: f64,
}

#[derive(Clone, Debug)]
pub enum RobinOutcome {
    Solved {
        particular: DiskField,
        nullspace: Vec<DiskField>,
        residual: f64,
    },
    Incompatible {
        nullspace: Vec<DiskField>,
        violated: Vec<NullPairing>,
    },
}

impl RobinOutcome {
    pub fn nullspace(&self) -> &[DiskField] {
        match self {
            RobinOutcome::Solved { nullspace, .. } | RobinOutcome::Incompatible { nullspace, .. } => nullspace,
        }
    }
}

/// `A = K - W V - B q` with `q` folded into the boundary ring.
fn robin_operator(grid: &DiskGrid, potential: Option<&DVector<f64>>, boundary: &DVector<f64>) -> DMatrix<f64> {
    let mut a = grid.stiffness.clone();
    if let Some(v) = potential {
        for i in 0..grid.len() {
            a[(i, i)] -= grid.mass[i] * v[i];
        }
    }
    for k in 0..grid.n_theta {
        let i = grid.boundary_index(k);
        a[(i, i)] -= grid.boundary_weights[k] * boundary[k];
    }
    a
}

/// Symmetrized `W^{-1/2} A W^{-1/2}` and the scaling `W^{-1/2}`.
fn mass_scaled(grid: &DiskGrid, a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let s = grid.mass.map(|m| 1.0 / m.sqrt());
    let n = grid.len();
    let m = DMatrix::from_fn(n, n, |i, j| s[i] * a[(i, j)] * s[j]);
    ((&m + m.transpose()) * 0.5, s)
}

/// Lowest `count` eigenpairs of the symmetric `m`, ascending, by inverse
/// subspace iteration below a shift certified by a Cholesky factorization.
/// `None` when the iteration does not settle.
fn lowest_pairs(m: &DMatrix<f64>, count: usize) -> Option<Vec<(f64, DVector<f64>)>> {
    let n = m.nrows();
    let width = (count + 6).min(n);
    let mut sigma = -1.0;
    let chol = loop {
        if let Some(c) = (m - DMatrix::identity(n, n) * sigma).cholesky() {
            break c;
        }
        sigma *= 4.0;
        if sigma < -1e12 {
            return None;
        }
    };
    let mut q = DMatrix::from_fn(n, width, |i, j| {
        if j == 0 {
            1.0
        } else {
            ((i + 1) as f64 * (j as f64 + 0.37)).sin()
        }
    });
    for _ in 0..500 {
        q = chol.solve(&q).qr().q();
        let mq = m * &q;
        let t = q.transpose() * &mq;
        let eig = SymmetricEigen::new((&t + t.transpose()) * 0.5);
        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let pairs: Vec<(f64, DVector<f64>)> = order
            .iter()
            .take(count)
            .map(|&k| (eig.eigenvalues[k], &q * eig.eigenvectors.column(k)))
            .collect();
        let settled = pairs
            .iter()
            .all(|(lam, v)| (m * v - v * *lam).norm() <= 1e-10 * (1.0 + lam.abs()));
        if settled {
            return Some(pairs);
        }
    }
    None
}

/// Largest `|lambda|` of a symmetric matrix by power iteration.
fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64) * 0.618).sin());
    let mut est = 0.0;
    for _ in 0..200 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / v.norm();
        v = w / norm;
        if (next - est).abs() <= 1e-10 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Eigenpairs of the symmetric `m` closest to zero, by inverse subspace
/// iteration on one LU factorization of a slightly shifted `m`.
fn near_null_pairs(
    m: &DMatrix<f64>,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    width: usize,
) -> Vec<(f64, DVector<f64>)> {
    let n = m.nrows();
    let width = width.min(n);
    let mut q = DMatrix::from_fn(n, width, |i, j| {
        if j == 0 {
            1.0
        } else {
            ((i + 1) as f64 * (j as f64 + 0.37)).sin()
        }
    });
    for _ in 0..6 {
        let y = lu.solve(&q).expect("shifted factorization is invertible");
        q = y.qr().q();
    }
    let t = q.transpose() * m * &q;
    let eig = SymmetricEigen::new((&t + t.transpose()) * 0.5);
    (0..width)
        .map(|k| (eig.eigenvalues[k], &q * eig.eigenvectors.column(k)))
        .collect()
}

/// Solves `-Delta u = f1`, `d_nu u + h u = f2` in the Fredholm sense.
pub fn robin_solve(grid: &DiskGrid, f1: &DiskField, f2: &DVector<f64>, h: &DVector<f64>) -> Result<RobinOutcome> {
    if f2.len() != grid.n_theta || h.len() != grid.n_theta {
        return Err(invalid("boundary data must have one value per boundary angle"));
    }
    let a = robin_operator(grid, None, &(-h));
    let rhs = grid.mass.component_mul(&f1.values) + grid.boundary_load(f2);
    // Work in the mass-scaled variables where the operator is symmetric.
    let (m, s) = mass_scaled(grid, &a);
    let n = grid.len();
    let top = spectral_radius(&m);
    let cut = NULLSPACE_THRESHOLD * top;
    // The shift keeps the factorization invertible; it sits far below `cut`.
    let shift = 1e-14 * top;
    let lu = (&m + DMatrix::identity(n, n) * shift).lu();
    let pairs = near_null_pairs(&m, &lu, 6);
    let scaled_rhs = rhs.component_mul(&s);
    let data_scale = scaled_rhs.norm().max(1e-300);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut violated = Vec::new();
    for (lam, v) in pairs {
        if lam.abs() > cut {
            continue;
        }
        let coef = v.dot(&scaled_rhs);
        // Pairing int f1 u + int_bdry f2 u with the L^2-normalized basis.
        if coef.abs() > NULLSPACE_THRESHOLD * data_scale.max(1.0) {
            violated.push(NullPairing {
                basis_index: basis.len(),
                pairing: coef,
            });
        }
        basis.push(v);
    }
    let nullspace: Vec<DiskField> = basis.iter().map(|v| DiskField::new(v.component_mul(&s))).collect();
    if !violated.is_empty() {
        return Ok(RobinOutcome::Incompatible { nullspace, violated });
    }
    let sol = if basis.is_empty() {
        let mut x = lu.solve(&scaled_rhs).expect("shifted factorization is invertible");
        // One refinement step removes the shift.
        let r = &scaled_rhs - &m * &x;
        x += lu.solve(&r).expect("shifted factorization is invertible");
        x
    } else {
        // Bordered system [M Z; Z^T 0]: the minimal-norm solution is orthogonal to Z.
        let p = basis.len();
        let mut big = DMatrix::zeros(n + p, n + p);
        big.view_mut((0, 0), (n, n)).copy_from(&m);
        for (k, v) in basis.iter().enumerate() {
            big.view_mut((0, n + k), (n, 1)).copy_from(v);
            big.view_mut((n + k, 0), (1, n)).copy_from(&v.transpose());
        }
        let mut b = DVector::zeros(n + p);
        b.rows_mut(0, n).copy_from(&scaled_rhs);
        let z = big
            .lu()
            .solve(&b)
            .ok_or_else(|| LabError::Degenerate("bordered Robin system is singular".into()))?;
        z.rows(0, n).into_owned()
    };
    let u = sol.component_mul(&s);
    let residual = (&a * &u - &rhs).amax() / rhs.amax().max(1.0);
    Ok(RobinOutcome::Solved {
        particular: DiskField::new(u),
        nullspace,
        residual,
    })
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    /// `L^2`-normalized, with nonnegative mean.
    pub function: DiskField,
}

/// Lowest eigenpair of `-Delta f - V f = mu f`, `d_nu f - q f = 0`.
pub fn eigen_smallest(grid: &DiskGrid, potential: &DVector<f64>, q: &DVector<f64>) -> Result<EigenPair> {
    Ok(eigen_lowest(grid, potential, q, 1)?.remove(0))
}

/// The `count` lowest eigenpairs, ascending.
pub fn eigen_lowest(
    grid: &DiskGrid,
    potential: &DVector<f64>,
    q: &DVector<f64>,
    count: usize,
) -> Result<Vec<EigenPair>> {
    if potential.len() != grid.len() || q.len() != grid.n_theta {
        return Err(invalid("potential or boundary coefficient has the wrong length"));
    }
    let a = robin_operator(grid, Some(potential), q);
    let (m, s) = mass_scaled(grid, &a);
    let pairs = match lowest_pairs(&m, count) {
        Some(p) => p,
        None => {
            let eig = SymmetricEigen::new(m);
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            order
                .into_iter()
                .take(count)
                .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
                .collect()
        }
    };
    Ok(pairs
        .into_iter()
        .map(|(value, v)| {
            let mut f = v.component_mul(&s);
            f /= grid.mass.dot(&f.component_mul(&f)).sqrt();
            if grid.mass.dot(&f) < 0.0 {
                f = -f;
            }
            EigenPair {
                value,
                function: DiskField::new(f),
            }
        })
        .collect())
}

/// Quadratic form `int |grad u|^2 - V u^2 - int_bdry q u^2`.
pub fn index_form(grid: &DiskGrid, potential: &DVector<f64>, q: &DVector<f64>, u: &DiskField) -> f64 {
    let a = robin_operator(grid, Some(potential), q);
    u.values.dot(&(a * &u.values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matrix_is_exact_on_low_modes() {
        let n = 9;
        let d = periodic_derivative_matrix(n);
        let u = DVector::from_fn(n, |k, _| (3.0 * 2.0 * PI * k as f64 / n as f64).sin());
        let du = &d * u;
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            assert!((du[k] - 3.0 * (3.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_and_boundary_match_disk() {
        let g = DiskGrid::flat(8, 7).unwrap();
        assert!((g.area() - PI).abs() < 1e-12, "{}", g.area());
        assert!((g.boundary_length() - 2.0 * PI).abs() < 1e-12);
        let e = DiskGrid::ellipse(2.0, 0.5, 16, 31).unwrap();
        assert!((e.area() - PI).abs() < 1e-12);
    }

    #[test]
    fn stiffness_is_symmetric_and_kills_constants() {
        let g = DiskGrid::ellipse(1.3, 0.8, 6, 9).unwrap();
        assert!(g.symmetry_defect() < 1e-12);
        let one = DiskField::new(DVector::from_element(g.len(), 1.0));
        assert!((&g.stiffness * &one.values).amax() < 1e-11);
    }

    #[test]
    fn trivial_neumann_data_gives_zero() {
        let g = DiskGrid::flat(6, 7).unwrap();
        let f = DiskField::new(DVector::zeros(g.len()));
        let (u, rep) = laplace_neumann_solve(&g, &f, &DVector::zeros(7)).unwrap();
        assert!(u.values.amax() < 1e-14 && rep.residual < 1e-10);
    }

    #[test]
    fn incompatible_neumann_data_reports_defect() {
        let g = DiskGrid::flat(6, 7).unwrap();
        let f = g.sample(|_, _| 1.0);
        match laplace_neumann_solve(&g, &f, &DVector::zeros(7)) {
            Err(LabError::Incompatible { defect }) => assert!((defect - PI).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_robin_nullspace_without_coefficient() {
        let g = DiskGrid::flat(6, 7).unwrap();
        let f = DiskField::new(DVector::zeros(g.len()));
        let out = robin_solve(&g, &f, &DVector::zeros(7), &DVector::zeros(7)).unwrap();
        let ns = out.nullspace();
        assert_eq!(ns.len(), 1);
        let v = &ns[0].values;
        assert!((v.max() - v.min()).abs() < 1e-9);
    }

    #[test]
    fn unit_source_without_coefficient_is_certified_incompatible() {
        let g = DiskGrid::flat(6, 7).unwrap();
        let f = g.sample(|_, _| 1.0);
        match robin_solve(&g, &f, &DVector::zeros(7), &DVector::zeros(7)).unwrap() {
            RobinOutcome::Incompatible { violated, .. } => {
                assert_eq!(violated.len(), 1);
                assert!((violated[0].pairing.abs() - PI.sqrt()).abs() < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn neumann_laplacian_has_zero_ground_state() {
        let g = DiskGrid::flat(8, 7).unwrap();
        let e = eigen_smallest(&g, &DVector::zeros(g.len()), &DVector::zeros(7)).unwrap();
        assert!(e.value.abs() < 1e-10);
        let f = &e.function.values;
        assert!((f.max() - f.min()).abs() < 1e-8);
    }
}
