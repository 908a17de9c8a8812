//! Spectral collocation on the unit disk: Chebyshev points along each
//! diameter, Fourier in the angle, no node at the centre.
//!
//! Rings sit at the positive Chebyshev points `r_j = cos(pi j / n)` with `n`
//! odd, so `r_0 = 1` is the boundary. A value at `-r` along angle `theta` is
//! the value at `r` along `theta + pi`, which needs an even angular count.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::curves::gauss_legendre;
use crate::error::{invalid, Result};

/// Cartesian derivative matrices at the nodes of a [`PolarGrid`].
#[derive(Clone, Debug)]
pub struct CartesianOperators {
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub dxx: DMatrix<f64>,
    pub dxy: DMatrix<f64>,
    pub dyy: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct PolarGrid {
    n_cheb: usize,
    n_theta: usize,
    radii: Vec<f64>,
    ops: CartesianOperators,
    dr: DMatrix<f64>,
    weights: DVector<f64>,
}

/// Chebyshev differentiation matrix on `cos(pi j / n)`, `j = 0..=n`.
pub fn chebyshev_matrix(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
        let row_sum: f64 = (0..=n).filter(|j| *j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row_sum;
    }
    (x, d)
}

/// First and second Fourier differentiation matrices on `m` (even) points.
pub fn fourier_matrices(m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let h = 2.0 * PI / m as f64;
    let sign = |k: i64| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let d1 = DMatrix::from_fn(m, m, |k, l| {
        if k == l {
            0.0
        } else {
            let d = k as i64 - l as i64;
            0.5 * sign(d) / (d as f64 * h / 2.0).tan()
        }
    });
    let d2 = DMatrix::from_fn(m, m, |k, l| {
        if k == l {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let d = k as i64 - l as i64;
            -0.5 * sign(d) / (d as f64 * h / 2.0).sin().powi(2)
        }
    });
    (d1, d2)
}

impl PolarGrid {
    /// `n_cheb` odd (diameter points minus one), `n_theta` even.
    pub fn new(n_cheb: usize, n_theta: usize) -> Result<Self> {
        if n_cheb < 3 || n_cheb % 2 == 0 {
            return Err(invalid("Chebyshev order must be odd and at least 3"));
        }
        if n_theta < 4 || n_theta % 2 == 1 {
            return Err(invalid("angular count must be even and at least 4"));
        }
        let (x, d) = chebyshev_matrix(n_cheb);
        let d2 = &d * &d;
        let nr = (n_cheb + 1) / 2;
        let m = n_theta;
        let n = nr * m;
        let radii: Vec<f64> = x[..nr].to_vec();
        let idx = |j: usize, k: usize| j * m + k;
        // Diameter entry j' at angle k, as a node index.
        let diameter = |jp: usize, k: usize| {
            if jp < nr {
                idx(jp, k)
            } else {
                idx(n_cheb - jp, (k + m / 2) % m)
            }
        };
        let mut ur = DMatrix::zeros(n, n);
        let mut urr = DMatrix::zeros(n, n);
        for j in 0..nr {
            for k in 0..m {
                for jp in 0..=n_cheb {
                    let col = diameter(jp, k);
                    ur[(idx(j, k), col)] += d[(j, jp)];
                    urr[(idx(j, k), col)] += d2[(j, jp)];
                }
            }
        }
        let (f1, f2) = fourier_matrices(m);
        let mut ut = DMatrix::zeros(n, n);
        let mut utt = DMatrix::zeros(n, n);
        for j in 0..nr {
            for k in 0..m {
                for l in 0..m {
                    ut[(idx(j, k), idx(j, l))] = f1[(k, l)];
                    utt[(idx(j, k), idx(j, l))] = f2[(k, l)];
                }
            }
        }
        let urt = &ut * &ur;
        let mut ops = CartesianOperators {
            dx: DMatrix::zeros(n, n),
            dy: DMatrix::zeros(n, n),
            dxx: DMatrix::zeros(n, n),
            dxy: DMatrix::zeros(n, n),
            dyy: DMatrix::zeros(n, n),
        };
        for j in 0..nr {
            let r: f64 = radii[j];
            for k in 0..m {
                let (s, c): (f64, f64) = (2.0 * PI * k as f64 / m as f64).sin_cos();
                let i = idx(j, k);
                for col in 0..n {
                    let (a, b, aa, ab, bb): (f64, f64, f64, f64, f64) =
                        (ur[(i, col)], ut[(i, col)], urr[(i, col)], urt[(i, col)], utt[(i, col)]);
                    ops.dx[(i, col)] = c * a - s / r * b;
                    ops.dy[(i, col)] = s * a + c / r * b;
                    ops.dxx[(i, col)] = c * c * aa - 2.0 * s * c / r * ab
                        + s * s / (r * r) * bb
                        + s * s / r * a
                        + 2.0 * s * c / (r * r) * b;
                    ops.dyy[(i, col)] = s * s * aa + 2.0 * s * c / r * ab + c * c / (r * r) * bb + c * c / r * a
                        - 2.0 * s * c / (r * r) * b;
                    ops.dxy[(i, col)] = s * c * aa + (c * c - s * s) / r * ab
                        - s * c / (r * r) * bb
                        - s * c / r * a
                        - (c * c - s * s) / (r * r) * b;
                }
            }
        }
        let weights = area_weights(&radii, n_cheb, m)?;
        Ok(PolarGrid {
            n_cheb,
            n_theta,
            radii,
            ops,
            dr: ur,
            weights,
        })
    }

    pub fn n_cheb(&self) -> usize {
        self.n_cheb
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn rings(&self) -> usize {
        self.radii.len()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn index(&self, ring: usize, k: usize) -> usize {
        ring * self.n_theta + k
    }

    /// Ring 0 is the boundary circle.
    pub fn is_boundary(&self, i: usize) -> bool {
        i < self.n_theta
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_theta as f64
    }

    pub fn polar(&self, i: usize) -> (f64, f64) {
        (self.radii[i / self.n_theta], self.theta(i % self.n_theta))
    }

    pub fn cartesian(&self, i: usize) -> (f64, f64) {
        let (r, t) = self.polar(i);
        (r * t.cos(), r * t.sin())
    }

    pub fn operators(&self) -> &CartesianOperators {
        &self.ops
    }

    /// Radial derivative matrix; on ring 0 it is the outward normal derivative.
    pub fn radial_derivative(&self) -> &DMatrix<f64> {
        &self.dr
    }

    /// Flat Laplacian `dxx + dyy`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        &self.ops.dxx + &self.ops.dyy
    }

    /// Area quadrature weights (sum to `pi`).
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Boundary quadrature weight per boundary node.
    pub fn boundary_weight(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        DVector::from_fn(self.len(), |i, _| {
            let (x, y) = self.cartesian(i);
            f(x, y)
        })
    }

    pub fn integrate(&self, f: &DVector<f64>) -> f64 {
        self.weights.dot(f)
    }

    pub fn integrate_boundary(&self, g: &[f64]) -> f64 {
        g.iter().sum::<f64>() * self.boundary_weight()
    }

    /// Values at the antipodal nodes `-x`.
    pub fn reflect(&self, u: &DVector<f64>) -> DVector<f64> {
        let m = self.n_theta;
        DVector::from_fn(self.len(), |i, _| u[(i / m) * m + (i % m + m / 2) % m])
    }
}

/// Weights with `int_0^1 p(r) r dr` exact for even polynomials of degree
/// below `2 nr`, times the trapezoid rule in the angle.
fn area_weights(radii: &[f64], n_cheb: usize, m: usize) -> Result<DVector<f64>> {
    let nr = radii.len();
    let (gx, gw) = gauss_legendre(2 * nr + 4);
    let moments = DVector::from_fn(nr, |p, _| {
        gx.iter()
            .zip(&gw)
            .map(|(x, w)| {
                let r = 0.5 * (x + 1.0);
                0.5 * w * (2.0 * p as f64 * r.acos()).cos() * r
            })
            .sum::<f64>()
    });
    let v = DMatrix::from_fn(nr, nr, |p, j| (2.0 * p as f64 * PI * j as f64 / n_cheb as f64).cos());
    let radial = v
        .lu()
        .solve(&moments)
        .ok_or_else(|| invalid("radial quadrature system is singular"))?;
    let dtheta = 2.0 * PI / m as f64;
    Ok(DVector::from_fn(nr * m, |i, _| radial[i / m] * dtheta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_smooth_function_are_spectral() {
        let g = PolarGrid::new(25, 32).unwrap();
        let f = |x: f64, y: f64| (x + 0.5 * y).exp() * (1.0 + x * y);
        let u = g.sample(f);
        let exact_xy = g.sample(|x, y| {
            let e = (x + 0.5 * y).exp();
            0.5 * e * (1.0 + x * y) + 0.5 * e * y + e * x + e
        });
        let exact_x = g.sample(|x, y| (x + 0.5 * y).exp() * (1.0 + x * y + y));
        let ops = g.operators();
        assert!((&ops.dxy * &u - exact_xy).amax() < 1e-9);
        assert!((&ops.dx * &u - exact_x).amax() < 1e-11);
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let g = PolarGrid::new(15, 16).unwrap();
        assert!((g.weights().sum() - PI).abs() < 1e-13);
        // int_D x^2 y^2 = pi / 24
        let u = g.sample(|x, y| x * x * y * y + x * y.powi(3));
        assert!((g.integrate(&u) - PI / 24.0).abs() < 1e-13);
    }

    #[test]
    fn reflection_is_antipodal() {
        let g = PolarGrid::new(7, 8).unwrap();
        let u = g.sample(|x, y| x + 2.0 * y);
        assert!((g.reflect(&u) + &u).amax() < 1e-14);
    }
}
