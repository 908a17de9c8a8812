//! Small numerical utilities for convergence studies: log-log slopes,
//! Richardson extrapolation and polynomial least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Least-squares slope of `log|err|` against `log h`.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(invalid("slope fit needs at least two matched samples"));
    }
    if h.iter().chain(err.iter()).any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(invalid("slope fit needs nonzero finite samples"));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.abs().ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Richardson extrapolation of samples `values[j]` taken at
/// `h_j = h_0 / 2^j`, assuming an error expansion in integer powers
/// `h^p, h^(p+1), ...`. Returns the full tableau's final entry.
pub fn richardson_halving(values: &[f64], leading_power: u32) -> f64 {
    let mut row: Vec<f64> = values.to_vec();
    let mut power = leading_power;
    while row.len() > 1 {
        let factor = 2f64.powi(power as i32);
        row = row
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        power += 1;
    }
    row[0]
}

/// Coefficients `c_0..c_deg` minimizing `sum (y - sum c_i x^i)^2`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() <= degree {
        return Err(invalid("polynomial fit is underdetermined"));
    }
    let a = DMatrix::from_fn(x.len(), degree + 1, |r, c| x[r].powi(c as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| invalid(format!("polynomial fit failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_recovers_limit() {
        let vals: Vec<f64> = (0..5)
            .map(|j| {
                let h = 0.1 / 2f64.powi(j);
                2.0 + 0.3 * h - 0.7 * h * h + 0.2 * h * h * h
            })
            .collect();
        assert!((richardson_halving(&vals, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polyfit_exact_quadratic() {
        let x = [0.0, 0.5, 1.0, 1.5];
        let y: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + 0.5 * t * t).collect();
        let c = polyfit(&x, &y, 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 0.5).abs() < 1e-12);
    }
}
