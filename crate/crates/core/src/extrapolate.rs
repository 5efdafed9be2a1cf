//! Radius extrapolation and convergence-order fits.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Fit `c₀ + c₁ r^{−s}` with `s` free.
#[derive(Clone, Debug, Serialize)]
pub struct PowerFit {
    pub limit: f64,
    pub amplitude: f64,
    pub exponent: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

const S_MIN: f64 = 0.25;
const S_MAX: f64 = 6.0;

fn linear_fit(r: &[f64], v: &[f64], s: f64) -> (f64, f64, f64) {
    let m = r.len() as f64;
    let xs: Vec<f64> = r.iter().map(|ri| ri.powf(-s)).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = v.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(v).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c0 = my - c1 * mx;
    let ss: f64 = xs.iter().zip(v).map(|(x, y)| (c0 + c1 * x - y).powi(2)).sum();
    (c0, c1, (ss / m).sqrt())
}

/// Least-squares fit of `c₀ + c₁ r^{−s}` with `s ∈ [0.25, 6]` chosen by a
/// coarse scan followed by golden-section refinement.
pub fn power_fit(radii: &[f64], values: &[f64]) -> Result<PowerFit> {
    if radii.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: radii.len(), got: values.len() });
    }
    if radii.len() < 2 {
        return Err(Error::EmptySamples);
    }
    if radii.len() == 2 {
        let (c0, c1, res) = linear_fit(radii, values, 1.0);
        return Ok(PowerFit { limit: c0, amplitude: c1, exponent: 1.0, residual: res });
    }
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - values[0]).abs()));
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread <= 1e-14 * scale.max(1e-300) || spread == 0.0 {
        let (c0, c1, res) = linear_fit(radii, values, 1.0);
        return Ok(PowerFit { limit: c0, amplitude: c1, exponent: 1.0, residual: res });
    }
    let obj = |s: f64| linear_fit(radii, values, s).2;
    let steps = 96;
    let mut best = S_MIN;
    let mut best_val = f64::INFINITY;
    for k in 0..=steps {
        let s = S_MIN + (S_MAX - S_MIN) * k as f64 / steps as f64;
        let v = obj(s);
        if v < best_val {
            best_val = v;
            best = s;
        }
    }
    let h = (S_MAX - S_MIN) / steps as f64;
    let (mut a, mut b) = ((best - h).max(S_MIN), (best + h).min(S_MAX));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if obj(c) < obj(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let s = 0.5 * (a + b);
    let (c0, c1, res) = linear_fit(radii, values, s);
    Ok(PowerFit { limit: c0, amplitude: c1, exponent: s, residual: res })
}

/// Least-squares fit against the fixed basis `1, r^{−1}, …, r^{−k}`.
/// The limit is a linear function of the data.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesFit {
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

impl SeriesFit {
    pub fn limit(&self) -> f64 {
        self.coefficients[0]
    }
}

pub fn series_fit(radii: &[f64], values: &[f64], max_power: usize) -> Result<SeriesFit> {
    if radii.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: radii.len(), got: values.len() });
    }
    if radii.is_empty() {
        return Err(Error::EmptySamples);
    }
    let k = max_power.min(radii.len() - 1);
    let a = DMatrix::from_fn(radii.len(), k + 1, |i, j| radii[i].powi(-(j as i32)));
    let y = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::Internal(format!("least squares failed: {e}")))?;
    let res = (&a * &c - &y).norm() / (radii.len() as f64).sqrt();
    Ok(SeriesFit { coefficients: c.iter().copied().collect(), residual: res })
}

/// Observed convergence order: slope of `log err` against `log h`.
#[derive(Clone, Debug, Serialize)]
pub struct OrderFit {
    pub order: f64,
    /// RMS deviation of the log-log points from the fitted line.
    pub residual: f64,
}

pub fn observed_order(h: &[f64], err: &[f64]) -> Result<OrderFit> {
    if h.len() != err.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), got: err.len() });
    }
    if h.len() < 2 {
        return Err(Error::EmptySamples);
    }
    if err.iter().any(|e| !(e.abs() > 0.0)) {
        return Err(Error::InvalidParameter("errors must be nonzero to fit an order".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.abs().ln()).collect();
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let ss: f64 = x.iter().zip(&y).map(|(a, b)| (my + slope * (a - mx) - b).powi(2)).sum();
    Ok(OrderFit { order: slope, residual: (ss / m).sqrt() })
}

/// The default radius ladder.
pub const DEFAULT_RADII: [f64; 4] = [16.0, 32.0, 64.0, 128.0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_fit_recovers_exact_model() {
        let r = DEFAULT_RADII;
        let v: Vec<f64> = r.iter().map(|x| 3.0 - 2.0 * x.powf(-1.7)).collect();
        let f = power_fit(&r, &v).unwrap();
        assert!((f.limit - 3.0).abs() < 1e-9, "{f:?}");
        assert!((f.exponent - 1.7).abs() < 1e-4);
    }

    #[test]
    fn power_fit_on_constant_data() {
        let f = power_fit(&DEFAULT_RADII, &[2.5; 4]).unwrap();
        assert_eq!(f.limit, 2.5);
        assert_eq!(f.residual, 0.0);
    }

    #[test]
    fn series_fit_is_exact_on_its_basis() {
        let r = DEFAULT_RADII;
        let v: Vec<f64> = r.iter().map(|x| 1.0 + 0.5 / x - 4.0 / (x * x)).collect();
        let f = series_fit(&r, &v, 2).unwrap();
        assert!((f.limit() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_of_quadratic_errors() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        let o = observed_order(&h, &e).unwrap();
        assert!((o.order - 2.0).abs() < 1e-12);
    }
}
