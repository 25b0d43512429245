//! Log-log least-squares rate estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit of `log value = slope · log ε + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Requires at least three pairs, strictly decreasing positive `ε` and positive values.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidParameter("ε values must be strictly decreasing".into()));
    }
    if let Some(&(e, v)) = pairs.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs positive data, got ({e}, {v})"
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { pairs: pairs.to_vec(), slope, intercept, r_squared })
}
