use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional order `s` and nonlinearity exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub s: f64,
    pub p: f64,
}

impl FracParams {
    /// Validates `0 < s < 1`, `p > 1` and, when `2s < N`, the subcritical bound
    /// `p < (N + 2s) / (N - 2s)`.
    pub fn new(s: f64, p: f64, dim: usize) -> Result<Self> {
        let params = Self { s, p };
        params.validate(dim)?;
        Ok(params)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let Self { s, p } = *self;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s = {s} must lie in (0, 1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        if let Some(pc) = self.critical_exponent(dim) {
            if p >= pc {
                return Err(Error::InvalidParameter(format!(
                    "p = {p} is not subcritical: need p < (N+2s)/(N-2s) = {pc}"
                )));
            }
        }
        Ok(())
    }

    /// `(N + 2s) / (N - 2s)` when `2s < N`, otherwise no constraint.
    pub fn critical_exponent(&self, dim: usize) -> Option<f64> {
        let n = dim as f64;
        (2.0 * self.s < n).then(|| (n + 2.0 * self.s) / (n - 2.0 * self.s))
    }

    /// Energy scaling exponent `θ = (p+1)/(p-1) - N/(2s)`.
    pub fn theta(&self, dim: usize) -> f64 {
        (self.p + 1.0) / (self.p - 1.0) - dim as f64 / (2.0 * self.s)
    }

    /// Far-field decay exponent `N + 2s`.
    pub fn decay_exponent(&self, dim: usize) -> f64 {
        dim as f64 + 2.0 * self.s
    }

    /// Interaction exponents `(α, β)` with `α = 1/(p-1) - (N+2s)/(2s)` and
    /// `β = p/(p-1) - N/(2s)`.
    pub fn interaction_exponents(&self, dim: usize) -> (f64, f64) {
        let n = dim as f64;
        let s2 = 2.0 * self.s;
        let alpha = 1.0 / (self.p - 1.0) - (n + s2) / s2;
        let beta = self.p / (self.p - 1.0) - n / s2;
        (alpha, beta)
    }

    /// Default weight exponent for the `Y` norm: midpoint of `(N/2, (N+2s)/2)`.
    pub fn default_mu(&self, dim: usize) -> f64 {
        let n = dim as f64;
        0.5 * (0.5 * n + 0.5 * (n + 2.0 * self.s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(FracParams::new(0.5, 2.0, 1).is_ok());
        assert!(FracParams::new(0.0, 2.0, 1).is_err());
        assert!(FracParams::new(1.0, 2.0, 1).is_err());
        assert!(FracParams::new(0.5, 1.0, 1).is_err());
        // N = 2, s = 0.5: critical exponent 3
        assert!(FracParams::new(0.5, 2.9, 2).is_ok());
        assert!(FracParams::new(0.5, 3.0, 2).is_err());
        // N = 1, s = 0.25: critical exponent 3
        assert!(FracParams::new(0.25, 3.5, 1).is_err());
        // 2s >= N: no bound
        assert!(FracParams::new(0.75, 50.0, 1).is_ok());
    }

    #[test]
    fn exponents() {
        let pr = FracParams { s: 0.5, p: 2.0 };
        assert!((pr.theta(1) - 2.0).abs() < 1e-15);
        let (a, b) = pr.interaction_exponents(1);
        assert!((a - (-1.0)).abs() < 1e-15);
        assert!((b - 1.0).abs() < 1e-15);
        assert!((pr.default_mu(1) - 0.75).abs() < 1e-15);
    }
}
