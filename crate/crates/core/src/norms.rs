//! Weighted sup norm `‖f‖_Y = max |f(x)| / ρ(x)`, `ρ(x) = Σ_j (1 + |x - q_j|)^{-μ}`.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Precomputed weight `ρ` for a fixed set of centers.
#[derive(Debug, Clone)]
pub struct WeightedNorm {
    mu: f64,
    rho: Field,
}

impl WeightedNorm {
    pub fn new(grid: Grid, centers: &[Vec<f64>], mu: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("weighted norm needs at least one center".into()));
        }
        let n = grid.dim() as f64;
        // the admissible window is N/2 < μ < N + 2s; s < 1 bounds it by N + 2
        if !(mu > 0.5 * n && mu < n + 2.0) {
            return Err(Error::InvalidParameter(format!(
                "weight exponent μ = {mu} outside (N/2, N+2)"
            )));
        }
        if let Some(c) = centers.iter().find(|c| c.len() != grid.dim()) {
            return Err(Error::InvalidParameter(format!(
                "center {c:?} has wrong dimension for an N = {} grid",
                grid.dim()
            )));
        }
        let rho = Field::from_fn(grid, |x| {
            centers.iter().map(|q| (1.0 + grid.distance(x, q)).powf(-mu)).sum()
        });
        Ok(Self { mu, rho })
    }

    /// As [`WeightedNorm::new`] but additionally enforces `μ < N + 2s`.
    pub fn with_order(grid: Grid, centers: &[Vec<f64>], mu: f64, s: f64) -> Result<Self> {
        let n = grid.dim() as f64;
        if mu >= n + 2.0 * s {
            return Err(Error::InvalidParameter(format!(
                "weight exponent μ = {mu} must be below N + 2s = {}",
                n + 2.0 * s
            )));
        }
        Self::new(grid, centers, mu)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn weight(&self) -> &Field {
        &self.rho
    }

    pub fn norm(&self, f: &Field) -> f64 {
        f.values()
            .iter()
            .zip(self.rho.values())
            .fold(0.0, |m, (v, r)| m.max(v.abs() / r))
    }
}

/// `max_x |f(x)| / ρ(x)` with periodic distances to the centers.
pub fn weighted_sup_norm(f: &Field, centers: &[Vec<f64>], mu: f64) -> Result<f64> {
    Ok(WeightedNorm::new(*f.grid(), centers, mu)?.norm(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_has_unit_norm() {
        let g = Grid::new(1, 20.0, 256).unwrap();
        let centers = vec![vec![1.5]];
        let w = WeightedNorm::new(g, &centers, 0.7).unwrap();
        assert!((w.norm(w.weight()) - 1.0).abs() < 1e-15);
        assert_eq!(w.norm(&Field::zeros(g)), 0.0);
    }

    #[test]
    fn homogeneity_two_centers() {
        let g = Grid::new(2, 10.0, 32).unwrap();
        let centers = vec![vec![-3.0, 0.0], vec![3.0, 1.0]];
        let w = WeightedNorm::new(g, &centers, 1.2).unwrap();
        let f = w.weight().scale(2.0);
        assert!((weighted_sup_norm(&f, &centers, 1.2).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = Grid::new(1, 10.0, 32).unwrap();
        let f = Field::zeros(g);
        assert!(weighted_sup_norm(&f, &[], 0.7).is_err());
        assert!(weighted_sup_norm(&f, &[vec![0.0]], 0.4).is_err());
        assert!(WeightedNorm::with_order(g, &[vec![0.0]], 1.9, 0.4).is_err());
        assert!(WeightedNorm::with_order(g, &[vec![0.0]], 0.7, 0.4).is_ok());
    }
}
