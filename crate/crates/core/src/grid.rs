//! Uniform periodic grids on the torus `[-L, L)^N` and real fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of the torus `[-L, L)^N` with `M` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be a power of two >= 8"
            )));
        }
        Ok(Self { dim, half_width, points_per_axis })
    }

    /// Default box: `L = 40` in one dimension, `L = 20` in two.
    pub fn with_default_width(dim: usize, points_per_axis: usize) -> Result<Self> {
        let half_width = if dim == 1 { 40.0 } else { 20.0 };
        Self::new(dim, half_width, points_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Total number of samples, `M^N`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of sample `i` along one axis: `-L + i h`.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Coordinates of the sample with flat index `idx` (row-major, axis 0 slowest).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let m = self.points_per_axis;
        match self.dim {
            1 => [self.coordinate(idx), 0.0],
            _ => [self.coordinate(idx / m), self.coordinate(idx % m)],
        }
    }

    /// Per-axis indices of a flat index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        let m = self.points_per_axis;
        match self.dim {
            1 => [idx, 0],
            _ => [idx / m, idx % m],
        }
    }

    pub fn flat_index(&self, ij: [usize; 2]) -> usize {
        match self.dim {
            1 => ij[0],
            _ => ij[0] * self.points_per_axis + ij[1],
        }
    }

    /// Signed minimum-image displacement `a - b` along one axis.
    pub fn wrap(&self, d: f64) -> f64 {
        let period = 2.0 * self.half_width;
        d - period * (d / period).round()
    }

    /// Periodic (minimum-image) distance between two points.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..self.dim)
            .map(|k| self.wrap(a[k] - b[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Same grid with `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.half_width, self.points_per_axis * factor)
    }
}

/// Real-valued samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan; length is still checked in debug builds.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every grid point. `f` receives a slice of length `N`.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..dim])).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_raw(self.grid, values)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Self {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// Discrete `L^2` inner product `h^N Σ f g`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * dot(&self.values, &other.values)
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `h^N Σ f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Field reflected through the origin, `x -> -x` on every axis.
    pub fn reflected(&self) -> Self {
        let m = self.grid.points_per_axis();
        let flip = |i: usize| (m - i) % m;
        let values = (0..self.grid.len())
            .map(|idx| {
                let [i, j] = self.grid.multi_index(idx);
                self.values[self.grid.flat_index([flip(i), flip(j)])]
            })
            .collect();
        Self::from_raw(self.grid, values)
    }

    /// Field reflected along one axis only.
    pub fn reflected_axis(&self, axis: usize) -> Self {
        let m = self.grid.points_per_axis();
        let values = (0..self.grid.len())
            .map(|idx| {
                let mut ij = self.grid.multi_index(idx);
                ij[axis] = (m - ij[axis]) % m;
                self.values[self.grid.flat_index(ij)]
            })
            .collect();
        Self::from_raw(self.grid, values)
    }

    /// `max |f(x) - f(-x)| / max |f|`.
    pub fn asymmetry(&self) -> f64 {
        let r = self.reflected();
        let scale = self.norm_inf();
        if scale == 0.0 {
            return 0.0;
        }
        self.values
            .iter()
            .zip(&r.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 10.0, 64).is_ok());
        assert!(Grid::new(3, 10.0, 64).is_err());
        assert!(Grid::new(1, 10.0, 48).is_err());
        assert!(Grid::new(1, 10.0, 4).is_err());
        assert!(Grid::new(2, -1.0, 64).is_err());
        assert!(Grid::new(1, f64::NAN, 64).is_err());
    }

    #[test]
    fn sample_points() {
        let g = Grid::new(2, 4.0, 8).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.len(), 64);
        assert_eq!(g.point(0), [-4.0, -4.0]);
        assert_eq!(g.point(9), [-3.0, -3.0]);
        assert_eq!(g.flat_index(g.multi_index(37)), 37);
    }

    #[test]
    fn periodic_distance_uses_minimum_image() {
        let g = Grid::new(1, 10.0, 64).unwrap();
        assert!((g.distance(&[-9.0], &[9.0]) - 2.0).abs() < 1e-14);
        assert!((g.distance(&[1.0], &[4.0]) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn nonfinite_rejected() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(Field::new(g, v), Err(Error::NonFinite { index: 3 }));
        assert!(Field::new(g, vec![0.0; 7]).is_err());
    }

    #[test]
    fn reflection_maps_even_functions_to_themselves() {
        let g = Grid::new(2, 5.0, 16).unwrap();
        let f = Field::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
        assert!(f.asymmetry() < 1e-15);
        let odd = Field::from_fn(g, |x| x[0]);
        let r = odd.reflected_axis(0);
        // x_0 = -L maps to itself, every other sample flips sign
        assert_eq!(r.values()[16 * 3], -odd.values()[16 * 3]);
    }
}
