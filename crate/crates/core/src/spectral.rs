//! Fourier-multiplier operators on the periodic grid.
//!
//! Torus frequencies are `ξ = π n / L` with `n ∈ [-M/2, M/2)` per axis. The
//! fractional Laplacian has symbol `|ξ|^{2s}` (zero at `ξ = 0`), the resolvent
//! `T_m = ((-Δ)^s + m)^{-1}` has symbol `1 / (|ξ|^{2s} + m)`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(m: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(m), p.plan_fft_inverse(m))
    })
}

/// Signed integer frequency of FFT bin `k` on an `m`-point axis.
pub fn signed_mode(k: usize, m: usize) -> i64 {
    if k < m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Angular wavenumbers `π n / L` in FFT bin order.
pub fn wavenumbers(grid: &Grid) -> Vec<f64> {
    let m = grid.points_per_axis();
    let base = std::f64::consts::PI / grid.half_width();
    (0..m).map(|k| base * signed_mode(k, m) as f64).collect()
}

/// Forward/inverse DFT on a grid (unnormalized forward, `1/M^N` on inverse).
#[derive(Clone)]
pub struct Transform {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("grid", &self.grid).finish()
    }
}

impl Transform {
    pub fn new(grid: Grid) -> Self {
        let (fwd, inv) = plans(grid.points_per_axis());
        Self { grid, fwd, inv }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.grid.points_per_axis();
        match self.grid.dim() {
            1 => plan.process(data),
            _ => {
                // rows (contiguous), then columns through a scratch buffer
                plan.process(data);
                let mut col = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..m {
                    for i in 0..m {
                        col[i] = data[i * m + j];
                    }
                    plan.process(&mut col);
                    for i in 0..m {
                        data[i * m + j] = col[i];
                    }
                }
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut data, &self.fwd);
        data
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut data, &self.inv);
        let norm = 1.0 / self.grid.len() as f64;
        data.into_iter().map(|c| c.re * norm).collect()
    }
}

/// Precomputed multipliers for one grid and one fractional order.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    transform: Transform,
    s: f64,
    k_axis: Vec<f64>,
    // |ξ|^{2s} in FFT order
    symbol: Vec<f64>,
}

impl SpectralOps {
    /// Accepts `0 < s <= 1`; `s = 1` is the ordinary Laplacian, admitted for cross-checks.
    pub fn new(grid: Grid, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidParameter(format!("s = {s} must lie in (0, 1]")));
        }
        let k_axis = wavenumbers(&grid);
        let m = grid.points_per_axis();
        let symbol = match grid.dim() {
            1 => k_axis.iter().map(|k| (k * k).powf(s)).collect(),
            _ => (0..m * m)
                .map(|idx| {
                    let (a, b) = (k_axis[idx / m], k_axis[idx % m]);
                    (a * a + b * b).powf(s)
                })
                .collect(),
        };
        Ok(Self { transform: Transform::new(grid), s, k_axis, symbol })
    }

    pub fn grid(&self) -> &Grid {
        self.transform.grid()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// `|ξ|^{2s}` in FFT bin order.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        f.check_finite()
    }

    /// Applies a real even multiplier given per FFT bin.
    pub fn apply_real_symbol(&self, values: &[f64], symbol: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut hat = self.transform.forward(values);
        for (i, c) in hat.iter_mut().enumerate() {
            *c *= symbol(i);
        }
        self.transform.inverse_real(hat)
    }

    pub fn frac_lap_raw(&self, values: &[f64]) -> Vec<f64> {
        self.apply_real_symbol(values, |i| self.symbol[i])
    }

    pub fn resolvent_raw(&self, values: &[f64], m: f64) -> Vec<f64> {
        self.apply_real_symbol(values, |i| 1.0 / (self.symbol[i] + m))
    }

    /// `(-Δ)^s f`.
    pub fn fractional_laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        Ok(Field::from_raw(*self.grid(), self.frac_lap_raw(f.values())))
    }

    /// `T_m g = ((-Δ)^s + m)^{-1} g`; requires `m > 0`.
    pub fn resolvent(&self, g: &Field, m: f64) -> Result<Field> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!("resolvent shift m = {m} must be positive")));
        }
        self.check(g)?;
        Ok(Field::from_raw(*self.grid(), self.resolvent_raw(g.values(), m)))
    }

    /// Spectral partial derivative along `axis`; the Nyquist mode is dropped.
    pub fn derivative(&self, f: &Field, axis: usize) -> Field {
        let m = self.grid().points_per_axis();
        let dim = self.grid().dim();
        let mut hat = self.transform.forward(f.values());
        for (idx, c) in hat.iter_mut().enumerate() {
            let k = if dim == 1 {
                idx
            } else if axis == 0 {
                idx / m
            } else {
                idx % m
            };
            let xi = if k == m / 2 { 0.0 } else { self.k_axis[k] };
            *c *= Complex64::new(0.0, xi);
        }
        Field::from_raw(*self.grid(), self.transform.inverse_real(hat))
    }

    /// Band-limited translation: returns `f(x - shift)`.
    pub fn translate(&self, f: &Field, shift: &[f64]) -> Field {
        let m = self.grid().points_per_axis();
        let dim = self.grid().dim();
        if shift.iter().all(|&a| a == 0.0) {
            return f.clone();
        }
        let phase_axis = |a: f64| -> Vec<Complex64> {
            self.k_axis
                .iter()
                .enumerate()
                .map(|(k, &xi)| {
                    if k == m / 2 {
                        // Nyquist: keep the real (cosine) part of the phase
                        Complex64::new((xi * a).cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, -xi * a)
                    }
                })
                .collect()
        };
        let mut hat = self.transform.forward(f.values());
        let p0 = phase_axis(shift[0]);
        if dim == 1 {
            for (c, p) in hat.iter_mut().zip(&p0) {
                *c *= p;
            }
        } else {
            let p1 = phase_axis(shift[1]);
            for (idx, c) in hat.iter_mut().enumerate() {
                *c *= p0[idx / m] * p1[idx % m];
            }
        }
        Field::from_raw(*self.grid(), self.transform.inverse_real(hat))
    }

    /// Frequency-domain quadratic form `h^N / M^N Σ |f̂|^2`, equal to `h^N Σ f^2`.
    pub fn spectral_energy(&self, f: &Field) -> f64 {
        let hat = self.transform.forward(f.values());
        let n = self.grid().len() as f64;
        self.grid().cell_volume() * hat.iter().map(|c| c.norm_sqr()).sum::<f64>() / n
    }

    /// `h^N Σ f (-Δ)^s f` evaluated in frequency space.
    pub fn dirichlet_form(&self, f: &Field) -> f64 {
        let hat = self.transform.forward(f.values());
        let n = self.grid().len() as f64;
        self.grid().cell_volume()
            * hat.iter().zip(&self.symbol).map(|(c, w)| c.norm_sqr() * w).sum::<f64>()
            / n
    }
}

/// `(-Δ)^s f` on the torus of `f`'s grid.
pub fn fractional_laplacian(f: &Field, s: f64) -> Result<Field> {
    SpectralOps::new(*f.grid(), s)?.fractional_laplacian(f)
}

/// `((-Δ)^s + m)^{-1} g` on the torus of `g`'s grid.
pub fn resolvent(g: &Field, s: f64, m: f64) -> Result<Field> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolvent shift m = {m} must be positive")));
    }
    SpectralOps::new(*g.grid(), s)?.resolvent(g, m)
}
