//! Radial profile of the resolvent kernel `k = ((-Δ)^s + m)^{-1} δ`.
//!
//! The far field obeys `k(r) r^{N+2s} → γ`. On the torus the computed kernel is
//! the periodization `Σ_n k(x + 2Ln)`; the image sum is estimated from the
//! current power-law fit and removed before refitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::rates::least_squares_line;
use crate::spectral::{wavenumbers, SpectralOps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Fit window as fractions of `L`.
    pub window: (f64, f64),
    /// Remove the contribution of periodic images before fitting.
    pub correct_images: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { window: (0.2, 0.4), correct_images: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Plateau of `k(r) r^{N+2s}` over the fit window.
    pub gamma_fit: f64,
    /// False when the plateau varies by more than 10% over the window.
    pub gamma_valid: bool,
    /// Relative variation `(max - min) / mean` of the plateau samples.
    pub plateau_variation: f64,
    /// Log-log slope of the (image-corrected) far field.
    pub slope: f64,
    /// `h^N Σ k`.
    pub mass: f64,
    pub window: (f64, f64),
    /// `k(L/2) / k(0)`.
    pub tail_ratio: f64,
    /// Maximum `|k(x) - k(-x)|`.
    pub asymmetry: f64,
}

/// Lattice sum `Σ_{n ≠ 0} |x + 2Ln|^{-a}` (1D exact-ish, 2D truncated plus integral tail).
fn image_sum(grid: &Grid, x: &[f64], a: f64) -> f64 {
    image_sum_truncated(grid, x, a, if grid.dim() == 1 { 2000 } else { 60 })
}

/// [`image_sum`] with `nmax` explicit image shells before the integral tail.
pub(crate) fn image_sum_truncated(grid: &Grid, x: &[f64], a: f64, nmax: i64) -> f64 {
    let period = 2.0 * grid.half_width();
    match grid.dim() {
        1 => {
            let mut sum = 0.0;
            for n in 1..=nmax {
                let n = n as f64;
                sum += (x[0] + period * n).abs().powf(-a) + (x[0] - period * n).abs().powf(-a);
            }
            // tail ∫_{nmax+1/2}^∞ 2 (P n)^{-a} dn
            sum + 2.0 * period.powf(-a) * (nmax as f64 + 0.5).powf(1.0 - a) / (a - 1.0)
        }
        _ => {
            let mut sum = 0.0;
            for i in -nmax..=nmax {
                for j in -nmax..=nmax {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let dx = x[0] + period * i as f64;
                    let dy = x[1] + period * j as f64;
                    sum += (dx * dx + dy * dy).powf(-0.5 * a);
                }
            }
            // tail ∫_{r > R} r^{-a} 2πr dr / P^2 with R = (nmax + 1/2) P
            let r = (nmax as f64 + 0.5) * period;
            sum + 2.0 * std::f64::consts::PI * r.powf(2.0 - a) / ((a - 2.0) * period * period)
        }
    }
}

pub(crate) struct Radial {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    // representative points (for image sums)
    pub points: Vec<[f64; 2]>,
}

pub(crate) fn radial_bins(field: &Field) -> Radial {
    let grid = field.grid();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let v = field.values();
    match grid.dim() {
        1 => {
            let c = m / 2;
            let mut radii = Vec::new();
            let mut values = Vec::new();
            let mut points = Vec::new();
            for i in 0..=m / 2 {
                let right = v[(c + i) % m];
                let left = v[(c + m - i) % m];
                radii.push(i as f64 * h);
                values.push(0.5 * (left + right));
                points.push([i as f64 * h, 0.0]);
            }
            Radial { radii, values, points }
        }
        _ => {
            let nbins = m / 2 + 1;
            let mut sum = vec![0.0; nbins];
            let mut rsum = vec![0.0; nbins];
            let mut count = vec![0usize; nbins];
            for (idx, val) in v.iter().enumerate() {
                let p = grid.point(idx);
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                let b = (r / h).round() as usize;
                if b < nbins && r <= grid.half_width() {
                    sum[b] += val;
                    rsum[b] += r;
                    count[b] += 1;
                }
            }
            let mut radii = Vec::new();
            let mut values = Vec::new();
            let mut points = Vec::new();
            for b in 0..nbins {
                if count[b] > 0 {
                    let r = rsum[b] / count[b] as f64;
                    radii.push(r);
                    values.push(sum[b] / count[b] as f64);
                    // diagonal direction: images of a radial bin average out
                    points.push([r / 2f64.sqrt(), r / 2f64.sqrt()]);
                }
            }
            Radial { radii, values, points }
        }
    }
}

/// Result of a far-field power-law fit `f(r) ≈ C r^{slope}` on a window.
#[derive(Debug, Clone)]
pub(crate) struct FarFieldFit {
    pub slope: f64,
    /// Amplitude `C` of the model `C (r^{slope} + images)`.
    pub constant: f64,
    /// Mean of `f(r) r^{exponent}` over the window, image-subtracted when modelled.
    pub plateau: f64,
    pub plateau_variation: f64,
}

/// Fits the far field of radially binned samples over `window` (fractions of `L`).
/// `exponent` is the power used for the plateau `f(r) r^{exponent}`.
pub(crate) fn fit_far_field(
    grid: &Grid,
    radial: &Radial,
    exponent: f64,
    window: (f64, f64),
    correct_images: bool,
) -> Result<FarFieldFit> {
    let (w0, w1) = window;
    if !(0.0 < w0 && w0 < w1 && w1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("fit window {window:?} invalid")));
    }
    let l = grid.half_width();
    let in_window: Vec<usize> = (0..radial.radii.len())
        .filter(|&i| radial.radii[i] >= w0 * l && radial.radii[i] <= w1 * l)
        .collect();
    if in_window.len() < 3 {
        return Err(Error::Resolution("fewer than 3 radial samples in fit window".into()));
    }
    if in_window.iter().any(|&i| radial.values[i] <= 0.0) {
        return Err(Error::InvalidParameter("far field not positive on the fit window".into()));
    }
    // at most 64 evenly spread samples enter the fit
    let stride = in_window.len().div_ceil(64);
    let fit_idx: Vec<usize> = in_window.iter().copied().step_by(stride).collect();
    let log_f: Vec<f64> = fit_idx.iter().map(|&i| radial.values[i].ln()).collect();
    let log_r: Vec<f64> = fit_idx.iter().map(|&i| radial.radii[i].ln()).collect();
    let images = |i: usize, a: f64| {
        let p = radial.points[i];
        image_sum(grid, &p[..grid.dim()], a)
    };
    // least squares in log space with the log-constant profiled out
    let misfit = |a: f64| -> (f64, f64) {
        let model: Vec<f64> =
            fit_idx.iter().map(|&i| (radial.radii[i].powf(-a) + images(i, a)).ln()).collect();
        let n = model.len() as f64;
        let lc = log_f.iter().zip(&model).map(|(f, m)| f - m).sum::<f64>() / n;
        let r = log_f.iter().zip(&model).map(|(f, m)| (f - m - lc).powi(2)).sum::<f64>();
        (r, lc)
    };
    let dim = grid.dim() as f64;
    let (slope, constant) = if correct_images {
        // image sums need a > N to converge
        let (mut lo, mut hi) = (dim + 0.02, dim + 3.0);
        let golden = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - golden * (hi - lo);
        let mut x2 = lo + golden * (hi - lo);
        let (mut f1, mut f2) = (misfit(x1).0, misfit(x2).0);
        while hi - lo > 1e-6 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - golden * (hi - lo);
                f1 = misfit(x1).0;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + golden * (hi - lo);
                f2 = misfit(x2).0;
            }
        }
        let a = 0.5 * (lo + hi);
        (-a, misfit(a).1.exp())
    } else {
        let (sl, icpt) = least_squares_line(&log_r, &log_f);
        (sl, icpt.exp())
    };
    let plateau: Vec<f64> = in_window
        .iter()
        .map(|&i| {
            let mut v = radial.values[i];
            if correct_images {
                v -= constant * images(i, -slope);
            }
            v * radial.radii[i].powf(exponent)
        })
        .collect();
    let mean = plateau.iter().sum::<f64>() / plateau.len() as f64;
    let (lo, hi) = plateau
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(FarFieldFit { slope, constant, plateau: mean, plateau_variation: (hi - lo) / mean.abs() })
}

/// Resolvent applied to a (mollified) discrete delta of mass one at the origin, radially binned.
pub fn kernel_profile(s: f64, m: f64, grid: Grid) -> Result<KernelProfile> {
    kernel_profile_with(s, m, grid, KernelOptions::default())
}

pub fn kernel_profile_with(s: f64, m: f64, grid: Grid, opts: KernelOptions) -> Result<KernelProfile> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolvent shift m = {m} must be positive")));
    }
    let ops = SpectralOps::new(grid, s)?;
    let mpa = grid.points_per_axis();
    let mut delta = vec![0.0; grid.len()];
    delta[grid.flat_index([mpa / 2, mpa / 2])] = 1.0 / grid.cell_volume();
    // A bare delta has a flat spectrum, and cutting it off at the Nyquist
    // frequency leaves an alternating (-1)^i ripple decaying only like 1/r,
    // which swamps the r^{-(N+2s)} tail. A Gaussian filter exp(-(|ξ|/ξ_c)^2)
    // with ξ_c = ξ_Nyquist / 4 mollifies the delta over ~2h and keeps its mass.
    let xi_c = 0.25 * std::f64::consts::PI / grid.spacing();
    let k_axis = wavenumbers(&grid);
    let xi2 = |idx: usize| match grid.dim() {
        1 => k_axis[idx] * k_axis[idx],
        _ => k_axis[idx / mpa].powi(2) + k_axis[idx % mpa].powi(2),
    };
    let symbol = ops.symbol();
    let values =
        ops.apply_real_symbol(&delta, |i| (-xi2(i) / (xi_c * xi_c)).exp() / (symbol[i] + m));
    let k = Field::new(grid, values)?;

    let mass = k.integral();
    let asymmetry = k
        .values()
        .iter()
        .zip(k.reflected().values())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));

    let radial = radial_bins(&k);
    let fit = fit_far_field(&grid, &radial, grid.dim() as f64 + 2.0 * s, opts.window, opts.correct_images)?;
    let gamma_valid = fit.plateau > 0.0 && fit.plateau_variation <= 0.1 && fit.slope.is_finite();

    let l = grid.half_width();
    let half = radial
        .radii
        .iter()
        .position(|&r| r >= 0.5 * l)
        .map(|i| radial.values[i])
        .unwrap_or(f64::NAN);
    let tail_ratio = half / radial.values[0];

    Ok(KernelProfile {
        radii: radial.radii,
        values: radial.values,
        gamma_fit: fit.plateau,
        gamma_valid,
        plateau_variation: fit.plateau_variation,
        slope: fit.slope,
        mass,
        window: (opts.window.0 * l, opts.window.1 * l),
        tail_ratio,
        asymmetry,
    })
}
