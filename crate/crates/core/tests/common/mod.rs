//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use fracspike::{Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

/// Composite Gauss–Legendre on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(10);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            sum += wi * f(c + 0.5 * h * xi);
        }
    }
    0.5 * h * sum
}

/// `C_{1,s}` of the singular-integral form of `(-Δ)^s` on the line.
pub fn c1s(s: f64) -> f64 {
    s * 4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(1.0 - s))
}

/// `(-Δ)^s e^{-x²}` on ℝ by principal-value quadrature
/// `C ∫_0^∞ (2u(x) - u(x+t) - u(x-t)) t^{-1-2s} dt`.
pub fn pv_frac_lap_gaussian(x: f64, s: f64) -> f64 {
    let u = |y: f64| (-y * y).exp();
    let num = |t: f64| {
        if t < 1e-3 {
            // Taylor expansion avoids cancellation
            let e = u(x);
            let d2 = (4.0 * x * x - 2.0) * e;
            let d4 = (16.0 * x.powi(4) - 48.0 * x * x + 12.0) * e;
            -d2 * t * t - d4 * t.powi(4) / 12.0
        } else {
            2.0 * u(x) - u(x + t) - u(x - t)
        }
    };
    // t = τ^m makes the integrand near 0 behave like τ^{2m(1-s)-1}
    let m = 1.0 / (1.0 - s);
    let near = integrate(|tau| num(tau.powf(m)) / tau.powf(m * (1.0 + 2.0 * s)) * m * tau.powf(m - 1.0), 0.0, 1.0, 200);
    let t_max = x.abs() + 12.0;
    let far = integrate(|t| num(t) / t.powf(1.0 + 2.0 * s), 1.0, t_max, 800);
    let tail = 2.0 * u(x) * t_max.powf(-2.0 * s) / (2.0 * s);
    c1s(s) * (near + far + tail)
}

/// Band-limited random field with `modes` Fourier modes per axis, deterministic in `seed`.
pub fn random_band_limited(grid: Grid, modes: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.half_width();
    let coefs: Vec<(f64, f64, f64, f64)> = (0..modes * grid.dim())
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI), rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    Field::from_fn(grid, |x| {
        let mut v = 0.0;
        for (k, c) in coefs.iter().enumerate() {
            let n = (k % modes + 1) as f64;
            let axis = k / modes;
            v += c.0 * (PI * n * x[axis] / l + c.1).cos();
            if grid.dim() == 2 {
                v += c.2 * (PI * n * (x[0] + x[1]) / l + c.3).sin() / n;
            }
        }
        v
    })
}

/// `2λ / (1 + λ² x²)`: the `s = 1/2, p = 2` ground state on the line.
pub fn half_laplacian_soliton(lambda: f64, x: f64) -> f64 {
    2.0 * lambda / (1.0 + lambda * lambda * x * x)
}

/// `(-Δ)^s f` by a direct O(M²) DFT, independent of the FFT path.
pub fn naive_frac_lap_1d(f: &Field, s: f64) -> Vec<f64> {
    let g = f.grid();
    let m = g.points_per_axis();
    let l = g.half_width();
    let x = f.values();
    let mut out = vec![0.0; m];
    for k in 0..m {
        let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        let xi = PI * kk / l;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let a = -2.0 * PI * (k * j) as f64 / m as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let w = xi.abs().powf(2.0 * s);
        for (j, o) in out.iter_mut().enumerate() {
            let a = 2.0 * PI * (k * j) as f64 / m as f64;
            *o += w * (re * a.cos() - im * a.sin()) / m as f64;
        }
    }
    out
}
