//! Lowest eigenvalues of the linearization `L = (-Δ)^s + λ - p w^{p-1}` at a ground state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::{translation_modes, GroundState};
use crate::krylov::{lowest_eigenpairs, LanczosOptions};
use crate::newton::orthonormal_basis;
use crate::spectral::SpectralOps;

/// Eigenvalues with `|μ|` at most this are counted as kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Computed eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    /// Smallest norm of the projection of a kernel eigenvector onto `span{∂_j w}`.
    pub kernel_overlap: f64,
    /// Smallest `|μ|` among computed eigenvalues outside the kernel.
    pub spectral_gap: f64,
    pub lowest_eig: f64,
    /// Whether the lowest eigenvector has one sign (up to 1e-6 of its max).
    pub lowest_constant_sign: bool,
    /// False when the eigensolver stagnated; the other fields are then partial.
    pub converged: bool,
}

/// Smooth, deterministic start vectors with no special symmetry.
fn start_vector(n: usize, pass: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 + 0.5;
            (0.7548776662 * t * (pass as f64 + 1.0)).sin() + 0.5 * (0.5698402910 * t + pass as f64).cos()
        })
        .collect()
}

/// The `n_eigs` algebraically lowest eigenpairs of the linearization (these are the
/// smallest in magnitude together with the single negative eigenvalue).
pub fn linearization_spectrum(gs: &GroundState, n_eigs: usize) -> Result<SpectrumSummary> {
    if n_eigs == 0 {
        return Err(Error::InvalidParameter("n_eigs must be positive".into()));
    }
    let grid = *gs.grid();
    let ops = SpectralOps::new(grid, gs.params.s)?;
    let p = gs.params.p;
    let pot: Vec<f64> = gs
        .profile
        .values()
        .iter()
        .map(|&w| gs.lambda - p * w.max(0.0).powf(p - 1.0))
        .collect();
    let apply = |v: &[f64]| -> Vec<f64> {
        let lap = ops.frac_lap_raw(v);
        lap.iter().zip(v).zip(&pot).map(|((l, x), q)| l + q * x).collect()
    };
    let n = grid.len();
    let out = lowest_eigenpairs(apply, |pass| start_vector(n, pass), n_eigs, LanczosOptions::default());
    if out.pairs.is_empty() {
        return Err(Error::NotConverged { iterations: out.dimension_used, detail: "no Ritz pair".into() });
    }

    let modes = orthonormal_basis(&translation_modes(&ops, &gs.profile));
    let mut kernel_dim = 0;
    let mut kernel_overlap = f64::INFINITY;
    let mut spectral_gap = f64::INFINITY;
    for pair in &out.pairs {
        if pair.value.abs() <= KERNEL_THRESHOLD {
            kernel_dim += 1;
            let proj: f64 = modes
                .iter()
                .map(|m| crate::grid::dot(m, &pair.vector).powi(2))
                .sum::<f64>()
                .sqrt();
            kernel_overlap = kernel_overlap.min(proj);
        } else {
            spectral_gap = spectral_gap.min(pair.value.abs());
        }
    }
    if kernel_dim == 0 {
        kernel_overlap = 0.0;
    }
    let lowest = &out.pairs[0];
    let vmax = lowest.vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dominant = lowest.vector.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
    let lowest_constant_sign = lowest.vector.iter().all(|v| v * dominant.signum() >= -1e-6 * vmax);
    Ok(SpectrumSummary {
        eigenvalues: out.pairs.iter().map(|p| p.value).collect(),
        kernel_dim,
        kernel_overlap,
        spectral_gap,
        lowest_eig: lowest.value,
        lowest_constant_sign,
        converged: out.converged,
    })
}

impl GroundState {
    /// Attaches the summary of the `n_eigs` lowest eigenvalues.
    pub fn with_spectrum(mut self, n_eigs: usize) -> Result<Self> {
        self.spectrum = Some(linearization_spectrum(&self, n_eigs)?);
        Ok(self)
    }
}
