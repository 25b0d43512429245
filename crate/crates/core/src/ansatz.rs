//! Spike configurations and the multi-spike ansatz `W_q = Σ w_{λ_j}(x - q_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::ground_state::{spike_profile, GroundState, SolverOptions};
use crate::norms::WeightedNorm;
use crate::potential::Potential;
use crate::spectral::SpectralOps;

/// Spike centers in the inner variable `q = ξ / ε`, plus the parameters of the
/// admissible set: `|q_j| ≤ 1/(δε)` and pairwise separation `≥ R_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeConfig {
    pub centers: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub delta: f64,
    pub r_min: f64,
}

/// Outcome of [`config_valid`]; `violations` names every failed constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigCheck {
    pub valid: bool,
    pub violations: Vec<String>,
}

impl SpikeConfig {
    pub fn new(centers: Vec<Vec<f64>>, epsilon: f64, delta: f64, r_min: f64) -> Self {
        Self { centers, epsilon, delta, r_min }
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Outer-variable centers `ξ_j = ε q_j`.
    pub fn xi(&self) -> Vec<Vec<f64>> {
        self.centers.iter().map(|q| q.iter().map(|v| v * self.epsilon).collect()).collect()
    }

    /// Spike heights `λ_j = V(ε q_j)`, always recomputed from the centers.
    pub fn lambdas(&self, v: &Potential) -> Vec<f64> {
        self.xi().iter().map(|x| v.eval(x)).collect()
    }

    /// Same parameters, new centers.
    pub fn with_centers(&self, centers: Vec<Vec<f64>>) -> Self {
        Self { centers, ..self.clone() }
    }

    /// Smallest pairwise periodic distance, `∞` for one spike.
    pub fn min_separation(&self, grid: &Grid) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                d = d.min(grid.distance(&self.centers[i], &self.centers[j]));
            }
        }
        d
    }
}

/// Checks the (closed) constraints of the admissible configuration set on `grid`.
pub fn config_valid(cfg: &SpikeConfig, grid: &Grid) -> ConfigCheck {
    let mut violations = Vec::new();
    if cfg.centers.is_empty() {
        violations.push("no spike centers".to_string());
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        violations.push(format!("epsilon = {} must be positive", cfg.epsilon));
    }
    if !(cfg.delta > 0.0 && cfg.delta.is_finite()) {
        violations.push(format!("delta = {} must be positive", cfg.delta));
    }
    if !(cfg.r_min >= 0.0) {
        violations.push(format!("R_min = {} must be non-negative", cfg.r_min));
    }
    let l = grid.half_width();
    let radius = 1.0 / (cfg.delta * cfg.epsilon);
    for (j, q) in cfg.centers.iter().enumerate() {
        if q.len() != grid.dim() || q.iter().any(|v| !v.is_finite()) {
            violations.push(format!("center {j} is not a finite {}-vector", grid.dim()));
            continue;
        }
        if q.iter().any(|&v| !(-l..l).contains(&v)) {
            violations.push(format!("center {j} = {q:?} lies outside the box [-{l}, {l})"));
        }
        let r = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > radius {
            violations.push(format!("|q_{j}| = {r} exceeds 1/(δε) = {radius}"));
        }
    }
    if violations.is_empty() {
        let slack = 1e-12 * cfg.r_min.max(1.0);
        for i in 0..cfg.k() {
            for j in i + 1..cfg.k() {
                let d = grid.distance(&cfg.centers[i], &cfg.centers[j]);
                if d + slack < cfg.r_min {
                    violations.push(format!("|q_{i} - q_{j}| = {d} is below R_min = {}", cfg.r_min));
                }
            }
        }
    }
    ConfigCheck { valid: violations.is_empty(), violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzOptions {
    /// Weight exponent of the `Y` norm; `None` picks the midpoint of `(N/2, (N+2s)/2)`.
    pub mu: Option<f64>,
    /// Polish each spike profile to the discrete equation at its `λ_j`.
    pub polish: bool,
    pub solver: SolverOptions,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self { mu: None, polish: true, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct AnsatzBundle {
    /// `W = Σ w_j`.
    pub w: Field,
    /// Translated spikes `w_j`.
    pub spikes: Vec<Field>,
    /// `z[i][j] = ∂_j w_i`.
    pub z: Vec<Vec<Field>>,
    /// `E = Σ (λ_j - V(εx)) w_j + (Σ w_j)_+^p - Σ (w_j)_+^p`.
    pub e: Field,
    pub e_norm_y: f64,
    pub lambdas: Vec<f64>,
    /// `V(εx)` on the grid.
    pub potential: Field,
    pub norm: WeightedNorm,
    pub p: f64,
    pub s: f64,
}

impl AnsatzBundle {
    pub fn grid(&self) -> &Grid {
        self.w.grid()
    }

    /// The `Z_ij` in row-major `(i, j)` order.
    pub fn z_flat(&self) -> Vec<&Field> {
        self.z.iter().flatten().collect()
    }

    /// `max_ij |⟨Z_ij, w_i⟩| / (‖Z_ij‖ ‖w_i‖)`, zero by parity.
    pub fn parity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, zi) in self.z.iter().enumerate() {
            for zij in zi {
                let r = zij.dot(&self.spikes[i]).abs() / (zij.norm_l2() * self.spikes[i].norm_l2());
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Builds `W_q`, the `Z_ij` and the error `E` for `cfg` from a ground state.
pub fn build_ansatz(
    v: &Potential,
    cfg: &SpikeConfig,
    gs: &GroundState,
    opts: AnsatzOptions,
) -> Result<AnsatzBundle> {
    let grid = *gs.grid();
    let check = config_valid(cfg, &grid);
    if !check.valid {
        return Err(Error::InvalidConfig(check.violations.join("; ")));
    }
    let lambdas = cfg.lambdas(v);
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::InvalidConfig(format!("spike height λ = {l} must be positive")));
    }
    let params = gs.params;
    let ops = SpectralOps::new(grid, params.s)?;
    let potential = v.sample(&grid, cfg.epsilon)?;

    // centered profiles, one per distinct height
    let mut centered: Vec<(f64, Field)> = Vec::new();
    let mut spikes = Vec::with_capacity(cfg.k());
    for (q, &lam) in cfg.centers.iter().zip(&lambdas) {
        let prof = match centered.iter().find(|(l, _)| *l == lam) {
            Some((_, f)) => f.clone(),
            None => {
                let f = if opts.polish {
                    spike_profile(gs, lam, opts.solver)?
                } else {
                    crate::ground_state::rescale(gs, lam)?
                };
                centered.push((lam, f.clone()));
                f
            }
        };
        spikes.push(ops.translate(&prof, q));
    }
    let z: Vec<Vec<Field>> =
        spikes.iter().map(|wj| (0..grid.dim()).map(|j| ops.derivative(wj, j)).collect()).collect();

    let p = params.p;
    let mut w = Field::zeros(grid);
    for wj in &spikes {
        w = w.axpy(1.0, wj);
    }
    let mut e = w.map(|u| u.max(0.0).powf(p));
    for (wj, &lam) in spikes.iter().zip(&lambdas) {
        let term = wj.zip_map(&potential, |a, vx| (lam - vx) * a - a.max(0.0).powf(p));
        e = e.axpy(1.0, &term);
    }
    let mu = opts.mu.unwrap_or_else(|| params.default_mu(grid.dim()));
    let norm = WeightedNorm::with_order(grid, &cfg.centers, mu, params.s)?;
    let e_norm_y = norm.norm(&e);
    Ok(AnsatzBundle { w, spikes, z, e, e_norm_y, lambdas, potential, norm, p, s: params.s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_ground_state;
    use crate::FracParams;

    fn cfg(centers: Vec<Vec<f64>>) -> SpikeConfig {
        SpikeConfig::new(centers, 0.1, 0.2, 5.0)
    }

    #[test]
    fn admissible_set_is_closed() {
        let g = Grid::new(1, 40.0, 256).unwrap();
        assert!(config_valid(&cfg(vec![vec![3.0]]), &g).valid);
        let same = config_valid(&cfg(vec![vec![1.0], vec![1.0]]), &g);
        assert!(!same.valid && same.violations[0].contains("R_min"));
        assert!(config_valid(&cfg(vec![vec![-2.5], vec![2.5]]), &g).valid);
        // |q| ≤ 1/(δε) = 50 passes the radius test but not the box
        let out = config_valid(&cfg(vec![vec![45.0]]), &g);
        assert!(!out.valid && out.violations[0].contains("box"));
        // periodic separation: -39 and 39 are 2 apart on the torus
        assert!(!config_valid(&cfg(vec![vec![-39.0], vec![39.0]]), &g).valid);
    }

    #[test]
    fn constant_potential_single_spike_is_exact() {
        let params = FracParams::new(0.5, 2.0, 1).unwrap();
        let grid = Grid::new(1, 40.0, 1024).unwrap();
        let gs = solve_ground_state(params, 1.0, grid, SolverOptions::default()).unwrap();
        let v = Potential::builtin("constant", &[1.3], 1).unwrap();
        let b = build_ansatz(&v, &cfg(vec![vec![2.7]]), &gs, AnsatzOptions::default()).unwrap();
        assert!(b.e.norm_inf() <= 1e-10, "{:e}", b.e.norm_inf());
        assert!(b.parity_defect() <= 1e-8);
        assert_eq!(b.lambdas, vec![1.3]);
    }
}
