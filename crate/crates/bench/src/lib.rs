//! Fixtures shared by the solver benchmarks.

use fracspike::{
    build_ansatz, solve_ground_state, AnsatzBundle, AnsatzOptions, Field, FracParams, Grid, GroundState, Potential,
    Result, SolverOptions, SpikeConfig,
};

/// A smooth, non-symmetric test field.
pub fn smooth_field(grid: Grid) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x[..grid.dim()].iter().map(|v| v * v).sum();
        (-0.3 * r2).exp() * (1.0 + 0.4 * (0.7 * x[0]).sin())
    })
}

/// The `s = 1/2, p = 2` ground state on `[-L, L)^N`.
pub fn ground_state(dim: usize, half_width: f64, points: usize) -> Result<GroundState> {
    let params = FracParams::new(0.5, 2.0, dim)?;
    solve_ground_state(params, 1.0, Grid::new(dim, half_width, points)?, SolverOptions::default())
}

/// Two spikes at `ξ = ±0.6` in the well `2 + |x|²/(1 + |x|²)` at `ε = 0.1`.
pub fn two_spike_bundle(gs: &GroundState) -> Result<AnsatzBundle> {
    let v = Potential::builtin("well", &[2.0, 1.0], 1)?;
    let cfg = SpikeConfig::new(vec![vec![-6.0], vec![6.0]], 0.1, 0.1, 2.0);
    build_ansatz(&v, &cfg, gs, AnsatzOptions::default())
}
