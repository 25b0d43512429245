use fracspike::{
    asymptotic_energy, brouwer_degree, fit_rate, reduced_energy, solve_ground_state, BoxRegion, FracParams, Grid,
    GroundState, Potential, ReducedOptions, SolverOptions, SpikeConfig,
};
use proptest::prelude::*;

fn ground_state(l: f64, m: usize) -> GroundState {
    let params = FracParams::new(0.5, 2.0, 1).unwrap();
    solve_ground_state(params, 1.0, Grid::new(1, l, m).unwrap(), SolverOptions::default()).unwrap()
}

fn relaxed() -> ReducedOptions {
    let mut r = ReducedOptions::default();
    r.correction.eta = 0.5;
    r
}

fn well() -> Potential {
    Potential::builtin("well", &[2.0, 1.0], 1).unwrap()
}

/// Spearman rank correlation.
fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    let ranks = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn single_spike_model_is_the_rescaled_ground_energy() {
    let g = ground_state(40.0, 512);
    let v = well();
    let theta = g.params.theta(1);
    for xi in [-0.7, 0.0, 0.3, 1.1] {
        let model = asymptotic_energy(&v, &[vec![xi]], 0.1, &g).unwrap();
        let expected = g.energy_j * v.eval(&[xi]).powf(theta);
        assert!((model - expected).abs() <= 1e-12 * expected.abs(), "ξ={xi}: {model} vs {expected}");
    }
}

#[test]
fn energy_gradient_tracks_the_multipliers() {
    let g = ground_state(40.0, 512);
    let v = well();
    let eps = 0.1;
    let (mut grads, mut cs) = (Vec::new(), Vec::new());
    for k in 0..10 {
        let xi = -0.6 + 1.2 * k as f64 / 9.0;
        let cfg = SpikeConfig::new(vec![vec![xi / eps]], eps, 0.1, 2.0);
        let r = reduced_energy(&v, &cfg, &g, relaxed()).unwrap();
        let (grad, c, alpha) = (r.grad_fd[0][0], r.c_matrix[0][0], r.alpha[0][0]);
        // ∇I = -α c to leading order
        let mismatch = (grad + alpha * c).abs() / grad.abs().max(alpha * c.abs());
        assert!(mismatch <= 0.05, "ξ={xi:.3}: ∇I {grad:e}, -αc {:e}", -alpha * c);
        grads.push(grad);
        cs.push(-c);
    }
    let rho = rank_correlation(&grads, &cs);
    assert!(rho >= 0.9, "rank correlation {rho}");
}

#[test]
fn relabeling_the_spikes_changes_nothing() {
    let g = ground_state(40.0, 1024);
    let v = well();
    let (a, b) = (vec![-4.0], vec![7.0]);
    let mut opts = relaxed();
    opts.fd_step = 1e-3;
    let one = reduced_energy(&v, &SpikeConfig::new(vec![a.clone(), b.clone()], 0.1, 0.1, 2.0), &g, opts).unwrap();
    let two = reduced_energy(&v, &SpikeConfig::new(vec![b, a], 0.1, 0.1, 2.0), &g, opts).unwrap();
    let (i1, i2) = (one.i_value.unwrap(), two.i_value.unwrap());
    assert!((i1 - i2).abs() <= 1e-10 * i1.abs(), "{i1} vs {i2}");
    let (m1, m2) = (one.asymptotic_value.unwrap(), two.asymptotic_value.unwrap());
    assert!((m1 - m2).abs() <= 1e-13 * m1.abs());
    for (j, k) in [(0, 1), (1, 0)] {
        let (c1, c2) = (one.c_matrix[j][0], two.c_matrix[k][0]);
        assert!((c1 - c2).abs() <= 1e-7 * one.max_abs_c(), "c mismatch {c1:e} vs {c2:e}");
        let (g1, g2) = (one.grad_fd[j][0], two.grad_fd[k][0]);
        assert!((g1 - g2).abs() <= 1e-6 * g1.abs().max(1e-9), "∇I mismatch {g1:e} vs {g2:e}");
    }
}

#[test]
fn expansion_gap_decays_quadratically_above_the_mesh_floor() {
    let g = ground_state(80.0, 2048);
    let v = well();
    let mut pairs = Vec::new();
    for eps in [0.4, 0.2, 0.1] {
        let cfg = SpikeConfig::new(vec![vec![0.5 / eps]], eps, 0.1, 2.0);
        let mut opts = relaxed();
        opts.fd_step = 1.0;
        let r = reduced_energy(&v, &cfg, &g, opts).unwrap();
        pairs.push((eps, r.asymptotic_gap.unwrap()));
    }
    let fit = fit_rate(&pairs).unwrap();
    // the rate is min(4s, 2) = 2 for s = 1/2
    assert!(fit.slope >= 1.8, "slope {} from {pairs:?}", fit.slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn degree_is_additive_over_box_splits(cut in -1.9f64..1.9, ycut in -0.9f64..0.9) {
        // zeros of ∇V at (±1, 0) and (0, 0); cuts must avoid them
        prop_assume!((cut.abs() - 1.0).abs() > 0.05 && cut.abs() > 0.05 && ycut.abs() > 0.05);
        let v = Potential::builtin("double_well", &[1.0, 1.0], 2).unwrap();
        let whole = brouwer_degree(&v, &BoxRegion::new(vec![-2.0, -1.0], vec![2.0, 1.0])).unwrap();
        let left = brouwer_degree(&v, &BoxRegion::new(vec![-2.0, -1.0], vec![cut, 1.0])).unwrap();
        let right = brouwer_degree(&v, &BoxRegion::new(vec![cut, -1.0], vec![2.0, 1.0])).unwrap();
        prop_assert_eq!(whole, left + right);
        let low = brouwer_degree(&v, &BoxRegion::new(vec![-2.0, -1.0], vec![2.0, ycut])).unwrap();
        let high = brouwer_degree(&v, &BoxRegion::new(vec![-2.0, ycut], vec![2.0, 1.0])).unwrap();
        prop_assert_eq!(whole, low + high);
        // a box free of zeros has degree zero
        let empty = brouwer_degree(&v, &BoxRegion::new(vec![-2.0, 0.1], vec![2.0, 1.0])).unwrap();
        prop_assert_eq!(empty, 0);
    }
}
