use fracspike::{
    build_ansatz, solve_ground_state, AnsatzOptions, FracParams, GroundState, Grid, Potential, SolverOptions,
    SpectralOps, SpikeConfig,
};
use proptest::prelude::*;

fn ground_state(l: f64, m: usize) -> GroundState {
    let params = FracParams::new(0.5, 2.0, 1).unwrap();
    solve_ground_state(params, 1.0, Grid::new(1, l, m).unwrap(), SolverOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn translating_the_center_translates_the_ansatz(q in -15.0f64..15.0) {
        let g = ground_state(40.0, 512);
        let v = Potential::builtin("constant", &[1.3], 1).unwrap();
        let at = |c: f64| build_ansatz(&v, &SpikeConfig::new(vec![vec![c]], 0.1, 0.1, 2.0), &g, AnsatzOptions::default()).unwrap();
        let (moved, centered) = (at(q), at(0.0));
        let ops = SpectralOps::new(*g.grid(), 0.5).unwrap();
        let shifted = ops.translate(&centered.w, &[q]);
        let err = moved.w.axpy(-1.0, &shifted).norm_inf() / moved.w.norm_inf();
        prop_assert!(err <= 1e-10, "W mismatch {err:e}");
        let dz = moved.z[0][0].axpy(-1.0, &ops.translate(&centered.z[0][0], &[q])).norm_inf() / moved.z[0][0].norm_inf();
        prop_assert!(dz <= 1e-9, "Z mismatch {dz:e}");
    }
}

#[test]
fn symmetric_pair_in_an_even_potential_has_an_even_error() {
    let g = ground_state(40.0, 1024);
    let v = Potential::builtin("well", &[2.0, 1.0], 1).unwrap();
    for d in [6.0, 10.0] {
        let cfg = SpikeConfig::new(vec![vec![-d], vec![d]], 0.1, 0.1, 2.0);
        let b = build_ansatz(&v, &cfg, &g, AnsatzOptions::default()).unwrap();
        assert!(b.e.asymmetry() <= 1e-8, "d={d}: asymmetry {:e}", b.e.asymmetry());
        assert!(b.w.asymmetry() <= 1e-8);
        assert!(b.parity_defect() <= 1e-8, "parity defect {:e}", b.parity_defect());
    }
}

#[test]
fn kernel_elements_decouple_with_distance() {
    let g = ground_state(80.0, 2048);
    let v = Potential::builtin("constant", &[1.0], 1).unwrap();
    let mut scaled = Vec::new();
    for d in [10.0, 20.0, 40.0] {
        let cfg = SpikeConfig::new(vec![vec![-d / 2.0], vec![d / 2.0]], 0.1, 0.1, 2.0);
        let b = build_ansatz(&v, &cfg, &g, AnsatzOptions::default()).unwrap();
        let (z1, z2) = (&b.z[0][0], &b.z[1][0]);
        let ratio = z1.dot(z2).abs() / (z1.norm_l2() * z2.norm_l2());
        // off-diagonal Gram entries relative to the diagonal, times d^N
        scaled.push(ratio * d);
    }
    assert!(scaled.iter().all(|r| *r <= 1.5 * scaled[0]), "ratio · d = {scaled:?}");
    assert!(scaled[2] < scaled[0], "ratio · d = {scaled:?}");
}
