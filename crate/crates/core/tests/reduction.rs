mod common;

use common::random_band_limited;
use fracspike::{
    build_ansatz, fractional_laplacian, nonlinear_correction, projected_solve, solve_ground_state, AnsatzBundle,
    AnsatzOptions, CorrectionOptions, FracParams, Field, Grid, GroundState, Potential, SolverOptions, SpikeConfig,
};
use proptest::prelude::*;

fn ground_state() -> GroundState {
    let params = FracParams::new(0.5, 2.0, 1).unwrap();
    solve_ground_state(params, 1.0, Grid::new(1, 40.0, 1024).unwrap(), SolverOptions::default()).unwrap()
}

fn pair(g: &GroundState, q: f64) -> AnsatzBundle {
    let v = Potential::builtin("well", &[2.0, 1.0], 1).unwrap();
    let cfg = SpikeConfig::new(vec![vec![-q], vec![q]], 0.1, 0.1, 2.0);
    build_ansatz(&v, &cfg, g, AnsatzOptions::default()).unwrap()
}

/// `L φ = (-Δ)^s φ + V(εx) φ - p W_+^{p-1} φ`, assembled from the public pieces.
fn linearized(b: &AnsatzBundle, phi: &Field) -> Field {
    let p = b.p;
    let pot = b.potential.zip_map(&b.w, |v, w| v - p * w.max(0.0).powf(p - 1.0));
    fractional_laplacian(phi, b.s).unwrap().axpy(1.0, &pot.zip_map(phi, |a, f| a * f))
}

fn orthogonality(b: &AnsatzBundle, phi: &Field) -> f64 {
    b.z_flat().iter().map(|z| phi.dot(z).abs() / (phi.norm_l2() * z.norm_l2())).fold(0.0f64, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn projected_solve_satisfies_its_equation(seed in any::<u64>(), q in 4.0f64..9.0) {
        let g = ground_state();
        let b = pair(&g, q);
        let rhs = random_band_limited(*b.grid(), 10, seed).zip_map(&b.w, |r, w| r * w);
        let (phi, c) = projected_solve(&rhs, &b).unwrap();
        let mut expected = rhs.clone();
        for (zi, ci) in b.z.iter().zip(&c) {
            for (z, cij) in zi.iter().zip(ci) {
                expected = expected.axpy(*cij, z);
            }
        }
        let r = linearized(&b, &phi).axpy(-1.0, &expected);
        prop_assert!(r.norm_l2() <= 1e-8 * rhs.norm_l2(), "residual {:e}", r.norm_l2() / rhs.norm_l2());
        prop_assert!(orthogonality(&b, &phi) <= 1e-8);
    }
}

#[test]
fn every_fixed_point_iterate_stays_orthogonal() {
    let g = ground_state();
    let b = pair(&g, 6.0);
    for n in 1..=4 {
        let opts = CorrectionOptions { eta: 0.5, max_iter: n, ..Default::default() };
        let r = nonlinear_correction(&b, opts).unwrap();
        assert!(r.orthogonality_defect(&b) <= 1e-8, "after {n} steps: {:e}", r.orthogonality_defect(&b));
        assert!(orthogonality(&b, &r.phi) <= 1e-8);
    }
}

#[test]
fn mirrored_pair_has_opposite_multipliers() {
    let g = ground_state();
    for q in [5.0, 8.0] {
        let b = pair(&g, q);
        let r = nonlinear_correction(&b, CorrectionOptions { eta: 0.5, ..Default::default() }).unwrap();
        assert!(r.converged);
        let (c1, c2) = (r.c[0][0], r.c[1][0]);
        assert!((c1 + c2).abs() <= 1e-6 * c1.abs().max(1e-12), "q={q}: c = {c1:e}, {c2:e}");
        assert!(r.phi.asymmetry() <= 1e-8);
    }
}
