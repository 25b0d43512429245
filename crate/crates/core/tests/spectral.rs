mod common;

use std::f64::consts::PI;

use common::{naive_frac_lap_1d, random_band_limited};
use fracspike::{fractional_laplacian, resolvent, Field, Grid, SpectralOps};
use proptest::prelude::*;

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plancherel(seed in any::<u64>(), dim in 1usize..=2, modes in 1usize..12) {
        let grid = Grid::new(dim, 7.5, if dim == 1 { 128 } else { 32 }).unwrap();
        let f = random_band_limited(grid, modes, seed);
        let ops = SpectralOps::new(grid, 0.5).unwrap();
        let physical = grid.cell_volume() * f.values().iter().map(|v| v * v).sum::<f64>();
        prop_assert!((ops.spectral_energy(&f) - physical).abs() <= 1e-12 * physical);
    }

    #[test]
    fn composition_with_the_resolvent(seed in any::<u64>(), s in 0.05f64..0.95, m in 0.1f64..5.0, dim in 1usize..=2) {
        let grid = Grid::new(dim, 10.0, if dim == 1 { 256 } else { 64 }).unwrap();
        let f = random_band_limited(grid, 8, seed);
        let lf = fractional_laplacian(&f, s).unwrap().axpy(m, &f);
        let back = resolvent(&lf, s, m).unwrap();
        prop_assert!(rel_inf(back.values(), f.values()) <= 1e-10);
    }

    #[test]
    fn fft_matches_direct_transform(seed in any::<u64>(), s in 0.05f64..0.95) {
        let grid = Grid::new(1, 5.0, 64).unwrap();
        let f = random_band_limited(grid, 20, seed);
        let fast = fractional_laplacian(&f, s).unwrap();
        prop_assert!(rel_inf(fast.values(), &naive_frac_lap_1d(&f, s)) <= 1e-11);
    }

    #[test]
    fn multiplier_monotone_in_s(k in 1usize..63, s1 in 0.05f64..0.9, ds in 0.01f64..0.09) {
        let grid = Grid::new(1, 20.0, 128).unwrap();
        let (a, b) = (SpectralOps::new(grid, s1).unwrap(), SpectralOps::new(grid, s1 + ds).unwrap());
        let xi = PI * k as f64 / 20.0;
        let (wa, wb) = (a.symbol()[k], b.symbol()[k]);
        if xi > 1.0 {
            prop_assert!(wb > wa);
        } else if xi < 1.0 {
            prop_assert!(wb < wa);
        }
    }

    #[test]
    fn resolvent_preserves_positivity(seed in any::<u64>(), s in 0.1f64..0.9, m in 0.2f64..3.0) {
        let grid = Grid::new(1, 10.0, 256).unwrap();
        // smooth non-negative data: squares of band-limited fields
        let g = random_band_limited(grid, 6, seed).map(|v| v * v);
        let t = resolvent(&g, s, m).unwrap();
        prop_assert!(t.min() >= -1e-10 * g.norm_inf(), "min {}", t.min());
    }

    #[test]
    fn energy_form_is_symmetric_and_non_negative(sa in any::<u64>(), sb in any::<u64>(), s in 0.05f64..0.95) {
        let grid = Grid::new(2, 6.0, 32).unwrap();
        let (f, g) = (random_band_limited(grid, 5, sa), random_band_limited(grid, 5, sb));
        let ops = SpectralOps::new(grid, s).unwrap();
        let (lf, lg) = (ops.fractional_laplacian(&f).unwrap(), ops.fractional_laplacian(&g).unwrap());
        let (a, b) = (f.dot(&lg), lf.dot(&g));
        prop_assert!((a - b).abs() <= 1e-11 * (f.norm_l2() * lg.norm_l2()));
        prop_assert!(ops.dirichlet_form(&f) >= 0.0);
    }

    #[test]
    fn translation_is_a_group_action(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = Grid::new(1, 8.0, 128).unwrap();
        let f = random_band_limited(grid, 10, seed);
        let ops = SpectralOps::new(grid, 0.5).unwrap();
        let two = ops.translate(&ops.translate(&f, &[a]), &[b]);
        let one = ops.translate(&f, &[a + b]);
        prop_assert!(rel_inf(two.values(), one.values()) <= 1e-11);
        // a whole-cell shift is an exact index rotation
        let h = grid.spacing();
        let shifted = ops.translate(&f, &[3.0 * h]);
        let rotated: Vec<f64> = (0..128).map(|i| f.values()[(i + 128 - 3) % 128]).collect();
        prop_assert!(rel_inf(shifted.values(), &rotated) <= 1e-12);
    }
}

/// Discrete Hölder modulus of `T_m g` with exponent `min(1, 2s)`, bounded uniformly in `M`.
#[test]
fn resolvent_holder_modulus_is_mesh_independent() {
    for s in [0.25f64, 0.4, 0.75] {
        let alpha = (2.0 * s).min(1.0);
        let mut moduli = Vec::new();
        for m in [256, 512, 1024] {
            let grid = Grid::new(1, 10.0, m).unwrap();
            // bounded, discontinuous data: a sign pattern with jumps
            let g = Field::from_fn(grid, |x| if (x[0] * 0.7).sin() > 0.0 { 1.0 } else { -1.0 });
            let t = resolvent(&g, s, 1.0).unwrap();
            let h = grid.spacing();
            let v = t.values();
            let modulus = (0..m).map(|i| (v[(i + 1) % m] - v[i]).abs()).fold(0.0f64, f64::max) / h.powf(alpha);
            moduli.push(modulus / g.norm_inf());
        }
        let (lo, hi) = moduli.iter().fold((f64::INFINITY, 0.0f64), |(a, b): (f64, f64), v| (a.min(*v), b.max(*v)));
        // s < 1/2 carries a Gibbs-type factor at jumps; the bound only has to stay M-independent
        assert!(hi <= 3.0 * lo, "s = {s}: moduli {moduli:?}");
    }
}
