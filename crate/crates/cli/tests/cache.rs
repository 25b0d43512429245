use fracspike::{solve_ground_state, FracParams, Grid, SolverOptions};
use fracspike_cli::cache::{decode, encode, Cache, Key};
use tempfile::TempDir;

fn solved() -> (FracParams, Grid, fracspike::GroundState) {
    let params = FracParams::new(0.5, 2.0, 1).unwrap();
    let grid = Grid::new(1, 20.0, 256).unwrap();
    let gs = solve_ground_state(params, 1.0, grid, SolverOptions::default()).unwrap();
    (params, grid, gs)
}

#[test]
fn store_then_load_is_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let cache = Cache::new(tmp.path());
    let (params, grid, gs) = solved();
    let key = Key::new(params, &grid);
    cache.store(&key, &gs).unwrap();
    let back = cache.load(&key).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.profile.values()), bits(gs.profile.values()));
    assert_eq!(bits(&back.s_history), bits(&gs.s_history));
    assert_eq!(back.energy_j.to_bits(), gs.energy_j.to_bits());
    assert_eq!(back.decay.c0.to_bits(), gs.decay.c0.to_bits());
    assert_eq!(back.decay.valid, gs.decay.valid);
    assert_eq!((back.petviashvili_iterations, back.newton_steps), (gs.petviashvili_iterations, gs.newton_steps));
    assert_eq!(back.params, gs.params);

    // no temporary files survive the atomic rename
    let names: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from(key.file_name())]);
}

#[test]
fn mismatched_key_and_truncation_miss() {
    let tmp = TempDir::new().unwrap();
    let cache = Cache::new(tmp.path());
    let (params, grid, gs) = solved();
    let key = Key::new(params, &grid);
    cache.store(&key, &gs).unwrap();

    let other = Key { points: 512, ..key };
    assert!(cache.load(&other).is_none());
    // a file under the right name but carrying another key is also a miss
    std::fs::copy(cache.path(&key), cache.path(&other)).unwrap();
    assert!(cache.load(&other).is_none());

    let bytes = std::fs::read(cache.path(&key)).unwrap();
    for cut in [0, 3, 20, bytes.len() - 1] {
        std::fs::write(cache.path(&key), &bytes[..cut]).unwrap();
        assert!(cache.load(&key).is_none(), "cut at {cut}");
    }
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    std::fs::write(cache.path(&key), &flipped).unwrap();
    assert!(cache.load(&key).is_none());
}

#[test]
fn container_layout() {
    let bytes = encode(&["k=v".to_string()], &[1.0]);
    assert_eq!(&bytes[..5], b"FSPK1");
    // magic, key count, key length + bytes, value count, one value, checksum
    assert_eq!(bytes.len(), 5 + 4 + 4 + 3 + 8 + 8 + 8);
    assert_eq!(&bytes[5..9], &1u32.to_le_bytes());
    assert_eq!(&bytes[13..16], b"k=v");
    assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
    assert_eq!(decode(&bytes).unwrap(), (vec!["k=v".to_string()], vec![1.0]));
}
