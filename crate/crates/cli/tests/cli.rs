use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracspike"));
    c.env_remove("FRACSPIKE_CACHE").env_remove("RUST_LOG");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ground_state_scenario(l: f64, m: usize) -> String {
    format!(
        r#"{{
  "schema": 1,
  "name": "gs",
  "params": {{"s": 0.5, "p": 2.0}},
  "grid": {{"dim": 1, "half_width": {l}, "points": {m}}},
  "mode": "ground_state"
}}"#
    )
}

const SWEEP: &str = r#"{
  "schema": 1,
  "name": "sweep",
  "params": {"s": 0.5, "p": 2.0},
  "grid": {"dim": 1, "half_width": 40.0, "points": 512},
  "potential": {"kind": "well", "a": 2.0, "b": 1.0},
  "mode": "epsilon_sweep",
  "epsilons": [0.2, 0.1, 0.05],
  "seeds": [[[0.5]]],
  "tolerances": {"eta": 0.5}
}"#;

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

#[test]
fn ground_state_matches_the_half_laplacian_soliton() {
    let tmp = TempDir::new().unwrap();
    let sc = write(tmp.path(), "gs.json", &ground_state_scenario(80.0, 4096));
    let out = tmp.path().join("out");
    let o = run(&["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("gs/profile.csv")).unwrap();
    let (x, u) = (column(&csv, "x"), column(&csv, "u"));
    assert_eq!(x.len(), 4096);
    let err = x.iter().zip(&u).fold(0.0f64, |m, (x, u)| m.max((u - 2.0 / (1.0 + x * x)).abs())) / 2.0;
    assert!(err <= 1e-3, "relative L∞ error {err:e}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("gs/report.json")).unwrap()).unwrap();
    let decay = &report["ground_state"]["decay_fit"];
    assert!((decay["exponent"].as_f64().unwrap() + 2.0).abs() < 0.05, "{decay}");
    assert_eq!(report["scenario"]["tolerances"]["eta"], 0.1, "defaults are embedded");
    assert!(out.join("cache/ground_state_s0.5_p2_N1_L80_M4096.fspk").exists());
}

#[test]
fn warm_cache_skips_the_solve_and_outputs_are_identical() {
    let tmp = TempDir::new().unwrap();
    let sc = write(tmp.path(), "sweep.json", SWEEP);
    let out = tmp.path().join("out");
    let args = ["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap(), "--verbose"];
    let cold = run(&args);
    assert!(cold.status.success(), "{}", stderr(&cold));
    assert!(stderr(&cold).contains("cache miss"));
    let first: Vec<String> =
        ["rates.csv", "contraction.csv", "report.json"].iter().map(|f| fs::read_to_string(out.join("sweep").join(f)).unwrap()).collect();
    let warm = run(&args);
    assert!(warm.status.success());
    assert!(stderr(&warm).contains("skipping the ground-state solve"), "{}", stderr(&warm));
    let second: Vec<String> =
        ["rates.csv", "contraction.csv", "report.json"].iter().map(|f| fs::read_to_string(out.join("sweep").join(f)).unwrap()).collect();
    assert_eq!(first, second);

    // more workers, same bytes
    let par = run(&["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "3"]);
    assert!(par.status.success());
    assert_eq!(fs::read_to_string(out.join("sweep/rates.csv")).unwrap(), first[0]);

    let rates = &first[0];
    assert!(rates.starts_with("epsilon,e_norm_y,"));
    assert!(rates.ends_with('\n') && !rates.contains('\r'));
    assert_eq!(rates.lines().count(), 4);
    let report: serde_json::Value = serde_json::from_str(&first[2]).unwrap();
    let slope = report["results"]["e_norm_y_rate"]["slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.1, "‖E‖_Y slope {slope}");
}

#[test]
fn corrupt_cache_is_a_miss_with_a_warning() {
    let tmp = TempDir::new().unwrap();
    let sc = write(tmp.path(), "gs.json", &ground_state_scenario(40.0, 256));
    let cache = tmp.path().join("c");
    let out = tmp.path().join("out");
    let args = ["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let o = bin().args(args).env("FRACSPIKE_CACHE", &cache).output().unwrap();
    assert!(o.status.success());
    let file = cache.join("ground_state_s0.5_p2_N1_L40_M256.fspk");
    let bytes = fs::read(&file).unwrap();
    let reference = fs::read_to_string(out.join("gs/profile.csv")).unwrap();
    fs::write(&file, &bytes[..bytes.len() / 2]).unwrap();
    let o = bin().args(args).env("FRACSPIKE_CACHE", &cache).output().unwrap();
    assert!(o.status.success());
    assert!(stderr(&o).contains("corrupt"), "{}", stderr(&o));
    assert_eq!(fs::read(&file).unwrap(), bytes, "the miss rewrites the same file");
    assert_eq!(fs::read_to_string(out.join("gs/profile.csv")).unwrap(), reference);
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let bad = write(tmp.path(), "bad.json", "{\n  \"schema\": 1,\n  \"name\": \"x\",,\n}");
    let o = run(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());

    let wrong = ground_state_scenario(40.0, 100);
    let p = write(tmp.path(), "wrong.json", &wrong);
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5") && stderr(&o).contains("power of two"), "{}", stderr(&o));
    assert!(!out.exists());

    let missing = tmp.path().join("nope.json");
    let o = run(&["run", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3_with_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    // the default η = 0.1 admits ε = 0.05 but rejects ε = 0.2
    let text = SWEEP.replace("[0.2, 0.1, 0.05]", "[0.05, 0.2]").replace(r#""tolerances": {"eta": 0.5}"#, r#""tolerances": {}"#);
    let sc = write(tmp.path(), "sweep.json", &text);
    let out = tmp.path().join("out");
    let o = run(&["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let rates = fs::read_to_string(out.join("sweep/rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 2, "{rates}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sweep/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "failed");
    assert!(report["error"].as_str().unwrap().contains("η"));
}

#[test]
fn degree_check_and_subcommands() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let degree = r#"{
  "schema": 1,
  "name": "deg",
  "params": {"s": 0.5, "p": 2.0},
  "grid": {"dim": 2, "half_width": 10.0, "points": 64},
  "potential": {"kind": "double_well", "a": 1.0, "b": 1.0},
  "mode": "degree_check",
  "region": {"kind": "per_spike", "boxes": [
    {"lo": [-1.5, -0.5], "hi": [-0.5, 0.5]},
    {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]},
    {"lo": [-2.0, -1.0], "hi": [2.0, 1.0]}
  ]}
}"#;
    let p = write(tmp.path(), "deg.json", degree);
    let o = run(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("deg/degree.csv")).unwrap();
    // well, saddle, and the box holding both wells and the saddle
    assert_eq!(column(&csv, "degree"), vec![1.0, -1.0, 1.0]);
    assert!(!out.join("cache").exists(), "the degree needs no ground state");

    let o = run(&["ground-state", "--s", "0.5", "--p", "2", "--dim", "1", "--L", "40", "--M", "256", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("ground_state_s0.5_p2_N1_L40_M256/profile.csv").exists());
    let o = run(&["ground-state", "--s", "1.5", "--p", "2", "--dim", "1", "--L", "40", "--M", "256", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let sc = write(tmp.path(), "sweep.json", SWEEP);
    let o = run(&["sweep", "--scenario", sc.to_str().unwrap(), "--epsilons", "0.2,0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rates = fs::read_to_string(out.join("sweep/rates.csv")).unwrap();
    assert_eq!(column(&rates, "epsilon"), vec![0.2, 0.1]);
}
