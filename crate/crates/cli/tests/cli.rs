use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomo")).args(args).env_remove("TOMO_SEED").output().unwrap()
}

fn tomo_env(args: &[&str], val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomo")).args(args).env("TOMO_SEED", val).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SIGMA_XYZ: &str = r#"{"dim": 2, "elements": [
  [[0,0],[1,0],[1,0],[0,0]],
  [[0,0],[0,-1],[0,1],[0,0]],
  [[1,0],[0,0],[0,0],[-1,0]]
]}"#;

#[test]
fn check_pauli_is_complete() {
    let out = tomo(&["quorum", "check", "--pauli"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["complete"], true);
    assert_eq!(v["rank"], 4);
    assert_eq!(v["checks"]["consistent"], true);
}

#[test]
fn check_incomplete_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "xyz.json", SIGMA_XYZ);
    let out = tomo(&["quorum", "check", "--file", &f]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["complete"], false);
    assert_eq!(v["rank"], 3);
    // the witness is the normalized identity, orthogonal to all three Paulis
    let w = &v["defect_witness"]["entries"];
    let r = 1.0 / 2f64.sqrt();
    assert!((w[0][0].as_f64().unwrap() - r).abs() < 1e-12);
    assert!((w[3][0].as_f64().unwrap() - r).abs() < 1e-12);
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.json", "{\"dim\": 2,\n \"elements\": [[[0,0]");
    let out = tomo(&["quorum", "check", "--file", &f]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    let f = write(dir.path(), "short.json", r#"{"dim": 2, "elements": [[[0,0],[1,0]]]}"#);
    assert_eq!(tomo(&["quorum", "check", "--file", &f]).status.code(), Some(2));
    assert_eq!(tomo(&["quorum", "check"]).status.code(), Some(2));
    assert_eq!(tomo(&["quorum", "check", "--pauli", "--file", &f]).status.code(), Some(2));
    assert_eq!(tomo(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn dual_routes_match_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gs = tomo(&["quorum", "dual", "--pauli", "--method", "gs"]);
    let gram = tomo(&["quorum", "dual", "--pauli", "--method", "gram"]);
    assert_eq!(gs.status.code(), Some(0));
    assert_eq!(gram.status.code(), Some(0));
    let (a, b) = (json(&gs), json(&gram));
    let flat = |v: &Value| -> Vec<f64> {
        v["elements"].as_array().unwrap().iter().flat_map(|e| e.as_array().unwrap().iter())
            .flat_map(|p| p.as_array().unwrap().iter().map(|x| x.as_f64().unwrap())).collect()
    };
    let (fa, fb) = (flat(&a), flat(&b));
    assert_eq!(fa.len(), 16 * 2);
    assert!(fa.iter().zip(&fb).all(|(x, y)| (x - y).abs() <= 1e-10));
    // {σx/2, σy/2, σz/2, 1/2} with σ = 2S in the m-ascending basis
    let expected = [
        0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.5, 0.0, -0.5, 0.0, 0.0, //
        -0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, //
        0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0,
    ];
    assert!(fa.iter().zip(&expected).all(|(x, y)| (x - y).abs() <= 1e-12));

    let dual = write(dir.path(), "dual.json", &String::from_utf8(gs.stdout).unwrap());
    let out = tomo(&["quorum", "check", "--pauli", "--dual", &dual]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["checks"]["consistent"], true);
    assert_eq!(v["checks"]["parseval"]["passed"], true);
}

#[test]
fn dual_of_incomplete_needs_subspace() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "xyz.json", SIGMA_XYZ);
    let out = tomo(&["quorum", "dual", "--file", &f]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["complete"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("subspace"));
    assert_eq!(tomo(&["quorum", "dual", "--file", &f, "--subspace"]).status.code(), Some(0));
    assert_eq!(tomo(&["quorum", "dual", "--file", &f, "--subspace", "--method", "gram"]).status.code(), Some(0));
}

#[test]
fn weigert_duplicates_are_singular() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "dirs.json",
        r#"[{"theta":0.3,"phi":1.0},{"theta":0.3,"phi":1.0},{"theta":1.9,"phi":0.0},{"theta":2.0,"phi":4.0}]"#,
    );
    let out = tomo(&["quorum", "dual", "--weigert", "1", "--directions", &f, "--method", "gram"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular Weigert Gram"));
    let out = tomo(&["quorum", "check", "--weigert", "1", "--directions", &f]);
    assert_eq!(out.status.code(), Some(1));
    let three = write(dir.path(), "three.json", r#"[{"theta":0.3,"phi":1.0},{"theta":1.9,"phi":0.0},{"theta":2.0,"phi":4.0}]"#);
    assert_eq!(tomo(&["quorum", "dual", "--weigert", "1", "--directions", &three]).status.code(), Some(2));
    assert_eq!(tomo(&["quorum", "check", "--weigert", "2"]).status.code(), Some(0));
}

#[test]
fn simulate_reaches_exact_value() {
    let exact = -(4f64.cos()) / 2.0;
    for quorum in ["pauli", "continuous", "weigert"] {
        let out = tomo(&["simulate", "--quorum", quorum, "--n-samples", "100000"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        let mean = v["mean"].as_f64().unwrap();
        let err = v["error_bar"].as_f64().unwrap();
        assert!((mean - exact).abs() <= 3.0 * err, "{quorum}: {mean} ± {err}");
        assert!((v["exact"].as_f64().unwrap() - exact).abs() < 1e-12);
        assert_eq!(v["seed"], 42);
        assert_eq!(v["block_means"].as_array().unwrap().len(), 20);
    }
}

#[test]
fn simulate_validation_exits_two() {
    let out = tomo(&["simulate", "--n-samples", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_samples must be ≥ n_blocks"));
    assert_eq!(tomo(&["simulate", "--two-s", "2", "--quorum", "pauli"]).status.code(), Some(2));
    assert_eq!(tomo(&["simulate", "--state", "basis:3/2"]).status.code(), Some(2));
    assert_eq!(tomo(&["simulate", "--state", "spinor:1"]).status.code(), Some(2));
    assert_eq!(tomo(&["simulate", "--threads", "0"]).status.code(), Some(2));
    assert_eq!(tomo(&["simulate", "--quorum", "continuous", "--direction-seed", "3"]).status.code(), Some(2));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"seed": 7, "n_samples": 2000, "quorum": "continuous"}"#);
    let seed_of = |out: Output| json(&out)["seed"].as_u64().unwrap();
    assert_eq!(seed_of(tomo_env(&["simulate", "--config", &cfg, "--seed", "9"], "5")), 9);
    assert_eq!(seed_of(tomo_env(&["simulate", "--config", &cfg], "5")), 7);
    assert_eq!(seed_of(tomo_env(&["simulate", "--n-samples", "2000"], "5")), 5);
    assert_eq!(seed_of(tomo(&["simulate", "--n-samples", "2000"])), 42);
    assert_eq!(tomo_env(&["simulate"], "abc").status.code(), Some(2));
    let bad = write(dir.path(), "bad.json", r#"{"seed": 7, "samples": 10}"#);
    assert_eq!(tomo(&["simulate", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn config_file_drives_weigert_run() {
    let dir = tempfile::tempdir().unwrap();
    let dirs = write(
        dir.path(),
        "tetra.json",
        &tomography::spin::directions_to_json(&tomography::spin::tetrahedral_directions()),
    );
    let cfg = write(
        dir.path(),
        "cfg.json",
        &format!(
            r#"{{"quorum": {{"weigert": {{"directions_file": {dirs:?}}}}}, "state": {{"basis": {{"m": 0.5}}}},
                "target": "sz", "n_samples": 40000, "checkpoints": [1000, 40000]}}"#
        ),
    );
    let csv = dir.path().join("conv.csv");
    let out = tomo(&["simulate", "--config", &cfg, "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["estimator"], "weigert");
    assert_eq!(v["convention"], "expansion");
    assert!((v["mean"].as_f64().unwrap() - 0.5).abs() <= 3.0 * v["error_bar"].as_f64().unwrap() + 1e-12);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_samples,mean,error_bar,exact");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1000,"));
}

#[test]
fn simulate_density_and_matrix_files() {
    let dir = tempfile::tempdir().unwrap();
    let rho = write(dir.path(), "rho.json", r#"{"dim": 2, "entries": [[0.75,0],[0.25,0.1],[0.25,-0.1],[0.25,0]]}"#);
    let a = write(dir.path(), "a.json", r#"{"dim": 2, "entries": [[1,0],[0,2],[0,0],[-1,0]]}"#);
    let out = tomo(&["simulate", "--state", &format!("density:{rho}"), "--target", &format!("matrix:{a}"), "--n-samples", "60000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    // Tr[ρA] = 0.75 − 0.25 + 2i·(0.25 − 0.1i)
    let exact = [0.5 + 0.2, 0.5];
    for k in 0..2 {
        assert!((v["exact"][k].as_f64().unwrap() - exact[k]).abs() < 1e-12);
        let m = v["mean"][k].as_f64().unwrap();
        let e = v["error_bar"][k].as_f64().unwrap();
        assert!((m - exact[k]).abs() <= 4.0 * e, "component {k}: {m} ± {e}");
    }
    let neg = write(dir.path(), "neg.json", r#"{"dim": 2, "entries": [[1.5,0],[0,0],[0,0],[-0.5,0]]}"#);
    assert_eq!(tomo(&["simulate", "--state", &format!("density:{neg}")]).status.code(), Some(2));
}

#[test]
fn fig1_outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = tomo(&["fig1", "--n-max", "20000", "--threads", "2", "--out-dir", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["fig1.csv", "fig1_means.csv", "fig1_errors.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let text = std::fs::read_to_string(a.path().join("fig1.csv")).unwrap();
    assert!(text.starts_with("n_samples,mean_cont,err_cont,mean_disc,err_disc,exact\n"));
    assert_eq!(text.lines().count(), 21);
}
