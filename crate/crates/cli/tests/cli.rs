use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn nctorus(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nctorus"));
    cmd.args(args).env_remove("NCTORUS_OUT_DIR");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("binary runs")
}

fn run(command: &str, config: &Path, extra: &[&str]) -> (i32, Value, TempDir) {
    let dir = TempDir::new().unwrap();
    let mut args = vec![command, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = nctorus(&args, Some(dir.path()));
    let code = out.status.code().unwrap();
    let path = dir.path().join(format!("{command}.json"));
    let report = if code == 2 || (code == 1 && out.stdout.is_empty()) {
        assert!(!path.exists());
        Value::Null
    } else {
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.as_bytes(), out.stdout.as_slice());
        serde_json::from_str(&text).unwrap()
    };
    (code, report, dir)
}

fn write_config(dir: &TempDir, name: &str, value: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn hand_config() -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join("hand.json")).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn hand_example_values() {
    let (code, r, _dir) = run("ym", &configs().join("hand.json"), &[]);
    assert_eq!(code, 0);
    assert!((f(&r["ym_dynamical"]) - 2.0).abs() <= 1e-12);
    assert!((f(&r["ym_spectral"]) - 1.0 / PI).abs() <= 1e-10);
    assert!((f(&r["constant_c"]) - 1.0 / (2.0 * PI)).abs() <= 1e-12);
    assert!((f(&r["ratio"]) - 1.0 / (2.0 * PI)).abs() <= 1e-12);
    assert!(f(&r["ratio_relative_deviation"]) <= 1e-10);
    assert_eq!(r["tool"], "nctorus");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["truncation"]["mode"], "strict");
    assert_eq!(f(&r["max_truncation_loss"]), 0.0);
}

#[test]
fn spectral_input_gives_the_same_values() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = hand_config();
    cfg["connection"]["convention"] = json!("spectral");
    cfg["connection"]["potentials"][1]["entries"][0] = json!([
        {"exp": [1, 0], "re": 0.0, "im": -1.0},
        {"exp": [-1, 0], "re": 0.0, "im": 1.0}
    ]);
    let (code, r, _dir) = run("ym", &write_config(&tmp, "spectral.json", &cfg), &[]);
    assert_eq!(code, 0);
    assert_eq!(r["input_convention"], "spectral");
    assert!((f(&r["ym_dynamical"]) - 2.0).abs() <= 1e-12);
}

#[test]
fn flat_connection_reports_exact_zero() {
    let (code, r, _dir) = run("ym", &configs().join("flat.json"), &[]);
    assert_eq!(code, 0);
    assert_eq!(f(&r["ym_dynamical"]), 0.0);
    assert_eq!(f(&r["ym_spectral"]), 0.0);
    assert!(r["ratio"].is_null());
    assert_eq!(r["ratio_exact_zero"], true);
}

#[test]
fn random_connection_values_agree_up_to_c() {
    let (code, r, _dir) = run("ym", &configs().join("random.json"), &[]);
    assert_eq!(code, 0);
    assert!(f(&r["ym_dynamical"]) > 0.0);
    assert!(f(&r["residuals"]["agreement"]) <= 1e-9);
    assert!(f(&r["residuals"]["spectral_cross_check"]) <= 1e-10);
    assert!(f(&r["ratio_relative_deviation"]) <= 1e-9);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    for (command, config) in [("ym", "random.json"), ("optimize", "random.json"), ("make-projection", "triangular.json")] {
        let (_, _, a) = run(command, &configs().join(config), &[]);
        let (_, _, b) = run(command, &configs().join(config), &[]);
        let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert_eq!(x, y, "{command}: {name:?} differs");
        }
    }
}

#[test]
fn seed_override_changes_random_potentials() {
    let (_, a, _d1) = run("ym", &configs().join("random.json"), &[]);
    let (_, b, _d2) = run("ym", &configs().join("random.json"), &["--seed", "18"]);
    assert_eq!(a["seed"], 17);
    assert_eq!(b["seed"], 18);
    assert_ne!(a["ym_dynamical"], b["ym_dynamical"]);
}

#[test]
fn validate_passes_for_grassmannian() {
    let (code, r, _dir) = run("validate", &configs().join("flat.json"), &[]);
    assert_eq!(code, 0);
    assert_eq!(r["passed"], true);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"compatibility"));
    assert!(names.contains(&"projection_idempotency"));
}

#[test]
fn validate_reports_residuals_for_a_non_projection() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = hand_config();
    cfg["module"] = json!({"q": 2, "p": {"q": 2, "entries": [
        [{"exp": [0, 0], "re": 1.0, "im": 0.0}],
        [{"exp": [1, 0], "re": 1.0, "im": 0.0}],
        [],
        []
    ]}});
    cfg["connection"] = json!({"convention": "dynamical"});
    let (code, r, _dir) = run("validate", &write_config(&tmp, "bad_p.json", &cfg), &[]);
    assert_eq!(code, 1);
    assert_eq!(r["passed"], false);
    let checks = r["checks"].as_array().unwrap();
    // p − p* = [[0, U_1], [−U_1*, 0]]: each row has l1 mass 1.
    let sa = checks.iter().find(|c| c["name"] == "projection_self_adjointness").unwrap();
    assert_eq!(f(&sa["value"]), 1.0);
    assert_eq!(sa["passed"], false);
    let compat = checks.iter().find(|c| c["name"] == "compatibility").unwrap();
    assert!(compat["value"].is_null());
}

#[test]
fn validate_flags_non_skew_potentials() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = hand_config();
    cfg["connection"]["potentials"][1]["entries"][0] = json!([
        {"exp": [1, 0], "re": 1.0, "im": 0.0},
        {"exp": [-1, 0], "re": 1.0, "im": 0.0}
    ]);
    let path = write_config(&tmp, "hermitian.json", &cfg);
    let (code, r, _dir) = run("validate", &path, &[]);
    assert_eq!(code, 1);
    let checks = r["checks"].as_array().unwrap();
    let skew = checks.iter().find(|c| c["name"] == "potential_1_skew_adjointness").unwrap();
    assert_eq!(f(&skew["value"]), 4.0);
    let (code, _, _dir) = run("ym", &path, &[]);
    assert_eq!(code, 1);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let mut non_skew = hand_config();
    non_skew["theta"] = json!([0.0, 0.3, 0.37, 0.0]);
    let mut unknown = hand_config();
    unknown["colour"] = json!("blue");
    let mut overflow = hand_config();
    overflow["connection"]["potentials"][0]["entries"][0] = json!([{"exp": [5, 0], "re": 1.0, "im": 0.0}]);
    let mut wrong_count = hand_config();
    wrong_count["connection"]["potentials"] = json!([{"q": 1, "entries": [[]]}]);
    for (name, cfg) in [
        ("non_skew", non_skew),
        ("unknown", unknown),
        ("overflow", overflow),
        ("wrong_count", wrong_count),
    ] {
        let path = write_config(&tmp, &format!("{name}.json"), &cfg);
        for command in ["validate", "ym"] {
            let (code, _, dir) = run(command, &path, &[]);
            assert_eq!(code, 2, "{name} {command}");
            assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
        }
    }
    let (code, _, _dir) = run("ym", &tmp.path().join("missing.json"), &[]);
    assert_eq!(code, 2);
    let (code, _, _dir) = run("ym", &configs().join("hand.json"), &["--tol", "-1"]);
    assert_eq!(code, 2);
    let (code, _, _dir) = run("make-projection", &configs().join("hand.json"), &[]);
    assert_eq!(code, 2);
}

#[test]
fn make_projection_symmetrises_the_triangular_idempotent() {
    let (code, r, dir) = run("make-projection", &configs().join("triangular.json"), &[]);
    assert_eq!(code, 0);
    assert!(f(&r["idempotency"]) <= 1e-9);
    assert!(f(&r["self_adjointness"]) <= 1e-9);
    assert!(f(&r["similarity"]) <= 1e-8);
    assert!(f(&r["input_self_adjointness"]) > 0.1);

    let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("projection.json")).unwrap()).unwrap();
    assert_eq!(file["module"]["q"], 2);
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs().join("triangular.json")).unwrap()).unwrap();
    cfg.as_object_mut().unwrap().remove("idempotent");
    cfg["module"] = file["module"].clone();
    let path = write_config(&dir, "downstream.json", &cfg);
    let (code, v, _d) = run("validate", &path, &[]);
    assert_eq!(code, 0, "{v}");
}

#[test]
fn make_projection_leaves_projections_alone_and_rejects_non_idempotents() {
    let tmp = TempDir::new().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs().join("triangular.json")).unwrap()).unwrap();
    cfg["idempotent"] = json!({"q": 2, "entries": [[{"exp": [0, 0], "re": 1.0, "im": 0.0}], [], [], []]});
    let (code, r, _dir) = run("make-projection", &write_config(&tmp, "diag.json", &cfg), &[]);
    assert_eq!(code, 0);
    assert!(f(&r["change"]) <= 1e-12);

    cfg["idempotent"] = json!({"q": 2, "entries": [[{"exp": [0, 0], "re": 2.0, "im": 0.0}], [], [], []]});
    let (code, _, _dir) = run("make-projection", &write_config(&tmp, "scaled.json", &cfg), &[]);
    assert_eq!(code, 1);
}

#[test]
fn optimize_stops_at_flat_and_descends_from_hand_example() {
    let (code, r, dir) = run("optimize", &configs().join("flat.json"), &[]);
    assert_eq!(code, 0);
    assert_eq!(r["iterations"], 0);
    assert_eq!(r["converged"], true);
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 1);

    let (code, r, dir) = run("optimize", &configs().join("hand.json"), &[]);
    assert_eq!(code, 0);
    assert!(f(&r["final_ym"]) <= 1e-20);
    assert_eq!(r["monotone"], true);
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    let yms: Vec<f64> = trace
        .lines()
        .map(|l| f(&serde_json::from_str::<Value>(l).unwrap()["ym"]))
        .collect();
    assert!(yms.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(yms[0], 2.0);

    let (code, again, _d) = run("ym", &dir.path().join("final_connection.json"), &[]);
    assert_eq!(code, 0);
    assert_eq!(f(&again["ym_dynamical"]), f(&r["final_ym"]));
}

#[test]
fn optimize_random_start_is_monotone() {
    let (code, r, dir) = run("optimize", &configs().join("random.json"), &[]);
    assert_eq!(code, 0);
    assert_eq!(r["monotone"], true);
    assert!(f(&r["final_ym"]) < f(&r["initial_ym"]));
    assert_eq!(r["params"]["max_iter"], 10);
    let lines = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap().lines().count();
    assert_eq!(lines, r["iterations"].as_u64().unwrap() as usize + 1);
}

#[test]
fn output_directory_from_environment() {
    let env_dir = TempDir::new().unwrap();
    let flag_dir = TempDir::new().unwrap();
    let config = configs().join("hand.json");
    let status = Command::new(env!("CARGO_BIN_EXE_nctorus"))
        .args(["ym", "--config", config.to_str().unwrap()])
        .env("NCTORUS_OUT_DIR", env_dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(env_dir.path().join("ym.json").exists());

    let status = Command::new(env!("CARGO_BIN_EXE_nctorus"))
        .args(["ym", "--config", config.to_str().unwrap(), "--out"])
        .arg(flag_dir.path())
        .env("NCTORUS_OUT_DIR", env_dir.path().join("unused"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(flag_dir.path().join("ym.json").exists());
    assert!(!env_dir.path().join("unused").exists());
}

#[test]
fn tolerance_override_is_recorded() {
    let (code, r, _dir) = run("validate", &configs().join("hand.json"), &["--tol", "1e-9"]);
    assert_eq!(code, 0);
    assert_eq!(f(&r["tol"]), 1e-9);
}

#[test]
fn rational_theta_is_only_a_warning() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = hand_config();
    cfg["theta"] = json!([0.0, -0.25, 0.25, 0.0]);
    let (code, r, _dir) = run("ym", &write_config(&tmp, "rational.json", &cfg), &[]);
    assert_eq!(code, 0);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
    let (_, r, _dir) = run("ym", &configs().join("hand.json"), &[]);
    assert!(r["warnings"].as_array().unwrap().is_empty());
}
