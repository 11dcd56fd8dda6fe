use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleman-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("CARLEMAN_LAB_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn classify_square_root_is_weak() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"classify","coefficient":{"kind":"power","params":{"gamma":0.5}},"output_dir":"out"}"#,
    );
    let o = lab(&["run", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&tmp.path().join("out"));
    assert_eq!(s["results"]["regime"], "WDC");
    assert!((s["results"]["K_est"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(s["status"], "pass");
    assert_eq!(s["seed"], 20_240_917);
    assert_eq!(s["config_sha256"].as_str().unwrap().len(), 64);
    assert!(tmp.path().join("out/run.log").exists());
    assert!(tmp.path().join("out/log_slope.csv").exists());
}

#[test]
fn missing_coefficient_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"experiment":"classify"}"#);
    for cmd in ["run", "validate"] {
        let o = lab(&[cmd, &cfg], tmp.path());
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("coefficient"));
    }
}

#[test]
fn bad_fields_are_all_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"hardy","coefficient":{"kind":"power","params":{"gamma":0.5}},
            "omega":[0.8,0.2],"samples":0,"weights":{"lambdas":[]}}"#,
    );
    let o = lab(&["validate", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for field in ["omega:", "samples:", "weights.lambdas:"] {
        assert!(err.contains(field), "{field} missing from {err}");
    }
}

#[test]
fn lemma_checks_pass_on_default_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"lemma_checks","coefficient":{"kind":"power","params":{"gamma":1.5}},
            "mesh":{"intervals":64,"time_steps":64},"samples":5}"#,
    );
    let out = tmp.path().join("res");
    let o = lab(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("identity_residuals.csv")).unwrap();
    assert!(table.starts_with("profile,lambda,s,residual,residual_refined"));
    assert_eq!(table.lines().count(), 1 + 3 * 2);
}

#[test]
fn failed_invariant_exits_with_one_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    // far too coarse for the identity residual to reach 1e-3
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"lemma_checks","coefficient":{"kind":"power","params":{"gamma":0.5}},
            "mesh":{"intervals":4,"time_steps":4},"samples":2}"#,
    );
    let o = lab(&["run", &cfg, "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("product identity residual"));
    assert_eq!(summary(&tmp.path().join("o"))["status"], "fail");
}

#[test]
fn sweep_outputs_are_reproducible_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"carleman_sweep","coefficient":{"kind":"power","params":{"gamma":0.5}},
            "mesh":{"intervals":32,"time_steps":32},"samples":3,
            "weights":{"lambdas":[2.0],"s_multipliers":[1.0,2.0]}}"#,
    );
    assert!(lab(&["run", &cfg, "--jobs", "1", "--out", "a"], tmp.path()).status.success());
    assert!(lab(&["run", &cfg, "--jobs", "3", "--out", "b"], tmp.path()).status.success());
    for f in ["sweep.csv", "summary_by_s.csv", "sweep_alternate_bridge.csv", "summary.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let csv = std::fs::read_to_string(tmp.path().join("a/sweep.csv")).unwrap();
    assert!(csv.starts_with("sample,s,lambda,lhs_grad,lhs_zero,rhs_source,rhs_local,ratio"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
}

#[test]
fn environment_seed_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"energy","coefficient":{"kind":"power","params":{"gamma":0.5}},
            "mesh":{"intervals":16,"time_steps":16},"samples":2,"seed":1}"#,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_carleman-lab"))
        .args(["run", &cfg, "--out", "o"])
        .current_dir(tmp.path())
        .env("CARLEMAN_LAB_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["seed"], 77);
    assert_eq!(s["seed_source"], "environment");

    let o = Command::new(env!("CARGO_BIN_EXE_carleman-lab"))
        .args(["validate", &cfg])
        .env("CARLEMAN_LAB_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn null_control_writes_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment":"null_control","coefficient":{"kind":"power","params":{"gamma":0.5}},
            "mesh":{"intervals":32,"time_steps":32},"control":{"epsilons":[1e-3,1e-5]}}"#,
    );
    let o = lab(&["run", &cfg, "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("o");
    let bin = std::fs::read(dir.join("control_eps_1e-5.bin")).unwrap();
    assert_eq!(bin.len(), 24 + 8 * 33 * 33);
    let s = summary(&dir);
    assert_eq!(s["results"]["controls"].as_array().unwrap().len(), 2);
    assert!(s["results"]["controls"][0]["converged"].as_bool().unwrap());
}
