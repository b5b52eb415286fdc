//! End-to-end runs of the `meanfield` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn meanfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meanfield"))
        .args(args)
        .env_remove("MEANFIELD_THREADS")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_reports_critical_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["analyze", "--model", "cw", "--law", "0.3:0.5,-0.3:0.5", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("β_c"));
    let s = json(&dir.path().join("summary.json"));
    let bc = s["beta_critical"].as_f64().unwrap();
    assert!((bc - 1.116437).abs() < 1e-5, "{bc}");
    let spectrum = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("state,m_star,mode,eigenvalue"));
}

#[test]
fn malformed_law_exits_with_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["analyze", "--model", "cw", "--law", "0.3:0.45,-0.3:0.45", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("weights must sum to 1"), "{}", stderr(&o));
}

#[test]
fn missing_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["simulate-cw", "--beta", "1", "--n", "100", "--t-end", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"command": "simulate-cw", "beta": 1.0, "n": 100, "t_end": 1.0}"#).unwrap();
    let o = meanfield(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"command": "simulate-cw", "beta": 1.0, "n": 100, "t_end": 1.0, "seed": 1, "betta": 2}"#,
    )
    .unwrap();
    let o = meanfield(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field `betta`"), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let cfg = dir.path().join(format!("{name}.json"));
        fs::write(
            &cfg,
            format!(
                r#"{{"command": "simulate-kuramoto", "theta": 1.25, "omega": 0.25, "n": 128,
                    "t_end": 0.5, "grid_points": 6, "replicas": 3, "seed": 17,
                    "space_scale": "moderate", "time_scale": "n_half", "output_dir": "{}"}}"#,
                out.display()
            ),
        )
        .unwrap();
        let o = meanfield(&["run", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("trajectories.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert!(header.starts_with("replica,t_observed,r,psi,V1_1"), "{header}");
}

#[test]
fn per_replica_layout_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&[
        "simulate-cw", "--beta", "0.8", "--law", "0.3:0.5,-0.3:0.5", "--n", "200", "--t-end", "2",
        "--grid-points", "5", "--replicas", "2", "--seed", "9", "--layout", "per_replica",
        "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for i in 0..2 {
        let csv = fs::read_to_string(dir.path().join(format!("replica_{i:04}.csv"))).unwrap();
        assert!(csv.starts_with("t_observed,m,Y0,Y1"));
        assert_eq!(csv.lines().count(), 6);
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("command: simulate-cw"));
    assert!(manifest.contains("columns: t_observed, m, Y0, Y1"));
    assert!(manifest.contains("\"seed\": 9"));
}

#[test]
fn ensemble_and_profile_equation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir.path().join("ens"));
    let o = meanfield(&[
        "ensemble", "cw", "--beta", "0.5", "--n", "500", "--t-end", "1", "--grid-points", "3",
        "--replicas", "20", "--seed", "4", "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("ens/ensemble.csv")).unwrap();
    assert!(csv.starts_with("t_observed,mean_m,var_m,mean_Y0,var_Y0"));

    let out = out_arg(&dir.path().join("mv"));
    let o = meanfield(&["mckean-vlasov", "--model", "cw", "--beta", "1.5", "--t-end", "20", "--dt", "1e-2", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("mv/profile.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // m = tanh(1.5 m) has its positive root near 0.8583
    assert!((last[1] - 0.858_3).abs() < 1e-3, "{}", last[1]);
}

#[test]
fn verify_passes_and_writes_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["verify", "closed-forms", "--seed", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion 3 closed-forms: PASS"));
}

#[test]
fn failed_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&[
        "verify", "exact-gibbs", "--seed", "1", "--parameters", r#"{"t_end": 10.0, "tv_tolerance": 0.0}"#,
        "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["passed"], serde_json::Value::Bool(false));
}

#[test]
fn verify_rejects_bad_names_and_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["verify", "no-such-thing", "--seed", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = meanfield(&["verify", "exact-gibbs", "--seed", "1", "--omega", "0.3", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = meanfield(&[
        "verify", "exact-gibbs", "--seed", "1", "--parameters", r#"{"bogus": 1}"#, "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn explosive_limit_requires_localization() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&[
        "limit-sde", "--kind", "kuramoto-cubic", "--omega", "0.4", "--t-end", "1", "--seed", "1",
        "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("localization"), "{}", stderr(&o));
    let o = meanfield(&[
        "limit-sde", "--kind", "kuramoto-cubic", "--omega", "0.4", "--t-end", "1", "--seed", "1",
        "--r-stop", "10", "--paths", "5", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(dir.path().join("paths.csv")).unwrap().starts_with("path,t_observed,V1,V2"));
}

#[test]
fn thread_override_must_be_numeric() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_meanfield"))
        .args(["analyze", "--model", "cw", "--out", &out_arg(dir.path())])
        .env("MEANFIELD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MEANFIELD_THREADS"));
}
