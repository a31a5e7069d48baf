use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn oscint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscint")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_matches_stationary_phase_leading_term() {
    let o = oscint(&["eval", "--lambda", "400", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let abs = v["details"]["abs"].as_f64().unwrap();
    let lead = (2.0 * std::f64::consts::PI / 400.0).sqrt();
    assert!((abs - lead).abs() / lead < 0.05, "{abs} vs {lead}");
    assert_eq!(v["checks"]["converged"], true);
    assert_eq!(v["config"]["phase"], "quadratic");
}

#[test]
fn eval_methods_agree() {
    let mut vals = Vec::new();
    for m in ["oracle", "wavepacket", "aniso"] {
        let o = oscint(&["eval", "--lambda", "256", "--method", m, "--json"]);
        assert_eq!(code(&o), 0, "{m}: {}", String::from_utf8_lossy(&o.stderr));
        let v = stdout_json(&o);
        vals.push((v["details"]["re"].as_f64().unwrap(), v["details"]["im"].as_f64().unwrap()));
    }
    for w in &vals[1..] {
        let d = (w.0 - vals[0].0).hypot(w.1 - vals[0].1);
        assert!(d <= 1e-3 * vals[0].0.hypot(vals[0].1), "{vals:?}");
    }
}

#[test]
fn sweep_files_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = oscint(&[
            "sweep",
            "--phase",
            "perturbed-quadratic,0.05",
            "--dim",
            "2",
            "--lambda-min",
            "10",
            "--lambda-max",
            "300",
            "--points",
            "4",
            "--seed",
            "7",
            "--out",
            path_str(p),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    assert_eq!(fs::read(a.with_extension("json")).unwrap(), fs::read(b.with_extension("json")).unwrap());
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,re,im,abs,method,err_est,wall_ms"));
    assert_eq!(lines.count(), 4);
    let summary: Value = serde_json::from_str(&fs::read_to_string(a.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 7);
    assert!(summary["fits"]["oracle"]["slope"].as_f64().unwrap() < 0.0);
    assert!(summary["constants"]["lstar"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "phase = quadratic\npoints = 9\n\n[sweep]\nlambda-min = 20\nlambda_max = 200\npoints = 4\n")
        .unwrap();
    let o = oscint(&["sweep", "--config", path_str(&cfg), "--points", "3", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["config"]["points"], 3);
    assert_eq!(v["config"]["lambda_min"].as_f64(), Some(20.0));
    assert_eq!(v["config"]["lambda_max"].as_f64(), Some(200.0));
    assert_eq!(v["details"]["rows"], 3);

    let o = oscint(&["sweep", "--config", path_str(&cfg), "--json"]);
    assert_eq!(stdout_json(&o)["details"]["rows"], 4);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ini");
    fs::write(&bad, "colour = blue\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["eval", "--phase", "nope", "--lambda", "10"],
        vec!["eval", "--lambda", "0.5"],
        vec!["sweep", "--points", "2"],
        vec!["sweep", "--method", "magic"],
        vec!["sweep", "--max-panels", "0"],
        vec!["sweep", "--config", path_str(&bad)],
        vec!["sweep", "--config", "/nonexistent/run.ini"],
        vec!["report", "--input", "/nonexistent/rows.csv"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = oscint(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn budget_overrun_exits_3() {
    let o = oscint(&["eval", "--dim", "2", "--lambda", "1e9"]);
    assert_eq!(code(&o), 3);
    let o = oscint(&["eval", "--dim", "2", "--lambda", "1e4", "--max-panels", "10"]);
    assert_eq!(code(&o), 3);
    let o = oscint(&["eval", "--dim", "2", "--lambda", "1e4"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn failed_check_exits_1() {
    let o =
        oscint(&["verify", "ps0", "--lambda-min", "10", "--lambda-max", "1000", "--points", "9", "--drift-max", "1"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    let o = oscint(&["verify", "ps0", "--lambda-min", "10", "--lambda-max", "1000", "--points", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_lse_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lse.json");
    let o = oscint(&["verify", "lse", "--amp", "shrinking-bump,0.75", "--points", "9", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let slope = v["fits"]["envelope"]["slope"].as_f64().unwrap();
    assert!((slope + 0.25).abs() <= 0.1, "{slope}");
    assert_eq!(v["checks"]["lse"], true);
    assert_eq!(v["config"]["beta"].as_f64(), Some(0.75));
}

#[test]
fn cover_and_matcheck_pass() {
    let o = oscint(&["cover", "--phase", "aniso-quadratic,0.5", "--dim", "2", "--lambda", "200", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["details"]["validity"]["uncovered"], 0);
    assert!(v["details"]["packets"].as_u64().unwrap() > 1);

    let o = oscint(&["matcheck", "--count", "100", "--seed", "5", "--json"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["details"]["pass"], true);
    assert_eq!(v["config"]["count"], 100);
}

#[test]
fn report_refits_sweep_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let o =
        oscint(&["sweep", "--lambda-min", "100", "--lambda-max", "10000", "--points", "9", "--out", path_str(&csv)]);
    assert_eq!(code(&o), 0);
    let out = dir.path().join("summary.json");
    let o = oscint(&["report", "--input", path_str(&csv), "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let slope = v["fits"]["oracle"]["slope"].as_f64().unwrap();
    assert!((slope + 0.5).abs() < 0.1, "{slope}");
    assert_eq!(v["checks"]["no_failures"], true);
}
