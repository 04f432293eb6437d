use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn hj(args: &[&str]) -> Output {
    hj_env(args, &[])
}

fn hj_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hj"))
        .args(args)
        .envs(env.iter().copied())
        .output()
        .expect("spawn hj")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_riemann_sin_closes_near_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = hj(&["run", "--scenario", path_str(&fixture("riemann_sin.json")), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let traces = fs::read_to_string(out.join("traces_jump_0.csv")).unwrap();
    let mut lines = traces.lines();
    assert_eq!(lines.next(), Some("t,left_trace,right_trace"));
    let rows: Vec<[f64; 3]> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [f[0], f[1], f[2]]
        })
        .collect();
    let tol_j = 1e-3;
    let first = rows.iter().find(|r| (r[2] - r[1]).abs() <= tol_j).unwrap();
    assert!((0.45..=0.55).contains(&first[0]), "J reaches tol_J at t = {}", first[0]);
    assert!(rows.iter().filter(|r| r[0] < 0.45).all(|r| r[2] - r[1] > tol_j));

    let report = read_json(&out.join("report.json"));
    let j = &report["jumps"][0];
    assert_eq!(j["sign"], "up");
    assert_eq!(j["J0"], 1.0);
    assert_eq!(j["t_lower"], 0.5);
    let tau = j["tau"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&tau));
    assert!(j["max_decay_violation"].as_f64().unwrap() <= 0.02);
    assert_eq!(report["merges"].as_array().unwrap().len(), 1);
    assert_eq!(report["config"]["hamiltonian"]["kind"], "sin");

    let snaps = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    assert!(snaps.starts_with("t,x,u\n"));
    let at_zero: Vec<&str> = snaps.lines().filter(|l| l.starts_with("0.0,0.0,")).collect();
    assert_eq!(at_zero, ["0.0,0.0,0.0", "0.0,0.0,1.0"]);
}

#[test]
fn outputs_are_byte_stable_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = fixture("two_jumps_clamp.json");
    let mut dirs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("r{k}"));
        let o = hj_env(
            &["run", "--scenario", path_str(&scenario), "--out", path_str(&out), "--h", "0.005"],
            &[("HJ_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        dirs.push(dir_bytes(&out));
    }
    assert!(dirs[0].len() >= 4);
    assert_eq!(dirs[0], dirs[1]);
    assert_eq!(dirs[1], dirs[2]);
}

#[test]
fn check_affine_passes_with_tiny_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hj(&["check", "--scenario", path_str(&fixture("affine.json")), "--out", path_str(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports = read_json(&tmp.path().join("checks.json"));
    let reports = reports.as_array().unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["sandwich", "time_lipschitz", "comparison", "dual", "determinism"]);
    for r in reports {
        assert_eq!(r["pass"], true, "{r}");
        for key in r["tolerance"].as_object().unwrap().keys() {
            let v = r["measured"][key].as_f64().unwrap();
            assert!(v.abs() <= 1e-11, "{} {key} = {v}", r["name"]);
        }
    }
    let again = tempfile::tempdir().unwrap();
    hj(&["check", "--scenario", path_str(&fixture("affine.json")), "--out", path_str(again.path())]);
    assert_eq!(dir_bytes(tmp.path()), dir_bytes(again.path()));
}

#[test]
fn check_with_jump_runs_jump_checks() {
    let o = hj(&[
        "check",
        "--scenario",
        path_str(&fixture("riemann_tanh.json")),
        "--checks",
        "jump_laws,barrier,sandwich",
        "--h",
        "0.005",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reports: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["jump_laws", "barrier", "sandwich"]);
    assert_eq!(reports[1]["measured"]["mismatched_values"], 0.0);
}

#[test]
fn failing_check_gives_exit_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = read_json(&fixture("dual_sin.json"));
    config["numerics"]["tolerances"] = serde_json::json!({"dual": 1e-20});
    let path = tmp.path().join("strict.json");
    fs::write(&path, config.to_string()).unwrap();
    let o = hj(&["check", "--scenario", path_str(&path), "--checks", "dual,sandwich"]);
    assert_eq!(o.status.code(), Some(1));
    let reports: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports[0]["pass"], false);
    assert_eq!(reports[1]["pass"], true);
}

#[test]
fn inapplicable_check_is_an_error_with_fingerprint() {
    let o = hj(&["check", "--scenario", path_str(&fixture("affine.json")), "--checks", "jump_laws"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error: ["), "{err}");
    let fp: String = err["error: [".len()..].chars().take_while(|c| *c != ']').collect();
    assert_eq!(fp.len(), 16);
    assert!(fp.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn converge_smooth_sin_rates_at_least_point_eight() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hj(&[
        "converge",
        "--levels",
        "4",
        "--scenario",
        path_str(&fixture("smooth_sin.json")),
        "--out",
        path_str(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().contains("sup"));
    assert!(stdout.contains("PASS convergence"));
    let study = read_json(&tmp.path().join("converge.json"));
    let rates = study["rates"].as_array().unwrap();
    assert_eq!(rates.len(), 2);
    for r in rates {
        assert!(r["sup"].as_f64().unwrap() >= 0.8 && r["l1"].as_f64().unwrap() >= 0.8, "{r}");
    }
}

#[test]
fn riemann_builtins_meet_expectations() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hj(&["riemann", "--out", path_str(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    for (line, name) in lines.iter().zip(["sin", "tanh", "constant"]) {
        assert!(line.starts_with(&format!("PASS {name}:")), "{line}");
        assert!(tmp.path().join(name).join("traces_jump_0.csv").exists());
    }
}

#[test]
fn overrides_are_validated() {
    let s = fixture("affine.json");
    for flag in ["--cfl=1.5", "--h=-0.1", "--record-every=0"] {
        let o = hj(&["check", "--scenario", path_str(&s), flag]);
        assert_eq!(o.status.code(), Some(2), "{flag}");
        assert!(stderr(&o).contains("numerics."), "{}", stderr(&o));
    }
}

#[test]
fn schema_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"domain": [-1, 1], "T": 0.1, "hamiltonian": {"kind": "table", "samples": [[0, 0], [1, 1]]},
               "initial_data": {"segments": [{"kind": "constant", "value": 0}]}, "numerics": {"h": 0.01}}"#,
            "hamiltonian.lip",
        ),
        (
            r#"{"domain": [-1, 1], "T": 0.1, "hamiltonian": {"kind": "sin"},
               "initial_data": {"breakpoints": [0], "segments": [{"kind": "constant", "value": 0}, {"kind": "constant", "value": 0}]},
               "numerics": {"h": 0.01}}"#,
            "jump discontinuity",
        ),
        ("{\n\"domain\": [-1, 1],\n\"T\": }", "line 3"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let path = tmp.path().join(format!("bad{k}.json"));
        fs::write(&path, text).unwrap();
        let o = hj(&["run", "--scenario", path_str(&path), "--out", path_str(tmp.path())]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
    }
}

#[test]
fn bad_thread_count_and_missing_file_fail() {
    let o = hj_env(&["riemann"], &[("HJ_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("HJ_THREADS"));
    let o = hj(&["check", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hj(&["check", "--scenario", path_str(&fixture("affine.json")), "--checks", "bogus"]);
    assert!(!o.status.success());
}
