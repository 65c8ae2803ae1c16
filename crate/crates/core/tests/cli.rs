use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sl-trust");
const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn sl(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn opinion(b: f64, d: f64, u: f64) -> String {
    format!(r#"{{"labels":["x","not_x"],"belief":[{b},{d}],"uncertainty":{u},"base_rate":[0.5,0.5]}}"#)
}

fn reports(dir: &Path, name: &str, ops: &[String]) -> String {
    let body: Vec<String> =
        ops.iter().enumerate().map(|(i, o)| format!(r#"{{"agent":"v{i}","opinion":{o}}}"#)).collect();
    let path = dir.join(name);
    fs::write(&path, format!("[{}]", body.join(","))).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn detect_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let agree = reports(
        dir.path(),
        "agree.json",
        &[opinion(0.7, 0.2, 0.1), opinion(0.68, 0.22, 0.1), opinion(0.72, 0.18, 0.1)],
    );
    let o = sl(&["detect", "--reports", &agree]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let deviant = reports(
        dir.path(),
        "deviant.json",
        &[opinion(0.7, 0.2, 0.1), opinion(0.68, 0.22, 0.1), opinion(0.72, 0.18, 0.1), opinion(0.05, 0.85, 0.1)],
    );
    let o = sl(&["detect", "--reports", &deviant, "--theta", "0.15"]);
    assert_eq!(code(&o), 10);
    let result: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(result["misbehaving"], serde_json::json!(["v3"]));

    let bad = reports(dir.path(), "bad.json", &[opinion(0.7, 0.5, 0.1), opinion(0.7, 0.2, 0.1)]);
    assert_eq!(code(&sl(&["detect", "--reports", &bad])), 2);
    assert_eq!(code(&sl(&["detect", "--reports", "/nonexistent.json"])), 2);
    assert_eq!(code(&sl(&["detect", "--reports", &agree, "--theta", "1.5"])), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&sl(&["sweep", "--runs", "0"])), 2);
    assert_eq!(code(&sl(&["simulate", "--scenario", "4"])), 2);
    assert_eq!(code(&sl(&["simulate"])), 2);
    assert_eq!(code(&sl(&["sweep", "--no-such-flag"])), 2);
    assert_eq!(code(&sl(&["sweep", "--theta-min", "0.3", "--theta-max", "0.1"])), 2);
    assert_eq!(code(&sl(&["--help"])), 0);
}

#[test]
fn sweep_writes_a_row_per_theta_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = sl(&["sweep", "--runs", "1000", "--seed", "5", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("theta,p_detected,p_at_least_one,p_wrong_accusation,p_all_honest"));
    assert_eq!(lines.count(), 21);
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["artifacts"], serde_json::json!(["sweep.csv"]));
    // nothing but the artifacts and the manifest is left behind
    let mut names: Vec<String> =
        fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "sweep.csv"]);
}

#[test]
fn roc_and_scale_headers() {
    let o = sl(&["roc", "--runs", "50", "--theta-min", "0.1", "--theta-max", "0.2", "--theta-step", "0.05"]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("mu_est,sigma_est,theta,fp,tp"));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);

    let o = sl(&["scale", "--runs", "200", "--theta-min", "0.1", "--theta-max", "0.2", "--theta-step", "0.1"]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("error_rate,theta,p_tp,p_fp"));

    let o = sl(&["sweep", "--runs", "20", "--theta-min", "0.15", "--theta-max", "0.15", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
}

#[test]
fn simulate_scenario_and_single_run_trace() {
    let o = sl(&["simulate", "--scenario", "2", "--runs", "100", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("scenario,"));

    let o = sl(&["simulate", "--scenario", "3", "--trace-run", "4", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let run: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(run["run"], 4);
    assert_eq!(run["sample"]["reports"].as_array().unwrap().len(), 4);
}

#[test]
fn broker_trace_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let config = format!("{CONFIGS}/broker_intersection.json");
    let o = sl(&["simulate", "--config", &config, "--cycles", "60", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = out.join("trace.jsonl");
    assert!(out.join("trust.jsonl").exists());

    let o = sl(&["replay", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["verified"].as_u64().unwrap() > 0);

    // shift one verdict's threshold so its recorded result no longer follows
    let text = fs::read_to_string(&trace).unwrap();
    let mut done = false;
    let tampered: Vec<String> = text
        .lines()
        .map(|l| {
            let mut e: serde_json::Value = serde_json::from_str(l).unwrap();
            if !done && e["event_type"] == "verdict" {
                e["payload"]["theta"] = serde_json::json!(0.99);
                done = true;
            }
            e.to_string()
        })
        .collect();
    let bad = dir.path().join("tampered.jsonl");
    fs::write(&bad, tampered.join("\n") + "\n").unwrap();
    assert_eq!(code(&sl(&["replay", "--trace", bad.to_str().unwrap()])), 2);
}
