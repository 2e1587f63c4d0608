use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn rtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtc")).args(args).output().expect("run rtc")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn toy() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/vending_toy.json").display().to_string()
}

const BINARY: [&str; 4] = ["--source", "bernoulli:0.3", "--channel", "bsc:0.3"];

fn with_binary<'a>(rest: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&str> = rest[..1].to_vec();
    v.extend(BINARY);
    v.extend(&rest[1..]);
    v
}

#[test]
fn solve_symbol_by_symbol() {
    let v = json(&rtc(&with_binary(&["solve", "--d", "0", "--memory", "last:0"])));
    assert_eq!(v["distortion"].as_f64().unwrap(), 0.3);
    assert_eq!(v["scenario"], "feedback-finite");
}

#[test]
fn solve_noiseless_channel_is_lossless() {
    let v = json(&rtc(&["solve", "--source", "bernoulli:0.3", "--channel", "bsc:0", "--d", "1", "--memory", "last:1"]));
    assert_eq!(v["distortion"].as_f64().unwrap(), 0.0);
}

#[test]
fn lookahead_and_memory_help() {
    let v = json(&rtc(&with_binary(&["solve", "--d", "1", "--memory", "last:2"])));
    let d = v["distortion"].as_f64().unwrap();
    assert!(d < 0.3 - 1e-3 && d > 0.2213, "{d}");
}

#[test]
fn report_round_trips() {
    let out = rtc(&with_binary(&["solve", "--d", "1", "--memory", "last:1"]));
    let text = stdout(&out);
    let parsed: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);
}

#[test]
fn usage_errors_exit_2() {
    let out = rtc(&["solve", "--source", "bernoulli:0.3", "--channel", "bsc:0.3", "--lookahead", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(rtc(&["solve", "--source", "bernoulli:1.5", "--channel", "bsc:0.3"]).status.code(), Some(2));
    assert_eq!(rtc(&["simulate", "--source", "bernoulli:0.3", "--channel", "bsc:0.3"]).status.code(), Some(2));
}

#[test]
fn capacity_errors_exit_2() {
    let out = rtc(&with_binary(&["solve", "--d", "1", "--memory", "last:6"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
    let out = Command::new(env!("CARGO_BIN_EXE_rtc"))
        .args(with_binary(&["solve", "--d", "3"]))
        .env("RTC_MAX_STATES", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shannon_limit() {
    let v = json(&rtc(&with_binary(&["shannon"])));
    assert!((v["value"].as_f64().unwrap() - 0.2214).abs() < 1e-4);
}

#[test]
fn check_s2s_useless_channel_holds() {
    let v = json(&rtc(&["check-s2s", "--source", "bernoulli:0.3", "--channel", "bsc:0.5", "--d", "1", "--grid", "20"]));
    assert_eq!(v["holds_on_grid"], true);
}

#[test]
fn sweep_rows_and_order() {
    let out = rtc(&[
        "sweep", "--fix", "delta=0.3", "--vary", "p=0:0.5:0.1", "--quantities", "D0,Dinf,Ddm", "--d", "1", "--m", "0,1,2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,delta,d,m,quantity,value,flags"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6 * 5);
    assert_eq!(rows[0][..5], ["0", "0.3", "", "", "D0"]);
    assert_eq!(rows[4][..5], ["0", "0.3", "1", "2", "Ddm"]);
    for chunk in rows.chunks(5) {
        let v: Vec<f64> = chunk.iter().map(|r| r[5].parse().unwrap()).collect();
        let (d0, dinf, m0, m1, m2) = (v[0], v[1], v[2], v[3], v[4]);
        for (lo, hi) in [(dinf, m2), (m2, m1), (m1, m0), (m0, d0)] {
            assert!(lo <= hi + 1e-9, "{chunk:?}");
        }
    }
    let two = rtc(&[
        "--workers", "2", "sweep", "--fix", "delta=0.3", "--vary", "p=0:0.5:0.1", "--quantities", "D0,Dinf,Ddm", "--d", "1",
        "--m", "0,1,2",
    ]);
    assert_eq!(stdout(&two), text);
}

#[test]
fn sweep_empty_range_and_unknown_quantity() {
    let out = rtc(&["sweep", "--fix", "delta=0.3", "--vary", "p=0.5:0:0.1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "p,delta,d,m,quantity,value,flags\n");
    let out = rtc(&["sweep", "--fix", "delta=0.3", "--vary", "p=0:0.5:0.1", "--quantities", "D0,Dx"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn region_summary() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let out = rtc(&[
        "region", "--p", "0:0.5:0.1", "--delta", "0:0.5:0.1", "--d", "1", "--m", "2", "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["region_nonempty"], true);
    assert_eq!(stdout(&out).lines().count(), 1 + 36);

    for (delta, margin) in [("0", "1e-6"), ("0:0.5:0.1", "0.5")] {
        let args = ["region", "--p", "0:0.5:0.1", "--delta", delta, "--margin", margin, "--summary", summary.to_str().unwrap()];
        assert!(rtc(&args).status.success());
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
        assert_eq!(v["region_nonempty"], false, "delta {delta}, margin {margin}");
    }
}

#[test]
fn simulate_is_deterministic() {
    let args = with_binary(&["simulate", "--d", "1", "--memory", "last:1", "--seed", "7", "--horizon", "20000"]);
    let a = rtc(&args);
    let b = rtc(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let sim = v["simulation"]["mean_distortion"].as_f64().unwrap();
    assert!((sim - v["solved_distortion"].as_f64().unwrap()).abs() < 0.02);
}

#[test]
fn simulate_saved_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle.json");
    let b = bundle.to_str().unwrap();
    assert!(rtc(&with_binary(&["solve", "--d", "1", "--memory", "last:1", "--bundle-out", b])).status.success());
    let direct = json(&rtc(&with_binary(&["simulate", "--d", "1", "--memory", "last:1", "--seed", "1", "--horizon", "5000"])));
    let loaded = json(&rtc(&with_binary(&["simulate", "--d", "1", "--bundle", b, "--seed", "1", "--horizon", "5000"])));
    assert_eq!(direct["simulation"], loaded["simulation"]);
}

#[test]
fn vending_modes() {
    let spec = toy();
    let solve = |extra: &[&str]| {
        let mut args = vec!["solve", "--spec", &spec, "--d", "1"];
        args.extend(extra);
        json(&rtc(&args))
    };
    assert_eq!(solve(&["--unconstrained"])["distortion"].as_f64().unwrap(), 0.0);
    assert!((solve(&["--zero-cost-only"])["distortion"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-8);
    let half = solve(&[]);
    assert!((half["distortion"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-8);
    assert_eq!(half["parameters"]["budget"].as_f64(), Some(0.5));
    assert_eq!(rtc(&["solve", "--source", "bernoulli:0.3", "--channel", "bsc:0.3", "--budget", "1"]).status.code(), Some(2));
}
