use std::path::PathBuf;
use std::process::{Command, Output};

fn efrb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efrb")).args(args).env_remove("EFRB_SEED").output().unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn honest_baseline_exits_zero() {
    let o = efrb(&["run", "--scenario", &scenario("honest_baseline.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("expectations met"));
}

#[test]
fn malicious_quorum_passes_with_slash_in_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.ndjson");
    let o = efrb(&["run", "--scenario", &scenario("malicious_quorum.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = std::fs::read_to_string(out).unwrap();
    let slashes = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["type"] == "event" && v["event"] == "slash")
        .count();
    assert_eq!(slashes, 1);
}

#[test]
fn missing_file_is_usage_error() {
    let o = efrb(&["run", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(efrb(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unmet_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenario("honest_baseline.json")).unwrap()).unwrap();
    v["expect"] = serde_json::json!([{"check": "burned", "amount": 5}]);
    let path = dir.path().join("s.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = efrb(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL burned"));
}

#[test]
fn seed_precedence() {
    let path = scenario("double_voter.json");
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_efrb"));
        c.args(["run", "--scenario", &path]).env_remove("EFRB_SEED");
        if let Some(e) = env {
            c.env("EFRB_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        stdout(&c.output().unwrap())
    };
    assert!(run(None, None).contains("seed 17:"));
    assert!(run(Some("99"), None).contains("seed 99:"));
    assert!(run(Some("99"), Some("5")).contains("seed 5:"));
    let mut c = Command::new(env!("CARGO_BIN_EXE_efrb"));
    let o = c.args(["run", "--scenario", &path]).env("EFRB_SEED", "nope").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn chain_log_inspection_shows_history() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("chain.log");
    let o = efrb(&["run", "--scenario", &scenario("honest_baseline.json"), "--chain-log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let log = log.to_str().unwrap();

    let summary = stdout(&efrb(&["inspect", "--chain", log, "--audit"]));
    assert!(summary.contains("valid"), "{summary}");
    assert!(summary.contains("redactions applied: 1"));
    assert!(summary.contains("accept"));

    // The redacted transaction sits in the first block after slot 3.
    let slot = (4..40)
        .step_by(2)
        .find(|s| stdout(&efrb(&["inspect", "--chain", log, "--tx", &format!("{s}:1")])).contains("redactable"))
        .expect("redactable transaction present");
    let tx = stdout(&efrb(&["inspect", "--chain", log, "--tx", &format!("{slot}:1")]));
    assert!(tx.contains("original: \"alice: B\""), "{tx}");
    assert!(tx.contains("current: \"alice: A\""), "{tx}");

    assert_eq!(efrb(&["inspect", "--chain", log, "--tx", "999:0"]).status.code(), Some(2));
    assert_eq!(efrb(&["inspect", "--chain", log, "--tx", "junk"]).status.code(), Some(2));
}

#[test]
fn bench_csv_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let o = efrb(&["bench", "--experiment", "genreq", "--sweep", "attrs=1,5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "experiment,param,value,mean_s,stddev_s");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("genreq,attrs,5,"));
    let mean: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(mean > 0.0);

    assert_eq!(efrb(&["bench", "--experiment", "setup"]).status.code(), Some(2));
    assert_eq!(efrb(&["bench", "--experiment", "gentx", "--sweep", "wgn=5"]).status.code(), Some(2));
    assert_eq!(efrb(&["bench", "--experiment", "gentx", "--iterations", "3"]).status.code(), Some(2));
}
