use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use possmc::harness::{read_scenario, write_track_set};

fn possmc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_possmc")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&possmc(&["simulate", "--preset", "high_fa", "--seed", "4", "--out", "a.scn"], dir.path()));
    ok(&possmc(&["simulate", "--preset", "high_fa", "--seed", "4", "--out", "b.scn"], dir.path()));
    ok(&possmc(&["simulate", "--preset", "high_fa", "--seed", "5", "--out", "c.scn"], dir.path()));
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.scn"), read("b.scn"));
    assert_ne!(read("a.scn"), read("c.scn"));
}

#[test]
fn smooth_evaluate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    ok(&possmc(&["simulate", "--preset", "simple", "--seed", "1", "--out", "s.scn"], dir.path()));
    let stdout = ok(&possmc(
        &["smooth", "--scenario", "s.scn", "--sampler", "both", "--iters", "200", "--repeats", "2", "--out", "run"],
        dir.path(),
    ));
    assert!(stdout.contains("hisp") && stdout.contains("baseline"));
    let run = dir.path().join("run");
    for stem in ["hisp_r0", "hisp_r1", "baseline_r0", "baseline_r1"] {
        assert!(run.join(format!("{stem}.trace.csv")).is_file());
        assert!(run.join(format!("{stem}.tracks.json")).is_file());
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 4);
    assert!(run.join("config.toml").is_file());

    // the saved config reproduces the run
    let again = ok(&possmc(&["smooth", "--config", "run/config.toml", "--out", "run2"], dir.path()));
    assert_eq!(again, stdout);
    assert_eq!(fs::read(run.join("hisp_r1.tracks.json")).unwrap(), fs::read(dir.path().join("run2/hisp_r1.tracks.json")).unwrap());

    let truth = read_scenario(BufReader::new(File::open(dir.path().join("s.scn")).unwrap())).unwrap().truth.unwrap();
    write_track_set(&truth.track_set().unwrap(), File::create(dir.path().join("truth.json")).unwrap()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&ok(&possmc(&["evaluate", "--result", "truth.json", "--truth", "s.scn"], dir.path()))).unwrap();
    assert_eq!(report["metrics"]["accuracy"], 1.0);
    assert_eq!(report["metrics"]["track_count_error"], 0);
    assert_eq!(report["log_pi"], report["ground_truth_log_pi"]);

    let report: serde_json::Value = serde_json::from_str(&ok(&possmc(
        &["evaluate", "--result", "run/hisp_r0.tracks.json", "--truth", "s.scn"],
        dir.path(),
    )))
    .unwrap();
    let acc = report["metrics"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    ok(&possmc(&["trace-export", "run/hisp_r0.trace.csv", "run/baseline_r0.trace.csv", "--out", "tidy.csv"], dir.path()));
    let mut rdr = csv::Reader::from_path(dir.path().join("tidy.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().get(0), Some("run"));
    let runs: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(runs.len(), 2 * 201);
    assert!(runs.iter().any(|r| r == "hisp_r0") && runs.iter().any(|r| r == "baseline_r0"));
}

#[test]
fn sweep_writes_all_settings() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&possmc(&["sweep", "--preset", "simple", "--iters", "50", "--out", "sw"], dir.path()));
    assert_eq!(stdout.lines().count(), 10);
    let body = fs::read_to_string(dir.path().join("sw/sweep_traces.csv")).unwrap();
    assert_eq!(body.lines().count(), 1 + 10 * 51);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(possmc(&["simulate", "--preset", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(possmc(&["smooth", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(possmc(&["smooth", "--preset", "simple", "--c", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(possmc(&["smooth", "--iters", "5"], dir.path()).status.code(), Some(2));

    fs::write(dir.path().join("bad.scn"), "horizon 3\nobs_dim 2\nobs 1 0.0 oops\n").unwrap();
    let out = possmc(&["smooth", "--scenario", "bad.scn", "--iters", "5"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(possmc(&["smooth", "--scenario", "missing.scn"], dir.path()).status.code(), Some(3));
}
