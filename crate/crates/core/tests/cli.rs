mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use idt_core::bench::{Condition, Suite, SystemConfig};
use idt_core::cli::run;
use idt_core::io::write_metrics;
use idt_core::synth::{Perturbation, PerturbationKind};
use idt_core::{stream_metrics, BaselineFile, Discretizer};

fn idt(args: &[&str]) -> i32 {
    run(std::iter::once("idt").chain(args.iter().copied()))
}

fn write_stream(dir: &Path) -> (std::path::PathBuf, Vec<idt_core::Transition>) {
    let stream = common::desk_stream(21, 6, 5);
    let path = dir.join("stream.jsonl");
    std::fs::write(&path, common::to_jsonl(&stream)).unwrap();
    (path, stream)
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(idt(&[]), 2);
    assert_eq!(idt(&["monitor", "--bogus"]), 2);
    assert_eq!(idt(&["calibrate", "--input", "x.jsonl"]), 2);
    assert_eq!(idt(&["bench", "--out", "d", "--seeds", "0"]), 2);
    assert_eq!(idt(&["frobnicate"]), 2);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_idt");
    let status = Command::new(exe).arg("--nope").stderr(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(exe)
        .args(["monitor", "--input", "/nonexistent", "--baseline", "/nonexistent"])
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(exe).arg("--help").stdout(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let out = out.to_str().unwrap();
    assert_eq!(idt(&["calibrate", "--input", "/nonexistent.jsonl", "--calib-steps", "500", "--out", out]), 1);
    let (path, _) = write_stream(dir.path());
    // more calibration steps than the stream holds
    assert_eq!(
        idt(&["calibrate", "--input", path.to_str().unwrap(), "--calib-steps", "999999", "--out", out]),
        1
    );
}

#[test]
fn calibrate_then_monitor_reproduces_in_process_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (path, stream) = write_stream(dir.path());
    let groups = dir.path().join("groups.json");
    std::fs::write(
        &groups,
        r#"{"state_groups": [[0, 1], [2, 3], [4, 5]], "action_groups": [[0], [1]]}"#,
    )
    .unwrap();
    let baseline_path = dir.path().join("baseline.json");
    let metrics_path = dir.path().join("metrics.jsonl");
    let events_path = dir.path().join("events.jsonl");
    let p = |x: &Path| x.to_str().unwrap().to_string();

    let code = idt(&[
        "calibrate", "--input", &p(&path), "--window", "300", "--stride", "50", "--bins", "3", "--clip", "3.0",
        "--groups", &p(&groups), "--calib-steps", "2000", "--out", &p(&baseline_path),
    ]);
    assert_eq!(code, 0);
    let baseline = BaselineFile::load(&baseline_path).unwrap();
    assert_eq!(baseline.grouping.state_groups.len(), 3);
    assert!(baseline.model.channels.len() == 5, "reward is present, so all channels calibrate");

    let code = idt(&[
        "monitor", "--input", &p(&path), "--baseline", &p(&baseline_path), "--threshold", "3.0",
        "--min-consecutive", "1", "--onset-step", "2000", "--metrics-out", &p(&metrics_path),
        "--events-out", &p(&events_path),
    ]);
    assert_eq!(code, 0);

    let d = Discretizer::new(baseline.discretizer.clone(), baseline.grouping.clone()).unwrap();
    let symbols: Vec<_> = stream.iter().map(|x| d.apply(x).unwrap()).collect();
    let mut expected = Vec::new();
    write_metrics(&mut expected, &stream_metrics(&symbols, &baseline.window).unwrap()).unwrap();
    assert_eq!(std::fs::read(&metrics_path).unwrap(), expected);

    // strong action noise from step 2000 on is caught with latencies
    let events = std::fs::read_to_string(&events_path).unwrap();
    assert!(events.lines().any(|l| l.contains("latency_windows")), "{events}");
}

#[test]
fn monitor_reads_stdin_and_writes_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let (path, stream) = write_stream(dir.path());
    let baseline_path = dir.path().join("baseline.json");
    let b = baseline_path.to_str().unwrap();
    assert_eq!(idt(&["calibrate", "--input", path.to_str().unwrap(), "--calib-steps", "1500", "--out", b]), 0);

    let mut child = Command::new(env!("CARGO_BIN_EXE_idt"))
        .args(["monitor", "--input", "-", "--baseline", b])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let payload = common::to_jsonl(&stream);
    let mut stdin = child.stdin.take().unwrap();
    let feeder = std::thread::spawn(move || stdin.write_all(payload.as_bytes()).unwrap());
    let out = child.wait_with_output().unwrap();
    feeder.join().unwrap();
    assert!(out.status.success());
    let lines = String::from_utf8(out.stdout).unwrap().lines().count();
    assert_eq!(lines, (stream.len() - 300) / 50 + 1);
}

fn small_suite() -> Suite {
    let mut system = SystemConfig::desk();
    if let SystemConfig::Linear { config, .. } = &mut system {
        config.episode_length = 250;
    }
    let conditions = vec![
        Condition::new(system.clone(), Perturbation::new(PerturbationKind::ActionNoise, 0.04, 7)),
        Condition::new(system, Perturbation::new(PerturbationKind::DynamicsScale, 0.1, 7)),
    ];
    Suite::new(conditions, 8)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((
            entry.strip_prefix(dir).unwrap().display().to_string(),
            std::fs::read(&entry).unwrap(),
        ));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn bench_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let suite_path = dir.path().join("suite.json");
    std::fs::write(&suite_path, serde_json::to_string_pretty(&small_suite()).unwrap()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let code = idt(&[
            "bench", "--suite", suite_path.to_str().unwrap(), "--seeds", "2", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    let names: Vec<_> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"summary.json"));
    assert!(names.contains(&"summary.txt"));
    assert!(names.contains(&"trials.jsonl"));
    assert_eq!(names.iter().filter(|n| n.starts_with("series")).count(), 4);
    assert_eq!(fa, fb);

    let summary: serde_json::Value = serde_json::from_slice(&fa.iter().find(|(n, _)| n == "summary.json").unwrap().1).unwrap();
    let rows: Vec<_> = summary["summary"]["rows"].as_array().unwrap().iter().map(|r| r["metric"].as_str().unwrap().to_string()).collect();
    assert_eq!(rows, ["union", "P", "Hf", "Hb", "dH", "reward"]);
}

#[test]
fn oracle_check_reports_and_enforces_tolerance() {
    assert_eq!(idt(&["oracle-check", "--loops", "2", "--samples", "100000"]), 0);
    assert_eq!(idt(&["oracle-check", "--loops", "1", "--samples", "1000", "--tolerance", "1e-12"]), 1);
}
