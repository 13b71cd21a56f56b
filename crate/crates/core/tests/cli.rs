use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use han_core::report::{parse_trace_csv, TRACE_HEADER};
use han_core::{format_config, DeviceSpec, SimConfig};

fn han_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_han-sim")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = SimConfig::<f64>::reference_scenario(30.0, 4);
    cfg.devices.truncate(8);
    cfg.horizon_s = 3600;
    let path = dir.join("small.cfg");
    fs::write(&path, format_config(&cfg)).unwrap();
    path
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("missing {key}"))
        .to_string()
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = han_sim(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with(TRACE_HEADER));
    assert!(!trace.contains('\r'));
    assert_eq!(parse_trace_csv(&trace).unwrap().len(), 60);

    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "runs"), "1");
    assert_eq!(
        summary_value(&summary, "peak_reduction_pct.median"),
        summary_value(&summary, "seed.4.peak_reduction_pct")
    );
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed];
        assert_eq!(han_sim(&args).status.code(), Some(0));
        fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    assert_eq!(run("9", "a"), run("9", "b"));
    assert_ne!(run("9", "c"), run("10", "d"));
}

#[test]
fn optional_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = han_sim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--round-trace",
        "--schedule-trace",
        "--device-trace",
    ]);
    assert_eq!(o.status.code(), Some(0));

    let rounds = fs::read_to_string(out.join("rounds.csv")).unwrap();
    let mut lines = rounds.lines();
    assert_eq!(lines.next(), Some("round,sender,receiver,delivered"));
    // Rounds at 0, 2, ..., 3540 (the last sampled tick), 8 x 7 ordered pairs
    // each, all delivered at loss 0.
    assert_eq!(lines.clone().count(), 1771 * 56);
    assert!(lines.all(|l| l.ends_with(",1")));

    let schedules = fs::read_to_string(out.join("schedules.csv")).unwrap();
    assert!(schedules.starts_with("period_start,device_id,start_s,end_s\n"));
    assert!(schedules.lines().count() > 1);

    for name in ["devices_coord.csv", "devices_base.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().count(), 1 + 60 * 8, "{name}");
    }
}

#[test]
fn compare_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = han_sim(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("peak reduction"));
    assert!(stdout.lines().any(|l| l.starts_with("coord")));
    assert!(stdout.lines().any(|l| l.starts_with("baseline")));
    assert!(out.join("trace.csv").exists());
}

#[test]
fn sweep_writes_one_trace_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("sweep");
    let o = han_sim(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));

    let traces = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trace_seed"))
        .count();
    assert_eq!(traces, 10);
    for seed in 4..14 {
        assert!(out.join(format!("trace_seed{seed}.csv")).exists());
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "runs"), "10");
    assert!(summary.contains("stddev_reduction_pct.max="));
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SimConfig::<f64>::reference_scenario(30.0, 1);
    cfg.devices = vec![DeviceSpec::type2(1, 1.0, 2000, 1800), DeviceSpec::type2(2, 1.0, 900, 600)];
    let path = dir.path().join("bad.cfg");
    fs::write(&path, format_config(&cfg)).unwrap();
    let out = dir.path().join("out");

    let o = han_sim(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("minDCD exceeds maxDCP for device 1"), "{stderr}");
    assert!(stderr.contains("minDCD exceeds maxDCP for device 2"), "{stderr}");
    assert!(!out.join("trace.csv").exists());
}

#[test]
fn parse_errors_and_usage_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.cfg");
    fs::write(&path, "horizon_s=abc\nbogus=1\n").unwrap();
    let o = han_sim(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("line 1"), "{stderr}");
    assert!(stderr.contains("line 2"), "{stderr}");

    assert_eq!(han_sim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(han_sim(&["run"]).status.code(), Some(1));
    assert_eq!(han_sim(&["--help"]).status.code(), Some(0));
}

#[test]
fn io_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    let o = han_sim(&["run", "--config", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = small_config(dir.path());
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = han_sim(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn in_process_entry_point() {
    assert_eq!(han_core::cli::cli_main(["han-sim", "sweep"]), han_core::cli::EXIT_INVALID);
}
