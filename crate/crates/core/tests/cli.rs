use std::path::Path;
use std::process::{Command, Output};

fn qgrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgrp")).args(args).output().expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "protocol = \"aodv\"\n\
         [topology]\nn = 40\nseed = 5\n\
         [[flows]]\nrate = 100000.0\nstart = 1.0\n\
         [sim]\nduration = 6.0\nwarm_up = 1.0\nrepetitions = 1\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn solve_dcf_writes_the_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    let out = qgrp(&["solve-dcf", "-o", full.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&full), 16);

    let again = dir.path().join("again.csv");
    assert!(qgrp(&["solve-dcf", "-o", again.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&again).unwrap());

    let one = dir.path().join("one.csv");
    let out = qgrp(&["solve-dcf", "-o", one.to_str().unwrap(), "--density-axis", "100", "--distance-axis", "150"]);
    assert!(out.status.success());
    assert_eq!(rows(&one), 1);
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = qgrp(&["run", "-c", &config, "-o", out_dir.to_str().unwrap(), "--logs", "--jobs", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = std::fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    let lines: Vec<&str> = runs.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("aodv,40,5,"));
    assert!(lines[2].starts_with("aodv,40,avg,"));
    for f in [
        "aggregate.csv",
        "fig2_throughput.csv",
        "fig3_pdr.csv",
        "fig4_delay.csv",
        "fig5_residual_energy.csv",
        "fig6_energy_efficiency.csv",
        "fig7_energy_std.csv",
        "logs/aodv_n40_seed5.log",
    ] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    assert!(!out_dir.join("failures.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[topology]\nn = 0\n").unwrap();
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[sim]\nduraton = 5.0\n").unwrap();
    let missing = dir.path().join("missing.toml");
    for cfg in [&bad, &unknown, &missing] {
        let r = qgrp(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(2), "{}", cfg.display());
        assert!(!r.stderr.is_empty());
    }
    let r = qgrp(&["compare", "-c", unknown.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let target = blocker.join("out");
    let r = qgrp(&["run", "-c", &config, "-o", target.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let r = qgrp(&["solve-dcf", "-o", target.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn compare_prints_one_table_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let r = qgrp(&["compare", "-c", &config, "--jobs", "1"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with("# ")).collect();
    assert_eq!(headers.len(), 6);
    assert_eq!(text.matches("n,qgrp_mean,qgrp_stderr,aodv_mean,aodv_stderr").count(), 6);
}
