//! End-to-end behaviour of the `angio` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn angio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_angio"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SHORT: &str = "preset = custom\nparams.a = 1\nparams.mu = 1\nparams.chi = 0.3\ngrid.cells = 32\nsolver.dt = 0.005\nsolver.t_end = 0.5\nsolver.record_every = 2\ninitial.profile = random_positive\ninitial.amplitude = 0.3\n";

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SHORT);
    let out = dir.path().join("out");
    let o = angio(&["--quiet", "--out", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    for f in ["trajectory.csv", "thresholds.txt", "thresholds.csv", "summary.txt", "terminal_u.csv", "terminal_v.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.lines().all(|l| l.contains('=')));
    assert!(summary.contains("verdict="));
    let header = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,mass_u,mass_v,"));
}

#[test]
fn seed_flag_controls_random_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SHORT);
    let read = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = angio(&["--quiet", "--seed", seed, "--out", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = read("7", "a");
    assert_eq!(a, read("7", "b"));
    assert_ne!(a, read("8", "c"));
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "preset = custom\nparams.mu = -1\n");
    let o = angio(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 2") && e.contains("params.mu"), "{e}");

    let cfg = write(dir.path(), "c2.cfg", "preset = C2_logistic\nparams.a = 0\n");
    let o = angio(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.a"), "{}", stderr(&o));

    let o = angio(&["run", "/nonexistent/file.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    let o = angio(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn blowup_probe_exits_two_and_keeps_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("blow");
    let cfg = configs().join("blowup_probe.cfg");
    let o = angio(&["--quiet", "--out", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("termination=blowup_detected"));
}

#[test]
fn sweep_rows_are_ordered_and_flip_on_mu() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = configs().join("mu_sweep.cfg");
    let o = angio(&["--quiet", "--out", out.to_str().unwrap(), "sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let col = |name: &str| rows[0].iter().position(|h| *h == name).unwrap();
    assert_eq!(rows.len(), 4);
    let mus: Vec<&str> = rows[1..].iter().map(|r| r[col("params.mu")]).collect();
    assert_eq!(mus, ["0.05", "0.2", "1"]);
    let passes: Vec<&str> = rows[1..].iter().map(|r| r[col("mu_passes")]).collect();
    assert_eq!(passes, ["false", "false", "true"]);
    for k in 0..3 {
        assert!(out.join(format!("run_{k:04}")).join("summary.txt").is_file());
    }
}

#[test]
fn verify_small_battery_and_injected_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = angio(&["--out", out.to_str().unwrap(), "verify", "--pairs", "3", "--fields", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("PASS interpolation"), "{text}");
    let rows = fs::read_to_string(out.join("verify.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 2 * 3 * 4 * 3 + 50 + 8);

    let o = angio(&["verify", "--pairs", "1", "--fields", "5", "--inject-failure"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("FAIL"));
}

#[test]
fn fit_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", SHORT);
    let out = dir.path().join("out");
    let o = angio(&["--quiet", "--out", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = out.join("trajectory.csv");
    let o = angio(&["fit", csv.to_str().unwrap(), "--column", "mass_v", "--window", "0.1:0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("rate="));

    let o = angio(&["fit", csv.to_str().unwrap(), "--column", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("available columns"), "{}", stderr(&o));

    let o = angio(&["fit", csv.to_str().unwrap(), "--column", "F2", "--window", "bad"]);
    assert_eq!(o.status.code(), Some(1));
}
