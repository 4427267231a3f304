//! Parallel parameter sweeps with one aggregate CSV row per point.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use angio_core::fmt_f64;
use rayon::prelude::*;

use crate::config::SweepSpec;
use crate::error::{exit, CliError};
use crate::scenario::{run_scenario, ScenarioOutcome};

/// Fixed leading and trailing columns around the swept keys.
pub const ROW_PREFIX: [&str; 1] = ["index"];
pub const ROW_SUFFIX: [&str; 14] = [
    "status",
    "exit_code",
    "termination",
    "verdict",
    "t_final",
    "linf_u",
    "linf_v",
    "linf_u_dev",
    "linf_v_dev",
    "fit_rate",
    "fit_r_squared",
    "mu_threshold",
    "mu_passes",
    "d0_check_value",
];
pub const ROW_TAIL: [&str; 3] = ["sigma", "regime", "message"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<String>,
    pub exit_code: i32,
    /// Every aggregate column after the swept values, already formatted.
    pub cells: Vec<String>,
}

impl SweepRow {
    pub fn verdict(&self) -> &str {
        &self.cells[3]
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub header: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let mut cols = vec![r.index.to_string()];
            cols.extend(r.values.iter().map(|v| csv_escape(v)));
            cols.extend(r.cells.iter().map(|v| csv_escape(v)));
            let _ = writeln!(s, "{}", cols.join(","));
        }
        s
    }

    /// Worst exit status across points: failures never abort a sweep, but
    /// a driver still learns that something went wrong.
    pub fn exit_code(&self) -> i32 {
        self.rows.iter().map(|r| r.exit_code).max().unwrap_or(exit::OK)
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_f64)
}

fn row_from_outcome(o: &ScenarioOutcome) -> (i32, Vec<String>) {
    let last = o.trajectory.records.last();
    let col = |name: &str| last.and_then(|r| r.column(name)).map_or_else(String::new, fmt_f64);
    let (rate, r2) = match &o.fit {
        Ok(f) => (fmt_f64(f.rate), fmt_f64(f.r_squared)),
        Err(_) => (String::new(), String::new()),
    };
    let code = o.exit_code();
    let cells = vec![
        if code == exit::OK { "ok" } else { "failed" }.to_string(),
        code.to_string(),
        o.trajectory.termination.to_string(),
        if o.all_pass() { "pass" } else { "fail" }.to_string(),
        fmt_f64(o.trajectory.terminal.t),
        col("linf_u"),
        col("linf_v"),
        col("linf_u_dev"),
        col("linf_v_dev"),
        rate,
        r2,
        opt(o.report.mu_threshold),
        o.report.mu_passes.map_or_else(String::new, |b| b.to_string()),
        opt(o.report.d0_check_value),
        opt(o.report.sigma),
        o.report.regime.label.to_string(),
        o.trajectory.message.clone().unwrap_or_default(),
    ];
    (code, cells)
}

fn row_from_error(e: &CliError) -> (i32, Vec<String>) {
    let code = e.exit_code();
    let mut cells = vec![String::new(); ROW_SUFFIX.len() + ROW_TAIL.len()];
    cells[0] = "error".into();
    cells[1] = code.to_string();
    cells[3] = "fail".into();
    *cells.last_mut().unwrap() = e.to_string();
    (code, cells)
}

/// Runs every point of `spec` on up to `max_parallel` threads. Each point
/// writes into `out/run_NNNN` when `out` is given; `sweep.csv` is written
/// after all runs finish, in sweep order.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<SweepResult, CliError> {
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.max_parallel)
        .build()
        .map_err(|e| CliError::Usage(format!("sweep.max_parallel: cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, values)| {
                let dir = out.map(|d| d.join(format!("run_{index:04}")));
                let result = spec
                    .config_at(values)
                    .map_err(CliError::from)
                    .and_then(|cfg| run_scenario(&cfg, dir.as_deref()));
                let (exit_code, cells) = match &result {
                    Ok(o) => row_from_outcome(o),
                    Err(e) => row_from_error(e),
                };
                SweepRow {
                    index,
                    values: values.clone(),
                    exit_code,
                    cells,
                }
            })
            .collect()
    });

    let mut header: Vec<String> = ROW_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend(spec.axes.iter().map(|a| a.key.clone()));
    header.extend(ROW_SUFFIX.iter().chain(ROW_TAIL.iter()).map(|s| s.to_string()));
    let result = SweepResult { header, rows };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("sweep.csv");
        fs::write(&path, result.to_csv()).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_sweep_str;

    const BASE: &str = "preset = custom\nparams.a = 1\nparams.mu = 1\ngrid.cells = 16\nsolver.dt = 0.01\nsolver.t_end = 0.05\nsolver.record_every = 1\n";

    #[test]
    fn rows_follow_sweep_order() {
        let text = format!("{BASE}sweep.params.chi = 0.1, 0.2, 0.3\nsweep.params.mu = 1, 2, 3\nsweep.max_parallel = 4\n");
        let spec = parse_sweep_str(&text).unwrap();
        let r = run_sweep(&spec, None).unwrap();
        assert_eq!(r.rows.len(), 9);
        for (k, row) in r.rows.iter().enumerate() {
            assert_eq!(row.index, k);
            assert_eq!(row.values, spec.points()[k]);
        }
        assert_eq!(r.rows[1].values, vec!["0.1".to_string(), "2".to_string()]);
        let width = r.header.len();
        for line in r.to_csv().lines() {
            assert_eq!(line.split(',').count(), width, "{line}");
        }
    }

    #[test]
    fn schedule_does_not_change_output() {
        let text = format!("{BASE}sweep.params.chi = 0.1, 0.4\nsweep.params.xi1 = 0.5, 1\n");
        let mut spec = parse_sweep_str(&text).unwrap();
        spec.max_parallel = 1;
        let serial = run_sweep(&spec, None).unwrap().to_csv();
        spec.max_parallel = 4;
        assert_eq!(run_sweep(&spec, None).unwrap().to_csv(), serial);
    }

    #[test]
    fn failures_are_recorded_in_row() {
        // The larger dt violates the stability bound at the initial state.
        let text = format!("{BASE}sweep.solver.dt = 0.01, 0.9\n");
        let spec = parse_sweep_str(&text).unwrap();
        let r = run_sweep(&spec, None).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].cells[0], "ok");
        assert_eq!(r.rows[1].cells[0], "error");
        assert_eq!(r.rows[1].exit_code, exit::USAGE);
        assert!(r.rows[1].cells.last().unwrap().contains("solver.dt"));
        assert_eq!(r.exit_code(), exit::USAGE);
    }

    #[test]
    fn single_point_matches_scenario() {
        let text = format!("{BASE}sweep.params.chi = 0.2\n");
        let spec = parse_sweep_str(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = run_sweep(&spec, Some(dir.path())).unwrap();
        let cfg = spec.config_at(&spec.points()[0]).unwrap();
        let o = run_scenario(&cfg, None).unwrap();
        assert_eq!(r.rows[0].cells, row_from_outcome(&o).1);
        assert!(dir.path().join("sweep.csv").exists());
        assert!(dir.path().join("run_0000").join("trajectory.csv").exists());
    }

    #[test]
    fn escaping() {
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(csv_escape("plain"), "plain");
    }
}
