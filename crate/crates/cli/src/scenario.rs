//! Running one scenario: simulation, threshold report, rate fit, verdicts
//! and output files.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use angio_core::functionals::{
    default_window, entropy_sandwich_check, fit_decay_rate, mass_balance_residual,
    window_above_floor,
};
use angio_core::grid::write_field_csv;
use angio_core::thresholds::{ReportInputs, ThresholdReport};
use angio_core::{
    fmt_f64, make_initial, run, spectral_info, Error, Field, RateFit, Termination, Trajectory,
};

use crate::config::{FitWindow, Preset, ScenarioConfig};
use crate::error::{exit, CliError, ConfigError};

/// Relative floor below which an `auto` fit window stops.
pub const AUTO_WINDOW_FLOOR: f64 = 1e-6;
/// Slack on monotonicity checks, relative to the functional at the start
/// of the checked interval.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Start of the interval on which the logistic functional must decrease.
pub const F2_MONOTONE_FROM: f64 = 2.0;
/// Start of the interval on which `F1` must decrease.
pub const F1_MONOTONE_FROM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Verdict { name, pass, detail }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub trajectory: Trajectory,
    pub initial_u: Field,
    pub report: ThresholdReport,
    pub fit: Result<RateFit, String>,
    pub verdicts: Vec<Verdict>,
    pub summary: String,
}

impl ScenarioOutcome {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        match self.trajectory.termination {
            Termination::Completed => exit::OK,
            Termination::BlowupDetected => exit::BLOWUP,
            Termination::StepFailure => exit::NUMERICAL,
        }
    }
}

fn core_error(e: Error, key: &str) -> CliError {
    match e {
        Error::InvalidArgument(m) | Error::InvalidGrid(m) => {
            CliError::Config(ConfigError::new(None, key, m))
        }
        other => CliError::Numerical(other),
    }
}

/// Resolves a fit window against a series.
pub fn resolve_window(window: FitWindow, series: &[(f64, f64)]) -> Result<(f64, f64), String> {
    match window {
        FitWindow::Explicit(a, b) => Ok((a, b)),
        FitWindow::LastHalf => default_window(series).ok_or_else(|| "empty series".to_string()),
        FitWindow::Auto(t0) => {
            let start = series
                .iter()
                .find(|(t, _)| *t >= t0)
                .map(|p| p.1)
                .ok_or_else(|| format!("no samples after t = {t0}"))?;
            window_above_floor(series, t0, AUTO_WINDOW_FLOOR * start.abs())
                .ok_or_else(|| format!("series is already at its floor at t = {t0}"))
        }
    }
}

/// Largest increase between consecutive samples with `t ≥ from`, and the
/// allowed slack.
fn monotone_defect(series: &[(f64, f64)], from: f64) -> Option<(f64, f64)> {
    let tail: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t >= from).copied().collect();
    let first = tail.first()?.1;
    let worst = tail
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    Some((worst, MONOTONE_SLACK * first.abs()))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn pass_fail(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

/// Runs `cfg`, writing artifacts into `out` when given.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<ScenarioOutcome, CliError> {
    let grid = cfg.grid();
    let p = cfg.params;
    let init = make_initial(&grid, &cfg.initial_spec()).map_err(|e| core_error(e, "initial.amplitude"))?;
    let traj = run(&init, &p, &cfg.solver).map_err(|e| core_error(e, "solver.dt"))?;

    let cp = if p.a > 0.0 {
        spectral_info(&grid, &cfg.solver.elliptic)
            .map_err(CliError::Numerical)?
            .poincare_cp
    } else {
        f64::NAN
    };
    let inputs = ReportInputs {
        u0_mass: init.u.integrate(),
        omega_measure: grid.measure(),
        convex: grid.is_convex(),
        cp,
        constants: cfg.constants,
    };
    let report = ThresholdReport::evaluate(&p, &inputs, Some(&traj)).map_err(|e| core_error(e, "params"))?;

    let series = traj.series(&cfg.fit.column).unwrap_or_default();
    let fit = resolve_window(cfg.fit.window, &series)
        .and_then(|w| fit_decay_rate(&series, w).map_err(|e| e.to_string()));

    let verdicts = verdicts(cfg, &init.u, &traj, &report, &fit);
    let summary = summary_text(cfg, &traj, &report, &fit, &verdicts);
    let outcome = ScenarioOutcome {
        trajectory: traj,
        initial_u: init.u,
        report,
        fit,
        verdicts,
        summary,
    };
    if let Some(dir) = out {
        write_artifacts(&outcome, dir)?;
    }
    Ok(outcome)
}

fn verdicts(
    cfg: &ScenarioConfig,
    u0: &Field,
    traj: &Trajectory,
    report: &ThresholdReport,
    fit: &Result<RateFit, String>,
) -> Vec<Verdict> {
    let p = cfg.params;
    let recs = &traj.records;
    let mut v = Vec::new();
    v.push(Verdict::new(
        "completed",
        traj.termination == Termination::Completed,
        traj.termination.to_string(),
    ));

    let min_u = recs.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min);
    let min_v = recs.iter().map(|r| r.min_v).fold(f64::INFINITY, f64::min);
    v.push(Verdict::new(
        "positivity",
        min_u > 0.0 && min_v >= 0.0,
        format!("min_u={} min_v={}", fmt_f64(min_u), fmt_f64(min_v)),
    ));

    let mass0 = u0.integrate();
    if p.a == 0.0 && p.mu == 0.0 {
        let drift = recs.iter().map(|r| (r.mass_u - mass0).abs()).fold(0.0, f64::max);
        v.push(Verdict::new(
            "mass_conservation",
            drift <= 1e-10 * mass0,
            format!("max |mass_u - mass_u(0)| = {}", fmt_f64(drift)),
        ));
    } else if cfg.solver.record_every == 1 {
        let res = mass_balance_residual(traj);
        v.push(Verdict::new(
            "mass_law",
            res <= 1e-10 * mass0.max(1.0),
            format!("max per-step residual {}", fmt_f64(res)),
        ));
    }
    if p.mu > 0.0 {
        let peak = recs.iter().map(|r| r.mass_u).fold(0.0, f64::max);
        v.push(Verdict::new(
            "m1_ceiling",
            peak <= report.m1 + 1e-8,
            format!("max mass_u={} m1={}", fmt_f64(peak), fmt_f64(report.m1)),
        ));
    }
    let sandwich = [u0, &traj.terminal.u]
        .iter()
        .filter_map(|u| entropy_sandwich_check(u).ok())
        .map(|(lo, hi)| lo.min(hi))
        .fold(f64::INFINITY, f64::min);
    v.push(Verdict::new(
        "entropy_sandwich",
        sandwich >= -1e-10 * mass0.max(1.0),
        format!("smallest gap {}", fmt_f64(sandwich)),
    ));

    let fit_ok = |f: &RateFit| f.rate > 0.0 && f.r_squared >= 0.95;
    match cfg.preset {
        Preset::C1NoMitosis => {
            v.push(Verdict::new(
                "d0_check",
                report.d0_check_value.is_some_and(|x| x > 0.0),
                format!(
                    "value={} epsilon1={}",
                    fmt_f64(report.d0_check_value.unwrap_or(f64::NAN)),
                    fmt_f64(report.epsilon1.unwrap_or(f64::NAN))
                ),
            ));
            let f1 = traj.series("F1").unwrap_or_default();
            let (worst, slack) = monotone_defect(&f1, F1_MONOTONE_FROM).unwrap_or((f64::NAN, 0.0));
            v.push(Verdict::new(
                "F1_monotone",
                worst <= slack,
                format!("largest increase {} slack {}", fmt_f64(worst), fmt_f64(slack)),
            ));
            let dev = recs.last().map_or(f64::NAN, |r| r.linf_u_dev);
            v.push(Verdict::new("converged", dev < 1e-3, format!("linf_u_dev={}", fmt_f64(dev))));
            v.push(Verdict::new(
                "decay_fit",
                fit.as_ref().is_ok_and(fit_ok),
                fit.as_ref().map_or_else(|e| e.clone(), |f| format!("rate={} r2={}", fmt_f64(f.rate), fmt_f64(f.r_squared))),
            ));
        }
        Preset::C2Logistic => {
            v.push(Verdict::new(
                "mu_threshold",
                report.mu_passes == Some(true),
                format!(
                    "mu={} threshold={}",
                    fmt_f64(p.mu),
                    fmt_f64(report.mu_threshold.unwrap_or(f64::NAN))
                ),
            ));
            let f2 = traj.series("F2").unwrap_or_default();
            let (worst, slack) = monotone_defect(&f2, F2_MONOTONE_FROM).unwrap_or((f64::NAN, 0.0));
            v.push(Verdict::new(
                "F2_monotone",
                worst <= slack,
                format!("largest increase {} slack {}", fmt_f64(worst), fmt_f64(slack)),
            ));
            let last = recs.last();
            let (du, dv) = last.map_or((f64::NAN, f64::NAN), |r| (r.linf_u_dev, r.linf_v_dev));
            v.push(Verdict::new(
                "converged",
                du < 1e-3 && dv < 1e-3,
                format!("linf_u_dev={} linf_v_dev={}", fmt_f64(du), fmt_f64(dv)),
            ));
            let sigma = report.sigma.unwrap_or(f64::NAN);
            v.push(Verdict::new(
                "rate_vs_sigma",
                fit.as_ref().is_ok_and(|f| f.rate >= 0.9 * sigma),
                fit.as_ref().map_or_else(|e| e.clone(), |f| format!("rate={} sigma={}", fmt_f64(f.rate), fmt_f64(sigma))),
            ));
        }
        Preset::ChiZeroCorollary => {
            let peak = recs.iter().map(|r| r.linf_u).fold(0.0, f64::max);
            let bound = 2.0 * u0.linf();
            v.push(Verdict::new(
                "bounded",
                peak <= bound,
                format!("sup linf_u={} bound={}", fmt_f64(peak), fmt_f64(bound)),
            ));
            let dev = recs.last().map_or(f64::NAN, |r| r.linf_u_dev);
            v.push(Verdict::new("converged", dev < 1e-3, format!("linf_u_dev={}", fmt_f64(dev))));
        }
        Preset::HeatOracle => {
            let g = cfg.grid();
            let lambda: f64 = (0..g.dim())
                .map(|a| (std::f64::consts::PI / g.lengths()[a]).powi(2))
                .sum();
            let rel = fit.as_ref().map_or(f64::NAN, |f| (f.rate / lambda - 1.0).abs());
            v.push(Verdict::new(
                "heat_rate",
                rel <= 0.02,
                format!("expected {} relative error {}", fmt_f64(lambda), fmt_f64(rel)),
            ));
        }
        Preset::R3ThetaGt1 => {
            v.push(Verdict::new(
                "regime",
                report.regime.satisfied.contains(&angio_core::thresholds::Regime::R3),
                format!("label={}", report.regime.label),
            ));
        }
        Preset::Custom => {}
    }
    v
}

fn summary_text(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    report: &ThresholdReport,
    fit: &Result<RateFit, String>,
    verdicts: &[Verdict],
) -> String {
    let mut s = String::new();
    let last = traj.records.last();
    let _ = writeln!(s, "preset={}", cfg.preset);
    let _ = writeln!(s, "seed={}", cfg.seed);
    let _ = writeln!(s, "termination={}", traj.termination);
    if let Some(m) = &traj.message {
        let _ = writeln!(s, "message={m}");
    }
    let _ = writeln!(s, "off_regime={}", yes_no(cfg.params.off_regime()));
    let _ = writeln!(s, "regime={}", report.regime.label);
    let _ = writeln!(s, "records={}", traj.records.len());
    let _ = writeln!(s, "t_final={}", fmt_f64(traj.terminal.t));
    if let Some(r) = last {
        for col in ["linf_u", "linf_v", "linf_u_dev", "linf_v_dev", "l2_u_dev", "min_u", "min_v"] {
            let _ = writeln!(s, "final.{col}={}", fmt_f64(r.column(col).unwrap_or(f64::NAN)));
        }
    }
    let _ = writeln!(s, "fit.column={}", cfg.fit.column);
    match fit {
        Ok(f) => {
            let _ = writeln!(s, "fit.window={}:{}", f.window_start, f.window_end);
            let _ = writeln!(s, "fit.rate={}", fmt_f64(f.rate));
            let _ = writeln!(s, "fit.r_squared={}", fmt_f64(f.r_squared));
            let _ = writeln!(s, "fit.samples={}", f.samples);
        }
        Err(e) => {
            let _ = writeln!(s, "fit.error={e}");
        }
    }
    for v in verdicts {
        let _ = writeln!(s, "check.{}={}", v.name, pass_fail(v.pass));
        let _ = writeln!(s, "check.{}.detail={}", v.name, v.detail);
    }
    let _ = writeln!(s, "verdict={}", pass_fail(verdicts.iter().all(|v| v.pass)));
    s
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> angio_core::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| match e {
        Error::Io(io) => CliError::io(path, io),
        other => CliError::Numerical(other),
    })?;
    std::io::Write::flush(&mut w).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `trajectory.csv`, `thresholds.txt`, `thresholds.csv`, `summary.txt`
/// and the terminal `u`, `v` fields.
pub fn write_artifacts(o: &ScenarioOutcome, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_with(&dir.join("trajectory.csv"), |w| o.trajectory.write_csv(w))?;
    write_text(&dir.join("thresholds.txt"), &o.report.to_key_values())?;
    write_text(
        &dir.join("thresholds.csv"),
        &format!("{}\n{}\n", ThresholdReport::csv_header(), o.report.csv_row()),
    )?;
    write_text(&dir.join("summary.txt"), &o.summary)?;
    write_with(&dir.join("terminal_u.csv"), |w| write_field_csv(&o.trajectory.terminal.u, w))?;
    write_with(&dir.join("terminal_v.csv"), |w| write_field_csv(&o.trajectory.terminal.v, w))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn monotone_defect_examples() {
        let s = vec![(0.0, 5.0), (1.0, 4.0), (2.0, 3.0), (3.0, 3.5)];
        let (worst, slack) = monotone_defect(&s, 1.0).unwrap();
        assert_eq!(worst, 0.5);
        assert_eq!(slack, 4.0 * MONOTONE_SLACK);
        let (worst, _) = monotone_defect(&s[..3], 0.0).unwrap();
        assert_eq!(worst, -1.0);
    }

    #[test]
    fn window_resolution() {
        let s: Vec<(f64, f64)> = (0..40).map(|k| (k as f64, (-(k as f64)).exp().max(1e-16))).collect();
        assert_eq!(resolve_window(FitWindow::Explicit(1.0, 2.0), &s), Ok((1.0, 2.0)));
        assert_eq!(resolve_window(FitWindow::LastHalf, &s), Ok((19.5, 39.0)));
        let (a, b) = resolve_window(FitWindow::Auto(2.0), &s).unwrap();
        assert_eq!(a, 2.0);
        assert_eq!(b, 15.0);
        assert!(resolve_window(FitWindow::Auto(100.0), &s).is_err());
    }

    #[test]
    fn short_custom_run_writes_artifacts() {
        let cfg = parse_config_str(
            "preset = custom\nparams.chi = 0.3\nparams.a = 1\nparams.mu = 1\ngrid.cells = 16\nsolver.t_end = 0.05\nsolver.dt = 0.01\nsolver.record_every = 1\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let o = run_scenario(&cfg, Some(dir.path())).unwrap();
        assert_eq!(o.exit_code(), exit::OK);
        assert!(o.verdict("mass_law").unwrap().pass);
        for f in ["trajectory.csv", "thresholds.txt", "thresholds.csv", "summary.txt", "terminal_u.csv", "terminal_v.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("termination=completed"));
        assert!(summary.contains("check.positivity=pass"));
    }

    #[test]
    fn bad_dt_is_a_config_error() {
        let cfg = parse_config_str("preset = custom\nparams.a = 1\nsolver.dt = 0.9\n").unwrap();
        let e = run_scenario(&cfg, None).unwrap_err();
        assert_eq!(e.exit_code(), exit::USAGE);
        assert!(e.to_string().contains("solver.dt"));
    }
}
