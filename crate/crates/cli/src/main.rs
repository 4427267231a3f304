use std::path::{Path, PathBuf};
use std::process::ExitCode;

use angio_cli::config::{parse_config, parse_sweep, FitWindow};
use angio_cli::error::{exit, CliError};
use angio_cli::fit::{fit_report, format_fit};
use angio_cli::scenario::run_scenario;
use angio_cli::sweep::run_sweep;
use angio_cli::verify::{verify_suite, VerifyOptions};
use clap::{Parser, Subcommand};

const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(name = "angio", version, about = "Chemotaxis scenario runner and verification battery")]
struct Cli {
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random initial data (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run every point of a sweep file in parallel.
    Sweep { config: PathBuf },
    /// Run the inequality and oracle battery.
    Verify {
        /// Random interpolation test pairs per grid.
        #[arg(long, default_value_t = VerifyOptions::default().interpolation_ids)]
        pairs: u64,
        /// Random fields for the entropy sandwich.
        #[arg(long, default_value_t = VerifyOptions::default().sandwich_fields)]
        fields: usize,
        /// Zero the oracle tolerances so that the battery must fail.
        #[arg(long, hide = true)]
        inject_failure: bool,
    },
    /// Fit an exponential decay rate to one column of a trajectory CSV.
    Fit {
        csv: PathBuf,
        #[arg(long)]
        column: String,
        /// `t0:t1`, `last_half` or `auto:t0`.
        #[arg(long, default_value = "last_half", value_parser = parse_window)]
        window: FitWindow,
    },
}

fn parse_window(s: &str) -> Result<FitWindow, String> {
    s.parse()
}

fn out_dir(flag: &Option<PathBuf>, from_config: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| from_config.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn say(quiet: bool, text: &str) {
    if !quiet {
        print!("{text}");
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = parse_config(config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let dir = out_dir(&cli.out, &cfg.output_dir);
            let outcome = run_scenario(&cfg, Some(&dir))?;
            say(cli.quiet, &outcome.summary);
            if outcome.exit_code() != exit::OK {
                eprintln!(
                    "run stopped early ({}): {}",
                    outcome.trajectory.termination,
                    outcome.trajectory.message.as_deref().unwrap_or("")
                );
            }
            Ok(outcome.exit_code())
        }
        Command::Sweep { config } => {
            let mut spec = parse_sweep(config)?;
            if let Some(s) = cli.seed {
                spec.set_seed(s);
            }
            let dir = out_dir(&cli.out, &spec.base.output_dir);
            let result = run_sweep(&spec, Some(&dir))?;
            say(cli.quiet, &result.to_csv());
            Ok(result.exit_code())
        }
        Command::Verify {
            pairs,
            fields,
            inject_failure,
        } => {
            let opts = VerifyOptions {
                interpolation_ids: *pairs,
                sandwich_fields: *fields,
                seed: cli.seed.unwrap_or(0),
                inject_failure: *inject_failure,
            };
            let report = verify_suite(&opts)?;
            if let Some(dir) = &cli.out {
                report.write(dir)?;
            }
            let failed = report.failures();
            if failed > 0 {
                eprint!("{}", report.summary());
                for c in report.cases.iter().filter(|c| !c.pass()).take(20) {
                    eprintln!("failed {} {}: value {:e} > bound {:e}", c.group, c.case, c.value, c.bound);
                }
                eprintln!("{failed} of {} cases failed", report.cases.len());
                return Ok(exit::NUMERICAL);
            }
            say(cli.quiet, &report.summary());
            Ok(exit::OK)
        }
        Command::Fit { csv, column, window } => {
            let f = fit_report(Path::new(csv), column, *window)?;
            say(cli.quiet, &format_fit(column, &f));
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
