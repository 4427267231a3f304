//! The inequality and oracle battery behind `angio verify`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use angio_core::elliptic::solve_w_from;
use angio_core::functionals::entropy_sandwich_check;
use angio_core::interpolation::{verify_interpolation, write_inequality_csv, InequalityCheck};
use angio_core::{elliptic_residual, fmt_f64, spectral_info, EllipticConfig, Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

pub const INTERPOLATION_P: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Test pairs `0..interpolation_ids` per grid; ids 0 and 1 are the
    /// constant and single-mode pairs, the rest are random.
    pub interpolation_ids: u64,
    pub sandwich_fields: usize,
    pub seed: u64,
    /// Replaces the oracle tolerances by zero so that the battery fails.
    pub inject_failure: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            interpolation_ids: 16,
            sandwich_fields: 1000,
            seed: 0,
            inject_failure: false,
        }
    }
}

impl VerifyOptions {
    /// Number of rows [`verify_suite`] reports.
    pub fn case_count(&self) -> usize {
        let interp = 2 * self.interpolation_ids as usize * INTERPOLATION_P.len() * 3;
        interp + self.sandwich_fields + ORACLE_CASES
    }
}

const ORACLE_CASES: usize = 2 + 2 * 3;

/// One checked quantity: passes when `value ≤ bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCase {
    pub group: &'static str,
    pub case: String,
    pub value: f64,
    pub bound: f64,
}

impl VerifyCase {
    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }

    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub cases: Vec<VerifyCase>,
    pub inequalities: Vec<InequalityCheck>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.pass()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("group,case,value,bound,margin,pass\n");
        for c in &self.cases {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.group,
                c.case,
                fmt_f64(c.value),
                fmt_f64(c.bound),
                fmt_f64(c.margin()),
                c.pass()
            );
        }
        s
    }

    /// Per-group pass counts, one line each.
    pub fn summary(&self) -> String {
        let mut groups: Vec<&str> = self.cases.iter().map(|c| c.group).collect();
        groups.dedup();
        let mut s = String::new();
        for g in groups {
            let all: Vec<&VerifyCase> = self.cases.iter().filter(|c| c.group == g).collect();
            let ok = all.iter().filter(|c| c.pass()).count();
            let worst = all.iter().map(|c| c.margin()).fold(f64::INFINITY, f64::min);
            let _ = writeln!(
                s,
                "{} {g}: {ok}/{} passed, smallest margin {}",
                if ok == all.len() { "PASS" } else { "FAIL" },
                all.len(),
                fmt_f64(worst)
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("verify.csv");
        fs::write(&path, self.to_csv()).map_err(|e| CliError::io(&path, e))?;
        let path = dir.join("inequalities.csv");
        let mut buf = Vec::new();
        write_inequality_csv(&self.inequalities, &mut buf).map_err(CliError::Numerical)?;
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))
    }
}

fn interpolation_cases(opts: &VerifyOptions, out: &mut VerifyReport) -> Result<(), CliError> {
    let grids = [
        ("1d", Grid::interval(1.0, 512).map_err(CliError::Numerical)?),
        ("2d", Grid::rectangle(1.0, 1.0, 128, 128).map_err(CliError::Numerical)?),
    ];
    for (label, grid) in grids {
        for id in 0..opts.interpolation_ids {
            for p in INTERPOLATION_P {
                let checks = verify_interpolation(&grid, id, p).map_err(CliError::Numerical)?;
                for c in checks {
                    let tol = if opts.inject_failure { -0.5 } else { c.tolerance };
                    out.cases.push(VerifyCase {
                        group: "interpolation",
                        case: format!("{}:{label}:id={id}:p={p}", c.inequality),
                        value: c.lhs,
                        bound: c.rhs * (1.0 + tol),
                    });
                    out.inequalities.push(c);
                }
            }
        }
    }
    Ok(())
}

/// Random positive fields with values spread over several decades.
fn sandwich_cases(opts: &VerifyOptions, out: &mut VerifyReport) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for k in 0..opts.sandwich_fields {
        let grid = if k % 2 == 0 {
            let n = rng.gen_range(8..200);
            Grid::interval(rng.gen_range(0.2..5.0), n)
        } else {
            let (nx, ny) = (rng.gen_range(4..24), rng.gen_range(4..24));
            Grid::rectangle(rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), nx, ny)
        }
        .map_err(CliError::Numerical)?;
        let spread: f64 = rng.gen_range(0.0..4.0);
        let scale: f64 = rng.gen_range(0.01..100.0);
        let values: Vec<f64> = (0..grid.len())
            .map(|_| scale * (spread * rng.gen_range(-1.0f64..1.0)).exp())
            .collect();
        let u = Field::new(grid, values).map_err(CliError::Numerical)?;
        let (lo, hi) = entropy_sandwich_check(&u).map_err(CliError::Numerical)?;
        let allowance = if opts.inject_failure { 0.0 } else { 1e-10 * u.integrate() };
        out.cases.push(VerifyCase {
            group: "entropy_sandwich",
            case: format!("field={k}"),
            value: -lo.min(hi),
            bound: allowance,
        });
    }
    Ok(())
}

fn oracle_cases(opts: &VerifyOptions, out: &mut VerifyReport) -> Result<(), CliError> {
    let strict = |t: f64| if opts.inject_failure { 0.0 } else { t };
    let cfg = EllipticConfig::default();

    for (case, grid, exact) in [
        ("unit_interval_n256", Grid::interval(1.0, 256), PI * PI),
        ("rectangle_1x2_n64x128", Grid::rectangle(1.0, 2.0, 64, 128), PI * PI / 4.0),
    ] {
        let grid = grid.map_err(CliError::Numerical)?;
        let s = spectral_info(&grid, &cfg).map_err(CliError::Numerical)?;
        out.cases.push(VerifyCase {
            group: "poincare",
            case: format!("{case}:lambda1_rel_err"),
            value: (s.lambda1 / exact - 1.0).abs(),
            bound: strict(1e-3),
        });
    }

    // −Δw = u − ū with a single cosine mode has w = mode / |k|².
    let cases: [(&str, Grid, [f64; 2]); 2] = [
        ("interval_n256", Grid::interval(1.0, 256).map_err(CliError::Numerical)?, [1.0, 0.0]),
        ("square_n64", Grid::rectangle(1.0, 1.0, 64, 64).map_err(CliError::Numerical)?, [1.0, 1.0]),
    ];
    for (case, grid, k) in cases {
        let mode = move |x: [f64; 2]| {
            (0..grid.dim())
                .map(|a| (k[a] * PI * x[a] / grid.lengths()[a]).cos())
                .product::<f64>()
        };
        let k2: f64 = (0..grid.dim()).map(|a| (k[a] * PI / grid.lengths()[a]).powi(2)).sum();
        let u = Field::from_fn(grid, |x| 1.5 + mode(x));
        let sol = solve_w_from(&u, None, &cfg).map_err(CliError::Numerical)?;
        let exact = Field::from_fn(grid, |x| mode(x) / k2);
        let err = sol
            .w
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.cases.push(VerifyCase {
            group: "elliptic",
            case: format!("{case}:rel_linf_err"),
            value: err / exact.linf(),
            bound: strict(1e-3),
        });
        out.cases.push(VerifyCase {
            group: "elliptic",
            case: format!("{case}:mean"),
            value: sol.w.integrate().abs(),
            bound: strict(1e-12 * grid.measure() * sol.w.linf()),
        });
        out.cases.push(VerifyCase {
            group: "elliptic",
            case: format!("{case}:residual"),
            value: elliptic_residual(&u, &sol.w),
            bound: strict(1e-10),
        });
    }
    Ok(())
}

/// Runs the full battery. Failing cases are reported, not raised.
pub fn verify_suite(opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let mut report = VerifyReport {
        cases: Vec::with_capacity(opts.case_count()),
        inequalities: Vec::new(),
    };
    interpolation_cases(opts, &mut report)?;
    sandwich_cases(opts, &mut report)?;
    oracle_cases(opts, &mut report)?;
    Ok(report)
}
