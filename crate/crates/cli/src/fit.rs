//! Rate fits on a column of an existing trajectory CSV.

use std::fs;
use std::path::Path;

use angio_core::functionals::fit_decay_rate;
use angio_core::{fmt_f64, RateFit};

use crate::config::FitWindow;
use crate::error::CliError;
use crate::scenario::resolve_window;

/// Reads `(t, column)` pairs from a CSV whose header has a `t` column.
pub fn read_series(text: &str, column: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Usage("fit: the CSV file is empty".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let t_idx = header
        .iter()
        .position(|h| *h == "t")
        .ok_or_else(|| CliError::Usage("fit: the CSV has no `t` column".into()))?;
    let c_idx = header.iter().position(|h| *h == column).ok_or_else(|| {
        let available: Vec<&str> = header.iter().copied().filter(|h| *h != "t").collect();
        CliError::Usage(format!(
            "--column: no column `{column}`; available columns: {}",
            available.join(", ")
        ))
    })?;
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64, CliError> {
            cells
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Usage(format!("fit: malformed data row {}", k + 2)))
        };
        out.push((get(t_idx)?, get(c_idx)?));
    }
    Ok(out)
}

/// Fits `column` of the CSV at `path` over `window`.
pub fn fit_report(path: &Path, column: &str, window: FitWindow) -> Result<RateFit, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let series = read_series(&text, column)?;
    let w = resolve_window(window, &series).map_err(|m| CliError::Usage(format!("--window: {m}")))?;
    fit_decay_rate(&series, w).map_err(|e| CliError::Usage(format!("--window: {e}")))
}

pub fn format_fit(column: &str, f: &RateFit) -> String {
    format!(
        "column={column}\nwindow={}:{}\nrate={}\nintercept={}\nr_squared={}\nsamples={}\n",
        f.window_start,
        f.window_end,
        fmt_f64(f.rate),
        fmt_f64(f.intercept),
        fmt_f64(f.r_squared),
        f.samples
    )
}
