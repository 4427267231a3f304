//! Line-based `key = value` scenario files.
//!
//! ```text
//! # comments start with '#'
//! preset = C1_no_mitosis
//! grid.cells = 128
//! params.d = 5
//! ```
//!
//! Only `preset` is required. Every other key starts from the preset's
//! default (see [`Preset::defaults`]). Recognised keys:
//!
//! | key | type | default (custom preset) |
//! |-----|------|---------|
//! | `grid.dim` | 1 or 2 | 1 |
//! | `grid.lengths` | list of reals, one per axis (a single value is broadcast) | 1 |
//! | `grid.cells` | list of integers ≥ 4 (broadcast as above) | 128 |
//! | `grid.convex` | bool | true |
//! | `params.chi`, `params.xi1`, `params.xi2`, `params.a`, `params.mu` | real ≥ 0 | 0, 1, 1, 0, 0 |
//! | `params.d`, `params.theta` | real > 0 | 1, 1 |
//! | `params.n_dim` | integer ≥ 1 | `grid.dim` |
//! | `solver.dt`, `solver.t_end` | real > 0 | 1e-3, 1 |
//! | `solver.cfl_safety` | real in (0, 1] | 0.5 |
//! | `solver.flux_scheme` | `upwind` or `central` | upwind |
//! | `solver.blowup_threshold` | real > 0 | 1e6 |
//! | `solver.record_every` | integer ≥ 1 | 10 |
//! | `solver.elliptic.tolerance` | real in (0, 1e-4] | 1e-10 |
//! | `solver.elliptic.max_iterations` | integer ≥ 1 | 10 × cells |
//! | `initial.profile` | constant, cosine_bump, gaussian_bump, random_positive | cosine_bump |
//! | `initial.base`, `initial.amplitude` | real | 1, 0.5 |
//! | `initial.v_base`, `initial.v_amplitude` | real | `initial.base`, 0 |
//! | `initial.width` | real > 0 | 0.1 |
//! | `seed` | integer | 0 |
//! | `output.dir` | path | none |
//! | `thresholds.k1`, `.k2`, `.c0`, `.xi0`, `.mu0` | real > 0 | 1 |
//! | `fit.column` | trajectory column | l2_u_dev |
//! | `fit.window` | `t0:t1`, `last_half` or `auto:t0` | last_half |
//!
//! Sweep files add `sweep.<key> = v1, v2, ...` axes over any scalar key
//! above, plus `sweep.max_parallel` (default: available cores) and
//! `sweep.max_points` (default 1000).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use angio_core::dynamics::TRAJECTORY_COLUMNS;
use angio_core::{
    EllipticConfig, FluxScheme, GenericConstants, Grid, InitialSpec, ModelParams, Profile,
    SolverConfig,
};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    C1NoMitosis,
    C2Logistic,
    ChiZeroCorollary,
    R3ThetaGt1,
    HeatOracle,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::C1NoMitosis,
        Preset::C2Logistic,
        Preset::ChiZeroCorollary,
        Preset::R3ThetaGt1,
        Preset::HeatOracle,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::C1NoMitosis => "C1_no_mitosis",
            Preset::C2Logistic => "C2_logistic",
            Preset::ChiZeroCorollary => "chi_zero_corollary",
            Preset::R3ThetaGt1 => "R3_theta_gt1",
            Preset::HeatOracle => "heat_oracle",
            Preset::Custom => "custom",
        }
    }

    /// The configuration a file containing only `preset = <name>` yields.
    pub fn defaults(&self) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            preset: *self,
            grid: GridSpec {
                dim: 1,
                lengths: vec![1.0],
                cells: vec![128],
                convex: true,
            },
            params: ModelParams {
                chi: 0.0,
                xi1: 1.0,
                xi2: 1.0,
                d: 1.0,
                a: 0.0,
                mu: 0.0,
                theta: 1.0,
                n_dim: 1,
            },
            n_dim_explicit: false,
            solver: SolverConfig {
                record_every: 10,
                ..Default::default()
            },
            initial: InitialSpec::cosine(1.0, 0.5),
            seed: 0,
            output_dir: None,
            constants: GenericConstants::default(),
            fit: FitSpec {
                column: "l2_u_dev".into(),
                window: FitWindow::LastHalf,
            },
        };
        let long = |c: &mut ScenarioConfig, t_end: f64| {
            c.solver.dt = 2e-3;
            c.solver.t_end = t_end;
            c.solver.record_every = 5;
        };
        match self {
            Preset::C1NoMitosis => {
                c.params.chi = 0.5;
                c.params.d = 5.0;
                c.initial.v_base = Some(0.5);
                long(&mut c, 30.0);
                c.fit = FitSpec {
                    column: "l1_u_dev".into(),
                    window: FitWindow::Auto(1.0),
                };
            }
            Preset::C2Logistic => {
                c.params = ModelParams {
                    chi: 0.5,
                    xi1: 0.5,
                    xi2: 0.5,
                    d: 1.0,
                    a: 1.0,
                    mu: 1.0,
                    theta: 1.0,
                    n_dim: 1,
                };
                c.initial.v_base = Some(0.5);
                long(&mut c, 30.0);
                c.fit = FitSpec {
                    column: "F2".into(),
                    window: FitWindow::Auto(2.0),
                };
            }
            Preset::ChiZeroCorollary => {
                long(&mut c, 50.0);
                c.fit = FitSpec {
                    column: "l1_u_dev".into(),
                    window: FitWindow::Auto(1.0),
                };
            }
            Preset::R3ThetaGt1 => {
                c.params = ModelParams {
                    chi: 1.0,
                    xi1: 0.5,
                    xi2: 0.5,
                    d: 1.0,
                    a: 1.0,
                    mu: 1.0,
                    theta: 2.0,
                    n_dim: 1,
                };
                c.grid.cells = vec![64];
                long(&mut c, 10.0);
                c.fit = FitSpec {
                    column: "F2".into(),
                    window: FitWindow::Auto(1.0),
                };
            }
            Preset::HeatOracle => {
                c.params.xi1 = 0.0;
                c.params.xi2 = 0.0;
                c.grid.cells = vec![256];
                c.initial = InitialSpec::cosine(1.0, 0.1);
                c.solver.dt = 1e-4;
                c.solver.t_end = 1.0;
                c.solver.record_every = 10;
            }
            Preset::Custom => {}
        }
        c
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset `{s}` (expected one of {})", names.join(", "))
            })
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
    pub convex: bool,
}

impl GridSpec {
    fn broadcast<T: Copy>(v: &[T], dim: usize) -> Option<Vec<T>> {
        match v.len() {
            1 => Some(vec![v[0]; dim]),
            n if n == dim => Some(v.to_vec()),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Grid, String> {
        let lengths = Self::broadcast(&self.lengths, self.dim)
            .ok_or_else(|| format!("expected 1 or {} lengths, got {}", self.dim, self.lengths.len()))?;
        let cells = Self::broadcast(&self.cells, self.dim)
            .ok_or_else(|| format!("expected 1 or {} cell counts, got {}", self.dim, self.cells.len()))?;
        Grid::new(self.dim, &lengths, &cells)
            .map(|g| g.with_convex_flag(self.convex))
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    LastHalf,
    Explicit(f64, f64),
    /// From the given time up to where the series stops decaying above the
    /// round-off floor.
    Auto(f64),
}

impl FromStr for FitWindow {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "last_half" {
            return Ok(FitWindow::LastHalf);
        }
        if let Some(t0) = s.strip_prefix("auto:") {
            return parse_real(t0).map(FitWindow::Auto);
        }
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected `t0:t1`, `last_half` or `auto:t0`, got `{s}`"))?;
        let (t0, t1) = (parse_real(a)?, parse_real(b)?);
        if !(t0 < t1) {
            return Err(format!("window needs t0 < t1, got {t0}:{t1}"));
        }
        Ok(FitWindow::Explicit(t0, t1))
    }
}

impl std::fmt::Display for FitWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWindow::LastHalf => f.write_str("last_half"),
            FitWindow::Explicit(a, b) => write!(f, "{a}:{b}"),
            FitWindow::Auto(a) => write!(f, "auto:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub column: String,
    pub window: FitWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub grid: GridSpec,
    pub params: ModelParams,
    /// Whether `params.n_dim` was given rather than taken from the grid.
    pub n_dim_explicit: bool,
    pub solver: SolverConfig,
    pub initial: InitialSpec,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub constants: GenericConstants,
    pub fit: FitSpec,
}

impl ScenarioConfig {
    /// Defaults of `preset` after validation.
    pub fn preset(preset: Preset) -> Self {
        let mut c = preset.defaults();
        c.finish(&HashMap::new()).expect("preset defaults are valid");
        c
    }

    pub fn grid(&self) -> Grid {
        self.grid.build().expect("validated grid")
    }

    /// `initial` with the scenario seed applied.
    pub fn initial_spec(&self) -> InitialSpec {
        InitialSpec {
            seed: self.seed,
            ..self.initial
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let p = &mut self.params;
        match key {
            "preset" => {} // consumed before the other keys
            "grid.dim" => {
                let d = parse_usize(value)?;
                if d != 1 && d != 2 {
                    return Err(format!("must be 1 or 2, got {d}"));
                }
                self.grid.dim = d;
            }
            "grid.lengths" => {
                self.grid.lengths = parse_list(value, parse_real)?;
                if let Some(l) = self.grid.lengths.iter().find(|l| !(**l > 0.0)) {
                    return Err(format!("lengths must be > 0, got {l}"));
                }
            }
            "grid.cells" => {
                self.grid.cells = parse_list(value, parse_usize)?;
                if let Some(n) = self.grid.cells.iter().find(|n| **n < 4) {
                    return Err(format!("cells must be >= 4 per axis, got {n}"));
                }
            }
            "grid.convex" => self.grid.convex = parse_bool(value)?,
            "params.chi" => p.chi = nonneg("chi", value)?,
            "params.xi1" => p.xi1 = nonneg("xi1", value)?,
            "params.xi2" => p.xi2 = nonneg("xi2", value)?,
            "params.a" => p.a = nonneg("a", value)?,
            "params.mu" => p.mu = nonneg("mu", value)?,
            "params.d" => p.d = positive("d", value)?,
            "params.theta" => p.theta = positive("theta", value)?,
            "params.n_dim" => {
                p.n_dim = parse_usize(value)?;
                if p.n_dim == 0 {
                    return Err("must satisfy n_dim >= 1".into());
                }
                self.n_dim_explicit = true;
            }
            "solver.dt" => self.solver.dt = positive("dt", value)?,
            "solver.t_end" => self.solver.t_end = positive("t_end", value)?,
            "solver.cfl_safety" => {
                let v = parse_real(value)?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(format!("must satisfy 0 < cfl_safety <= 1, got {v}"));
                }
                self.solver.cfl_safety = v;
            }
            "solver.flux_scheme" => {
                self.solver.flux_scheme = FluxScheme::from_str(value).map_err(|e| e.to_string())?
            }
            "solver.blowup_threshold" => self.solver.blowup_threshold = positive("blowup_threshold", value)?,
            "solver.record_every" => {
                let n = parse_usize(value)?;
                if n == 0 {
                    return Err("must satisfy record_every >= 1".into());
                }
                self.solver.record_every = n;
            }
            "solver.elliptic.tolerance" => {
                let v = parse_real(value)?;
                if !(v > 0.0 && v <= 1e-4) {
                    return Err(format!("must satisfy 0 < tolerance <= 1e-4, got {v}"));
                }
                self.solver.elliptic.tolerance = v;
            }
            "solver.elliptic.max_iterations" => {
                let n = parse_usize(value)?;
                if n == 0 {
                    return Err("must satisfy max_iterations >= 1".into());
                }
                self.solver.elliptic.max_iterations = Some(n);
            }
            "initial.profile" => {
                self.initial.profile = Profile::from_str(value).map_err(|e| e.to_string())?
            }
            "initial.base" => self.initial.base = parse_real(value)?,
            "initial.amplitude" => self.initial.amplitude = parse_real(value)?,
            "initial.v_base" => self.initial.v_base = Some(parse_real(value)?),
            "initial.v_amplitude" => self.initial.v_amplitude = parse_real(value)?,
            "initial.width" => self.initial.width = positive("width", value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| format!("expected a nonnegative integer, got `{value}`"))?
            }
            "output.dir" => self.output_dir = Some(PathBuf::from(value)),
            "thresholds.k1" => self.constants.k1 = positive("k1", value)?,
            "thresholds.k2" => self.constants.k2 = positive("k2", value)?,
            "thresholds.c0" => self.constants.c0 = positive("c0", value)?,
            "thresholds.xi0" => self.constants.xi0 = positive("xi0", value)?,
            "thresholds.mu0" => self.constants.mu0 = positive("mu0", value)?,
            "fit.column" => {
                if !is_fit_column(value) {
                    return Err(format!(
                        "unknown column `{value}` (expected one of {}, l1_u_dev, linf_u_dev, linf_v_dev)",
                        TRAJECTORY_COLUMNS[1..].join(", ")
                    ));
                }
                self.fit.column = value.to_string();
            }
            "fit.window" => self.fit.window = value.parse()?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Cross-key validation; `lines` maps keys to the line that set them.
    fn finish(&mut self, lines: &HashMap<String, usize>) -> Result<(), ConfigError> {
        let err = |key: &str, message: String| ConfigError::new(lines.get(key).copied(), key, message);
        let grid = self.grid.build().map_err(|m| {
            let key = if lines.contains_key("grid.cells") { "grid.cells" } else { "grid.lengths" };
            err(key, m)
        })?;
        if !self.n_dim_explicit {
            self.params.n_dim = grid.dim();
        }
        let p = self.params;
        match self.preset {
            Preset::C1NoMitosis => {
                for (key, v) in [("params.a", p.a), ("params.mu", p.mu)] {
                    if v != 0.0 {
                        return Err(err(key, format!("preset C1_no_mitosis requires a = mu = 0, got {v}")));
                    }
                }
                for (key, v) in [("params.xi1", p.xi1), ("params.xi2", p.xi2)] {
                    if v <= 0.0 {
                        return Err(err(key, format!("preset C1_no_mitosis requires xi1, xi2 > 0, got {v}")));
                    }
                }
            }
            Preset::C2Logistic => {
                if p.a <= 0.0 {
                    return Err(err(
                        "params.a",
                        format!(
                            "preset C2_logistic requires a > 0: the equilibrium b = (a/mu)^(1/theta) and Lambda degenerate at a = 0 (got a = {})",
                            p.a
                        ),
                    ));
                }
                if p.mu <= 0.0 {
                    return Err(err(
                        "params.mu",
                        format!("preset C2_logistic requires mu > 0 so that b = (a/mu)^(1/theta) exists, got {}", p.mu),
                    ));
                }
                if p.theta < 1.0 {
                    return Err(err("params.theta", format!("preset C2_logistic requires theta >= 1, got {}", p.theta)));
                }
            }
            Preset::ChiZeroCorollary => {
                if p.chi != 0.0 {
                    return Err(err("params.chi", format!("preset chi_zero_corollary requires chi = 0, got {}", p.chi)));
                }
            }
            Preset::R3ThetaGt1 => {
                if p.theta <= 1.0 {
                    return Err(err("params.theta", format!("preset R3_theta_gt1 requires theta > 1, got {}", p.theta)));
                }
                if p.mu <= 0.0 {
                    return Err(err("params.mu", format!("preset R3_theta_gt1 requires mu > 0, got {}", p.mu)));
                }
            }
            Preset::HeatOracle => {
                for (key, v) in [
                    ("params.chi", p.chi),
                    ("params.xi1", p.xi1),
                    ("params.xi2", p.xi2),
                    ("params.a", p.a),
                    ("params.mu", p.mu),
                ] {
                    if v != 0.0 {
                        return Err(err(key, format!("preset heat_oracle requires chi = xi1 = xi2 = a = mu = 0, got {v}")));
                    }
                }
            }
            Preset::Custom => {}
        }
        EllipticConfig::validate(&self.solver.elliptic).map_err(|e| err("solver.elliptic.tolerance", e.to_string()))?;
        Ok(())
    }
}

fn is_fit_column(name: &str) -> bool {
    TRAJECTORY_COLUMNS[1..].contains(&name) || matches!(name, "l1_u_dev" | "linf_u_dev" | "linf_v_dev")
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a real number, got `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("expected a finite real number, got `{s}`"));
    }
    Ok(v)
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, got `{s}`")),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|x| item(x.trim())).collect()
}

fn nonneg(name: &str, s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v < 0.0 {
        return Err(format!("must satisfy {name} >= 0, got {v}"));
    }
    Ok(v)
}

fn positive(name: &str, s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v <= 0.0 {
        return Err(format!("must satisfy {name} > 0, got {v}"));
    }
    Ok(v)
}

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits a file into entries, dropping comments and blank lines.
pub fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| {
            ConfigError::new(Some(line), content, "expected `key = value`".into())
        })?;
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::new(Some(line), key, "expected `key = value`".into()));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(ConfigError::new(
                Some(line),
                key,
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(out)
}

/// Builds a scenario from non-sweep entries.
pub fn build_config(entries: &[Entry]) -> Result<ScenarioConfig, ConfigError> {
    let preset_entry = entries
        .iter()
        .find(|e| e.key == "preset")
        .ok_or_else(|| ConfigError::new(None, "preset", "missing required key".into()))?;
    let preset: Preset = preset_entry
        .value
        .parse()
        .map_err(|m| ConfigError::new(Some(preset_entry.line), "preset", m))?;
    let mut cfg = preset.defaults();
    let mut lines = HashMap::new();
    for e in entries {
        if e.key.starts_with("sweep.") {
            return Err(ConfigError::new(
                Some(e.line),
                &e.key,
                "sweep keys are only valid with the `sweep` subcommand".into(),
            ));
        }
        cfg.apply(&e.key, &e.value)
            .map_err(|m| ConfigError::new(Some(e.line), &e.key, m))?;
        lines.insert(e.key.clone(), e.line);
    }
    cfg.finish(&lines)?;
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    build_config(&tokenize(text)?)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(None, "<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub const DEFAULT_MAX_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    base_entries: Vec<Entry>,
    pub axes: Vec<SweepAxis>,
    pub max_parallel: usize,
    pub max_points: usize,
}

impl SweepSpec {
    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Value tuples in lexicographic order of their indices, last axis
    /// fastest.
    pub fn points(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Overrides `seed` for every point.
    pub fn set_seed(&mut self, seed: u64) {
        self.base.seed = seed;
        let e = Entry {
            key: "seed".into(),
            value: seed.to_string(),
            line: 0,
        };
        match self.base_entries.iter_mut().find(|x| x.key == "seed") {
            Some(slot) => *slot = e,
            None => self.base_entries.push(e),
        }
    }

    /// The scenario at one sweep point.
    pub fn config_at(&self, values: &[String]) -> Result<ScenarioConfig, ConfigError> {
        let mut entries = self.base_entries.clone();
        for (axis, v) in self.axes.iter().zip(values) {
            let e = Entry {
                key: axis.key.clone(),
                value: v.clone(),
                line: axis.line,
            };
            match entries.iter_mut().find(|x| x.key == axis.key) {
                Some(slot) => *slot = e,
                None => entries.push(e),
            }
        }
        build_config(&entries)
    }
}

const SCALAR_SWEEP_KEYS: [&str; 4] = ["grid.lengths", "grid.cells", "output.dir", "preset"];

pub fn parse_sweep_str(text: &str) -> Result<SweepSpec, ConfigError> {
    let entries = tokenize(text)?;
    let (sweep, base_entries): (Vec<Entry>, Vec<Entry>) =
        entries.into_iter().partition(|e| e.key.starts_with("sweep."));
    let base = build_config(&base_entries)?;
    let mut axes = Vec::new();
    let mut max_parallel = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut max_points = DEFAULT_MAX_POINTS;
    for e in sweep {
        let key = &e.key["sweep.".len()..];
        match key {
            "max_parallel" | "max_points" => {
                let n = parse_usize(&e.value)
                    .ok()
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| ConfigError::new(Some(e.line), &e.key, format!("expected an integer >= 1, got `{}`", e.value)))?;
                if key == "max_parallel" {
                    max_parallel = n;
                } else {
                    max_points = n;
                }
            }
            _ => {
                if SCALAR_SWEEP_KEYS.contains(&key) {
                    return Err(ConfigError::new(Some(e.line), &e.key, format!("`{key}` cannot be swept")));
                }
                let values: Vec<String> = e.value.split(',').map(|v| v.trim().to_string()).collect();
                if values.iter().any(|v| v.is_empty()) {
                    return Err(ConfigError::new(Some(e.line), &e.key, "empty value in sweep list".into()));
                }
                // Probe every value against the base so typos fail up front.
                for v in &values {
                    let mut probe = base.clone();
                    probe
                        .apply(key, v)
                        .map_err(|m| ConfigError::new(Some(e.line), &e.key, m))?;
                }
                axes.push(SweepAxis {
                    key: key.to_string(),
                    values,
                    line: e.line,
                });
            }
        }
    }
    if axes.is_empty() {
        return Err(ConfigError::new(None, "sweep.*", "a sweep needs at least one `sweep.<key> = values` axis".into()));
    }
    let spec = SweepSpec {
        base,
        base_entries,
        axes,
        max_parallel,
        max_points,
    };
    if spec.point_count() > spec.max_points {
        return Err(ConfigError::new(
            None,
            "sweep.max_points",
            format!("sweep has {} points, above the cap of {}", spec.point_count(), spec.max_points),
        ));
    }
    Ok(spec)
}

pub fn parse_sweep(path: &Path) -> Result<SweepSpec, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(None, "<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_sweep_str(&text)
}
