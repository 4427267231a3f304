//! Time integration of the coupled `(u, v, w)` system
//!
//! ```text
//! u_t = Δu − χ∇·(u∇v) + ξ₁∇·(u∇w) + u(a − μu^θ)
//! v_t = dΔv + ξ₂∇·(v∇w) + u − v
//! 0   = Δw + u − ū,   ∫w = 0
//! ```
//!
//! with zero-flux boundaries. One step is a first-order IMEX splitting:
//!
//! 1. explicit stage: advective fluxes on faces (upwinded by the sign of the
//!    face velocity, or centered), the logistic reaction `u(a − μu^θ)`, and
//!    the `+u` source of `v`, all evaluated at the old state;
//! 2. backward-Euler diffusion: `(I − dtΔ)u⁺ = u*` and
//!    `((1+dt)I − dt·dΔ)v⁺ = v*`, so the `−v` decay is implicit;
//! 3. a fresh elliptic solve `w⁺ = solve_w(u⁺)`.
//!
//! Since fluxes telescope and the implicit operators preserve the mean,
//! the masses obey, to round-off,
//!
//! ```text
//! ∫u⁺ − ∫u = dt·(a∫u − μ∫u^{θ+1})        (old u)
//! ∫v⁺ − ∫v = dt·(∫u − ∫v⁺)               (old u, new v)
//! ```

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{solve_w, solve_w_from, EllipticConfig};
use crate::error::{Error, Result};
use crate::functionals::{DeviationReference, DiagnosticsRecord};
use crate::grid::{
    apply_laplacian, divergence_into, dot, fmt_f64, gradient_into, Field, Grid,
};
use crate::linalg::{conjugate_gradient, remove_mean};

/// Relative residual target for the implicit diffusion solves.
const DIFFUSION_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Chemotactic sensitivity χ.
    pub chi: f64,
    /// Repulsive convection of `u` along `∇w`.
    pub xi1: f64,
    /// Convection of `v` along `∇w`.
    pub xi2: f64,
    /// Diffusion rate of `v`.
    pub d: f64,
    /// Growth rate.
    pub a: f64,
    /// Logistic strength.
    pub mu: f64,
    /// Logistic exponent.
    pub theta: f64,
    /// Spatial dimension used by the structural formulas.
    pub n_dim: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            chi: 0.0,
            xi1: 1.0,
            xi2: 1.0,
            d: 1.0,
            a: 0.0,
            mu: 0.0,
            theta: 1.0,
            n_dim: 2,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("chi", self.chi),
            ("xi1", self.xi1),
            ("xi2", self.xi2),
            ("a", self.a),
            ("mu", self.mu),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [("d", self.d), ("theta", self.theta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.n_dim == 0 {
            return Err(Error::InvalidArgument("n_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Outside the convective regime (ξ₁ or ξ₂ vanishes); allowed for
    /// oracle runs only.
    pub fn off_regime(&self) -> bool {
        self.xi1 == 0.0 || self.xi2 == 0.0
    }

    /// The constant equilibrium `b = (a/μ)^{1/θ}` when `a, μ > 0`.
    pub fn equilibrium(&self) -> Option<f64> {
        (self.a > 0.0 && self.mu > 0.0).then(|| (self.a / self.mu).powf(1.0 / self.theta))
    }

    fn pow_theta(&self, u: f64) -> f64 {
        if self.theta == 1.0 {
            u
        } else {
            u.powf(self.theta)
        }
    }

    /// `u(a − μu^θ)`.
    pub fn reaction(&self, u: f64) -> f64 {
        if self.mu == 0.0 {
            self.a * u
        } else {
            u * (self.a - self.mu * self.pow_theta(u))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxScheme {
    Upwind,
    Central,
}

impl std::str::FromStr for FluxScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(FluxScheme::Upwind),
            "central" => Ok(FluxScheme::Central),
            _ => Err(Error::Parse(format!(
                "flux scheme must be `upwind` or `central`, got `{s}`"
            ))),
        }
    }
}

impl std::fmt::Display for FluxScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FluxScheme::Upwind => "upwind",
            FluxScheme::Central => "central",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub flux_scheme: FluxScheme,
    /// `‖u‖∞` above which a run is flagged as blowing up.
    pub blowup_threshold: f64,
    pub record_every: usize,
    pub elliptic: EllipticConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            cfl_safety: 0.5,
            flux_scheme: FluxScheme::Upwind,
            blowup_threshold: 1e6,
            record_every: 1,
            elliptic: EllipticConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "blowup_threshold must be > 0, got {}",
                self.blowup_threshold
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        self.elliptic.validate()
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// Time stamp plus the `(u, v, w)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
}

impl SimState {
    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

/// Face velocities for `u` and `v` such that `u_t = −∇·(u s_u) + …` and
/// `v_t = −∇·(v s_v) + …`.
struct Velocities {
    su: [Vec<f64>; 2],
    sv: [Vec<f64>; 2],
}

fn velocities(state: &SimState, p: &ModelParams) -> Velocities {
    let g = state.grid();
    let mut gv = [vec![0.0; g.face_count(0)], vec![0.0; g.face_count(1)]];
    let mut gw = gv.clone();
    gradient_into(g, state.v.values(), &mut gv);
    gradient_into(g, state.w.values(), &mut gw);
    let mut su = gv.clone();
    let mut sv = gv.clone();
    for axis in 0..2 {
        for f in 0..gv[axis].len() {
            su[axis][f] = p.chi * gv[axis][f] - p.xi1 * gw[axis][f];
            sv[axis][f] = -p.xi2 * gw[axis][f];
        }
    }
    Velocities { su, sv }
}

/// Largest stable step: the advective CFL limit `h/|s|max` per axis, the
/// reaction limit `1/(a + μ‖u‖∞^θ + 1)` and the `v` source limit 1, times
/// `cfl_safety`. Diffusion is implicit and imposes nothing.
pub fn stable_dt(state: &SimState, p: &ModelParams, cfg: &SolverConfig) -> f64 {
    let vel = velocities(state, p);
    stable_dt_with(state, p, cfg, &vel)
}

fn stable_dt_with(state: &SimState, p: &ModelParams, cfg: &SolverConfig, vel: &Velocities) -> f64 {
    let g = state.grid();
    let mut bound: f64 = 1.0;
    for axis in 0..g.dim() {
        let smax = vel.su[axis]
            .iter()
            .chain(&vel.sv[axis])
            .fold(0.0, |m: f64, s| m.max(s.abs()));
        if smax > 0.0 {
            bound = bound.min(g.spacing()[axis] / smax);
        }
    }
    let umax = state.u.linf();
    bound = bound.min(1.0 / (p.a + p.mu * p.pow_theta(umax) + 1.0));
    bound * cfg.cfl_safety
}

fn advective_flux(scheme: FluxScheme, g: &Grid, c: &[f64], s: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
    let mut flux = [vec![0.0; s[0].len()], vec![0.0; s[1].len()]];
    for axis in 0..g.dim() {
        for (f, out) in flux[axis].iter_mut().enumerate() {
            let (lo, hi) = g.face_cells(axis, f);
            let vel = s[axis][f];
            let carrier = match scheme {
                FluxScheme::Upwind => {
                    if vel >= 0.0 {
                        c[lo]
                    } else {
                        c[hi]
                    }
                }
                FluxScheme::Central => 0.5 * (c[lo] + c[hi]),
            };
            *out = vel * carrier;
        }
    }
    flux
}

/// Solves `(shift·I − κΔ)x = b`, treating the mean exactly and the
/// zero-mean part by projected CG.
///
/// The residual target is relative to `‖b‖`, not to its zero-mean part:
/// once `b` is nearly constant the fluctuation is only known to round-off
/// of the mean.
fn implicit_diffusion(g: &Grid, b: &[f64], guess: &[f64], shift: f64, kappa: f64) -> Result<Vec<f64>> {
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    let full = dot(b, b).sqrt();
    let dev = dot(&rhs, &rhs).sqrt();
    let tol = if dev > 0.0 {
        (DIFFUSION_TOLERANCE * full / dev).max(DIFFUSION_TOLERANCE)
    } else {
        DIFFUSION_TOLERANCE
    };
    let mut x = guess.to_vec();
    let op = |a: &[f64], out: &mut [f64]| {
        apply_laplacian(g, a, out);
        for (o, ai) in out.iter_mut().zip(a) {
            *o = shift * ai - kappa * *o;
        }
    };
    conjugate_gradient(op, &rhs, &mut x, tol, 10 * g.len() + 100, true, 0.0)
        .map_err(|o| Error::NotConverged {
            what: "implicit diffusion solve",
            iterations: o.iterations,
            residual: o.residual,
        })?;
    let m = mean / shift;
    x.iter_mut().for_each(|v| *v += m);
    Ok(x)
}

/// Advances the state by one step of length `cfg.dt`.
pub fn step(state: &SimState, p: &ModelParams, cfg: &SolverConfig) -> Result<SimState> {
    let g = *state.grid();
    let dt = cfg.dt;
    let fail = |reason: String| Error::StepFailure { t: state.t, reason };

    let vel = velocities(state, p);
    let bound = stable_dt_with(state, p, cfg, &vel);
    if dt > bound {
        return Err(fail(format!(
            "dt={dt:e} exceeds the stability bound {bound:e} (cfl_safety={})",
            cfg.cfl_safety
        )));
    }

    let u = state.u.values();
    let v = state.v.values();
    let n = g.len();

    let fu = advective_flux(cfg.flux_scheme, &g, u, &vel.su);
    let fv = advective_flux(cfg.flux_scheme, &g, v, &vel.sv);
    let mut div_u = vec![0.0; n];
    let mut div_v = vec![0.0; n];
    divergence_into(&g, &fu, &mut div_u);
    divergence_into(&g, &fv, &mut div_v);

    let mut u_star = vec![0.0; n];
    let mut v_star = vec![0.0; n];
    for i in 0..n {
        u_star[i] = u[i] - dt * div_u[i] + dt * p.reaction(u[i]);
        v_star[i] = v[i] - dt * div_v[i] + dt * u[i];
    }
    if !u_star.iter().chain(&v_star).all(|x| x.is_finite()) {
        return Err(Error::NonFinite { t: state.t });
    }

    let u_new = implicit_diffusion(&g, &u_star, u, 1.0, dt)?;
    let v_new = implicit_diffusion(&g, &v_star, v, 1.0 + dt, dt * p.d)?;

    if let Some((i, &x)) = u_new.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        if !x.is_finite() {
            return Err(Error::NonFinite { t: state.t });
        }
        return Err(fail(format!("positivity lost: u={x:e} at cell {i}")));
    }
    if let Some((i, &x)) = v_new.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
        return Err(fail(format!("positivity lost: v={x:e} at cell {i}")));
    }

    let u_new = Field::new(g, u_new)?;
    let w = solve_w_from(&u_new, Some(&state.w), &cfg.elliptic)?.w;
    Ok(SimState {
        t: state.t + dt,
        u: u_new,
        v: Field::new(g, v_new)?,
        w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    BlowupDetected,
    StepFailure,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::BlowupDetected => "blowup_detected",
            Termination::StepFailure => "step_failure",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub terminal: SimState,
    pub termination: Termination,
    /// Diagnostic for a non-completed run.
    pub message: Option<String>,
    pub dt: f64,
    pub reference: DeviationReference,
}

impl Trajectory {
    /// `(t, value)` pairs for one diagnostics column.
    pub fn series(&self, column: &str) -> Option<Vec<(f64, f64)>> {
        self.records
            .iter()
            .map(|r| r.column(column).map(|v| (r.t, v)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_trajectory_csv(&self.records, w)
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 14] = [
    "t",
    "mass_u",
    "mass_v",
    "linf_u",
    "linf_v",
    "l2_u_dev",
    "l2_v_dev",
    "l2_grad_v",
    "linf_grad_w",
    "F1",
    "F2",
    "elliptic_residual",
    "min_u",
    "min_v",
];

pub fn write_trajectory_csv<W: Write>(records: &[DiagnosticsRecord], mut w: W) -> Result<()> {
    writeln!(w, "{}", TRAJECTORY_COLUMNS.join(","))?;
    for r in records {
        let row: Vec<String> = TRAJECTORY_COLUMNS
            .iter()
            .map(|c| fmt_f64(r.column(c).unwrap_or(f64::NAN)))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Integrates from `initial` to `cfg.t_end`, recording diagnostics every
/// `cfg.record_every` steps and at the final step.
pub fn run(initial: &SimState, p: &ModelParams, cfg: &SolverConfig) -> Result<Trajectory> {
    p.validate()?;
    cfg.validate()?;
    if initial.u.min() < 0.0 || initial.v.min() < 0.0 {
        return Err(Error::InvalidArgument(
            "initial data must satisfy u0 >= 0 and v0 >= 0".into(),
        ));
    }
    if initial.u.max() <= 0.0 {
        return Err(Error::InvalidArgument("initial u0 must not vanish identically".into()));
    }
    let bound = stable_dt(initial, p, cfg);
    if cfg.dt > bound {
        return Err(Error::InvalidArgument(format!(
            "dt={:e} exceeds the stability bound {bound:e} of the initial data",
            cfg.dt
        )));
    }

    let reference = DeviationReference::for_run(p, &initial.u);
    let mut records = vec![DiagnosticsRecord::measure(initial, p, reference)];
    let mut state = initial.clone();
    let steps = cfg.steps();
    let mut termination = Termination::Completed;
    let mut message = None;
    for k in 1..=steps {
        match step(&state, p, cfg) {
            Ok(mut next) => {
                next.t = initial.t + k as f64 * cfg.dt;
                state = next;
            }
            Err(Error::NonFinite { t }) => {
                termination = Termination::BlowupDetected;
                message = Some(format!("non-finite values at t={t}"));
                break;
            }
            Err(e) => {
                termination = Termination::StepFailure;
                message = Some(e.to_string());
                break;
            }
        }
        let linf = state.u.linf();
        if !(linf <= cfg.blowup_threshold) {
            records.push(DiagnosticsRecord::measure(&state, p, reference));
            termination = Termination::BlowupDetected;
            message = Some(format!(
                "‖u‖∞={linf:e} exceeds blowup threshold {:e} at t={}",
                cfg.blowup_threshold, state.t
            ));
            break;
        }
        if k % cfg.record_every == 0 || k == steps {
            records.push(DiagnosticsRecord::measure(&state, p, reference));
        }
    }
    Ok(Trajectory {
        records,
        terminal: state,
        termination,
        message,
        dt: cfg.dt,
        reference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Constant,
    CosineBump,
    GaussianBump,
    RandomPositive,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "constant" => Profile::Constant,
            "cosine_bump" => Profile::CosineBump,
            "gaussian_bump" => Profile::GaussianBump,
            "random_positive" => Profile::RandomPositive,
            _ => {
                return Err(Error::Parse(format!(
                    "unknown profile `{s}` (expected constant, cosine_bump, gaussian_bump or random_positive)"
                )))
            }
        })
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Constant => "constant",
            Profile::CosineBump => "cosine_bump",
            Profile::GaussianBump => "gaussian_bump",
            Profile::RandomPositive => "random_positive",
        })
    }
}

/// Initial data: `u0 = base + amplitude·s(x)` and
/// `v0 = v_base + v_amplitude·s(x)` for a profile shape `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub profile: Profile,
    pub base: f64,
    pub amplitude: f64,
    /// Defaults to `base`.
    pub v_base: Option<f64>,
    pub v_amplitude: f64,
    /// Gaussian width as a fraction of the longest side.
    pub width: f64,
    pub seed: u64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            profile: Profile::CosineBump,
            base: 1.0,
            amplitude: 0.5,
            v_base: None,
            v_amplitude: 0.0,
            width: 0.1,
            seed: 0,
        }
    }
}

impl InitialSpec {
    pub fn constant(c: f64) -> Self {
        InitialSpec {
            profile: Profile::Constant,
            base: c,
            amplitude: 0.0,
            ..Default::default()
        }
    }

    pub fn cosine(base: f64, amplitude: f64) -> Self {
        InitialSpec {
            profile: Profile::CosineBump,
            base,
            amplitude,
            ..Default::default()
        }
    }
}

fn shape(grid: &Grid, spec: &InitialSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = grid.len();
    match spec.profile {
        Profile::Constant => vec![0.0; n],
        Profile::CosineBump => (0..n)
            .map(|i| {
                let x = grid.cell_center(i);
                (0..grid.dim())
                    .map(|a| (std::f64::consts::PI * x[a] / grid.lengths()[a]).cos())
                    .product()
            })
            .collect(),
        Profile::GaussianBump => {
            let lmax = grid.lengths().iter().cloned().fold(0.0, f64::max);
            let s2 = (spec.width * lmax).powi(2);
            (0..n)
                .map(|i| {
                    let x = grid.cell_center(i);
                    let r2: f64 = (0..grid.dim())
                        .map(|a| (x[a] - 0.5 * grid.lengths()[a]).powi(2))
                        .sum();
                    (-r2 / (2.0 * s2)).exp()
                })
                .collect()
        }
        Profile::RandomPositive => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

/// Builds positive `u0`, nonnegative `v0` and the matching `w0`.
pub fn make_initial(grid: &Grid, spec: &InitialSpec) -> Result<SimState> {
    for (name, v) in [
        ("base", spec.base),
        ("amplitude", spec.amplitude),
        ("v_amplitude", spec.v_amplitude),
        ("width", spec.width),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("initial {name} must be finite")));
        }
    }
    if spec.profile == Profile::GaussianBump && spec.width <= 0.0 {
        return Err(Error::InvalidArgument("gaussian width must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let su = shape(grid, spec, &mut rng);
    let sv = if spec.profile == Profile::RandomPositive {
        shape(grid, spec, &mut rng)
    } else {
        su.clone()
    };
    let v_base = spec.v_base.unwrap_or(spec.base);
    let u: Vec<f64> = su.iter().map(|s| spec.base + spec.amplitude * s).collect();
    let v: Vec<f64> = sv.iter().map(|s| v_base + spec.v_amplitude * s).collect();
    if let Some(m) = u.iter().cloned().reduce(f64::min).filter(|m| !(*m > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "{} profile with base={} and amplitude={} gives min u0={m:e}; u0 must be positive",
            spec.profile, spec.base, spec.amplitude
        )));
    }
    if let Some(m) = v.iter().cloned().reduce(f64::min).filter(|m| !(*m >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "{} profile with v_base={v_base} and v_amplitude={} gives min v0={m:e}; v0 must be nonnegative",
            spec.profile, spec.v_amplitude
        )));
    }
    let u = Field::new(*grid, u)?;
    let w = solve_w(&u, &EllipticConfig::default())?;
    Ok(SimState {
        t: 0.0,
        u,
        v: Field::new(*grid, v)?,
        w,
    })
}
