//! Lyapunov functionals, per-record diagnostics and decay-rate fits.

use crate::dynamics::{ModelParams, SimState, Trajectory};
use crate::elliptic::elliptic_residual;
use crate::error::{Error, Result};
use crate::grid::{gradient_faces, Field};

/// Below this `|δ|` the entropy integrands switch to their Taylor series.
const SERIES_CUTOFF: f64 = 1e-2;

/// `(1+δ)ln(1+δ) − δ`, accurate near `δ = 0`.
fn entropy_kernel(delta: f64) -> f64 {
    if delta.abs() < SERIES_CUTOFF {
        // Σ_{k≥2} (−δ)^k / (k(k−1))
        let mut term = delta * delta;
        let mut sum = 0.0;
        for k in 2..=10 {
            sum += term / (k * (k - 1)) as f64;
            term *= -delta;
        }
        sum
    } else {
        (1.0 + delta) * delta.ln_1p() - delta
    }
}

/// `δ − ln(1+δ)`, accurate near `δ = 0`.
fn log_kernel(delta: f64) -> f64 {
    if delta.abs() < SERIES_CUTOFF {
        // Σ_{k≥2} (−δ)^k / k
        let mut term = delta * delta;
        let mut sum = 0.0;
        for k in 2..=11 {
            sum += term / k as f64;
            term *= -delta;
        }
        sum
    } else {
        delta - delta.ln_1p()
    }
}

fn require_positive(f: &Field, what: &'static str) -> Result<()> {
    match f.values().iter().position(|&x| !(x > 0.0)) {
        Some(index) => Err(Error::NonPositive {
            what,
            index,
            value: f.values()[index],
        }),
        None => Ok(()),
    }
}

/// `∫ u ln(u/ū)` for positive `u`.
pub fn relative_entropy(u: &Field) -> Result<f64> {
    require_positive(u, "relative entropy")?;
    let mean = u.mean();
    let s: f64 = u
        .values()
        .iter()
        .map(|&x| entropy_kernel(x / mean - 1.0))
        .sum();
    Ok(mean * s * u.grid().cell_volume())
}

/// Gaps of `‖u−ū‖₁²/(2ū|Ω|) ≤ ∫u ln(u/ū) ≤ ‖u−ū‖₂²/ū`, as
/// `(H − lower, upper − H)`; both are nonnegative up to round-off.
///
/// The lower bound is Pinsker's inequality for `u/∫u`; the `|Ω|` factor
/// matters off the unit domain, where `‖u−ū‖₁²/(2ū)` alone can exceed `H`.
pub fn entropy_sandwich_check(u: &Field) -> Result<(f64, f64)> {
    let h = relative_entropy(u)?;
    let mean = u.mean();
    let l1 = u.l1_dist_to(mean);
    let l2 = u.l2_dist_to(mean);
    let measure = u.grid().measure();
    Ok((h - l1 * l1 / (2.0 * mean * measure), l2 * l2 / mean - h))
}

/// `sqrt(Σ_faces g²·cellvol)` for the face gradient of `f`.
pub fn grad_l2(f: &Field) -> f64 {
    gradient_faces(f).l2()
}

/// `∫u ln(u/ū) + (χ/2)‖∇v‖²`.
pub fn lyap_f1(state: &SimState, chi: f64) -> Result<f64> {
    let g = grad_l2(&state.v);
    Ok(relative_entropy(&state.u)? + 0.5 * chi * g * g)
}

/// `∫(u − b − b ln(u/b)) + (bχ²/2d)∫(v − b)²` with `b = (a/μ)^{1/θ}`.
pub fn lyap_f2(state: &SimState, p: &ModelParams) -> Result<f64> {
    let b = p.equilibrium().ok_or_else(|| {
        Error::InvalidArgument("the logistic functional needs a > 0 and mu > 0".into())
    })?;
    require_positive(&state.u, "logistic functional")?;
    let vol = state.u.grid().cell_volume();
    let s: f64 = state
        .u
        .values()
        .iter()
        .map(|&x| log_kernel(x / b - 1.0))
        .sum();
    let dv = state.v.l2_dist_to(b);
    Ok(b * s * vol + b * p.chi * p.chi / (2.0 * p.d) * dv * dv)
}

/// Constant the `*_dev` diagnostics are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviationReference {
    /// Mean of the initial `u`; conserved without reaction.
    InitialMean(f64),
    /// Logistic equilibrium `b`.
    Equilibrium(f64),
    /// Current spatial mean of each field.
    CurrentMean,
}

impl DeviationReference {
    pub fn for_run(p: &ModelParams, u0: &Field) -> Self {
        if let Some(b) = p.equilibrium() {
            DeviationReference::Equilibrium(b)
        } else if p.a == 0.0 && p.mu == 0.0 {
            DeviationReference::InitialMean(u0.mean())
        } else {
            DeviationReference::CurrentMean
        }
    }

    fn value_for(&self, f: &Field) -> f64 {
        match *self {
            DeviationReference::InitialMean(c) | DeviationReference::Equilibrium(c) => c,
            DeviationReference::CurrentMean => f.mean(),
        }
    }
}

/// Scalar diagnostics of one recorded state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub l2_u_dev: f64,
    pub l2_v_dev: f64,
    pub l1_u_dev: f64,
    pub linf_u_dev: f64,
    pub linf_v_dev: f64,
    pub l2_grad_v: f64,
    pub linf_grad_w: f64,
    /// Present when `a = μ = 0`.
    pub f1: Option<f64>,
    /// Present when `a, μ > 0`.
    pub f2: Option<f64>,
    pub elliptic_residual: f64,
    pub min_u: f64,
    pub min_v: f64,
    /// `a∫u − μ∫u^{θ+1}` at this state.
    pub reaction: f64,
}

impl DiagnosticsRecord {
    pub fn measure(s: &SimState, p: &ModelParams, reference: DeviationReference) -> Self {
        let ru = reference.value_for(&s.u);
        let rv = match reference {
            DeviationReference::InitialMean(_) => s.v.mean(),
            _ => reference.value_for(&s.v),
        };
        let conserving = p.a == 0.0 && p.mu == 0.0;
        let higher = if p.mu == 0.0 {
            0.0
        } else {
            s.u.map(|x| x.powf(p.theta + 1.0)).integrate()
        };
        DiagnosticsRecord {
            t: s.t,
            mass_u: s.u.integrate(),
            mass_v: s.v.integrate(),
            linf_u: s.u.linf(),
            linf_v: s.v.linf(),
            l2_u_dev: s.u.l2_dist_to(ru),
            l2_v_dev: s.v.l2_dist_to(rv),
            l1_u_dev: s.u.l1_dist_to(ru),
            linf_u_dev: s.u.linf_dist_to(ru),
            linf_v_dev: s.v.linf_dist_to(rv),
            l2_grad_v: grad_l2(&s.v),
            linf_grad_w: gradient_faces(&s.w).cell_magnitude_max(),
            f1: conserving.then(|| lyap_f1(s, p.chi).unwrap_or(f64::NAN)),
            f2: p
                .equilibrium()
                .map(|_| lyap_f2(s, p).unwrap_or(f64::NAN)),
            elliptic_residual: elliptic_residual(&s.u, &s.w),
            min_u: s.u.min(),
            min_v: s.v.min(),
            reaction: p.a * s.u.integrate() - p.mu * higher,
        }
    }

    /// Looks up a column by its CSV name; absent functionals read as NaN.
    pub fn column(&self, name: &str) -> Option<f64> {
        Some(match name {
            "t" => self.t,
            "mass_u" => self.mass_u,
            "mass_v" => self.mass_v,
            "linf_u" => self.linf_u,
            "linf_v" => self.linf_v,
            "l2_u_dev" => self.l2_u_dev,
            "l2_v_dev" => self.l2_v_dev,
            "l1_u_dev" => self.l1_u_dev,
            "linf_u_dev" => self.linf_u_dev,
            "linf_v_dev" => self.linf_v_dev,
            "l2_grad_v" => self.l2_grad_v,
            "linf_grad_w" => self.linf_grad_w,
            "F1" => self.f1.unwrap_or(f64::NAN),
            "F2" => self.f2.unwrap_or(f64::NAN),
            "elliptic_residual" => self.elliptic_residual,
            "min_u" => self.min_u,
            "min_v" => self.min_v,
            "reaction" => self.reaction,
            _ => return None,
        })
    }
}

/// Largest defect of the discrete mass law
/// `mass_u(t_{k+1}) − mass_u(t_k) = (t_{k+1} − t_k)·(a∫u − μ∫u^{θ+1})(t_k)`
/// over consecutive records. Exact only when every step is recorded.
pub fn mass_balance_residual(traj: &Trajectory) -> f64 {
    traj.records
        .windows(2)
        .map(|w| {
            let (r0, r1) = (&w[0], &w[1]);
            (r1.mass_u - r0.mass_u - (r1.t - r0.t) * r0.reaction).abs()
        })
        .fold(0.0, f64::max)
}

/// Least-squares fit of `ln value = c − rate·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub window_start: f64,
    pub window_end: f64,
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits the exponential decay rate of `(t, value)` samples with `t` in
/// `window` (inclusive).
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::InvalidArgument(format!(
            "fit window must satisfy t0 < t1, got [{t0}, {t1}]"
        )));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .copied()
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "fit window [{t0}, {t1}] holds {} samples, need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "cannot fit a log-linear decay through value {v:e} at t={t}"
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in &pts {
        let (dt, dy) = (t - mt, v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InvalidArgument("fit window holds a single time".into()));
    }
    let slope = sty / stt;
    let ss_res = (syy - slope * sty).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        window_start: t0,
        window_end: t1,
        rate: -slope,
        intercept: my - slope * mt,
        r_squared,
        samples: pts.len(),
    })
}

/// The last half of the recorded time span.
pub fn default_window(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    let t0 = series.first()?.0;
    let t1 = series.last()?.0;
    Some((t0 + 0.5 * (t1 - t0), t1))
}

/// Window from `t_start` up to the last time the value still exceeds
/// `floor`, so a fit stays clear of the round-off plateau.
pub fn window_above_floor(series: &[(f64, f64)], t_start: f64, floor: f64) -> Option<(f64, f64)> {
    let t_end = series
        .iter()
        .rev()
        .find(|(t, v)| *t >= t_start && *v > floor)?
        .0;
    (t_end > t_start).then_some((t_start, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_initial, InitialSpec, Profile};
    use crate::elliptic::{solve_w, EllipticConfig};
    use crate::grid::Grid;
    use proptest::prelude::*;

    fn state(u: Field, v: Field) -> SimState {
        let w = solve_w(&u, &EllipticConfig::default()).unwrap();
        SimState { t: 0.0, u, v, w }
    }

    #[test]
    fn kernels_match_direct_formulas() {
        for &d in &[-0.5, -0.011, 0.02, 0.3, 4.0] {
            let direct = (1.0 + d) * (1.0f64 + d).ln() - d;
            assert!((entropy_kernel(d) - direct).abs() < 1e-14);
            assert!((log_kernel(d) - (d - (1.0f64 + d).ln())).abs() < 1e-14);
        }
        for &d in &[-9e-3, -1e-4, 1e-6, 9e-3] {
            let e = entropy_kernel(d);
            assert!((e / (d * d / 2.0 - d * d * d / 6.0) - 1.0).abs() < 1e-4);
            assert!(e > 0.0 && log_kernel(d) > 0.0);
        }
        assert_eq!(entropy_kernel(0.0), 0.0);
    }

    #[test]
    fn entropy_of_constant_is_zero() {
        let g = Grid::interval(1.0, 16).unwrap();
        assert_eq!(relative_entropy(&Field::constant(g, 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_two_level_field() {
        // u = 1 on half, 3 on half: ∫u ln(u/2) = ½(ln ½) + ½·3 ln(3/2).
        let g = Grid::interval(1.0, 64).unwrap();
        let u = Field::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 3.0 });
        let expect = 0.5 * (0.5f64).ln() + 1.5 * (1.5f64).ln();
        assert!((relative_entropy(&u).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn entropy_rejects_nonpositive() {
        let g = Grid::interval(1.0, 8).unwrap();
        let mut u = Field::constant(g, 1.0);
        u.values_mut()[3] = 0.0;
        assert!(matches!(
            relative_entropy(&u),
            Err(Error::NonPositive { index: 3, .. })
        ));
    }

    #[test]
    fn sandwich_lower_bound_needs_domain_measure() {
        // Two-level field on [0, 4]: H = 4·0.5·φ(±0.5) averaged, small next
        // to ‖u−ū‖₁²/(2ū) = 4.
        let g = Grid::interval(4.0, 64).unwrap();
        let u = Field::from_fn(g, |x| if x[0] < 2.0 { 0.5 } else { 1.5 });
        let h = relative_entropy(&u).unwrap();
        let l1 = u.l1_dist_to(1.0);
        assert!(l1 * l1 / 2.0 > h);
        let (lo, hi) = entropy_sandwich_check(&u).unwrap();
        assert!(lo >= 0.0 && hi >= 0.0);
    }

    #[test]
    fn sandwich_near_constant() {
        let g = Grid::interval(1.0, 256).unwrap();
        let u = Field::from_fn(g, |x| 1.0 + 1e-6 * (std::f64::consts::PI * x[0]).cos());
        let (lo, hi) = entropy_sandwich_check(&u).unwrap();
        assert!(lo.abs() < 1e-9 && hi.abs() < 1e-9);
        assert!(lo >= 0.0 && hi >= 0.0);
    }

    #[test]
    fn entropy_matches_fine_quadrature() {
        let f = |x: f64| 1.0 + 0.5 * (std::f64::consts::PI * x).cos();
        let g = Grid::interval(1.0, 256).unwrap();
        let h = relative_entropy(&Field::from_fn(g, |x| f(x[0]))).unwrap();
        // Composite Simpson on 2^16 panels; ū = 1 exactly.
        let m = 1 << 16;
        let mut s = 0.0;
        for k in 0..=m {
            let x = k as f64 / m as f64;
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(x) * f(x).ln();
        }
        let oracle = s / (3.0 * m as f64);
        assert!(h > 0.0);
        assert!((h - oracle).abs() < 1e-6, "{h} vs {oracle}");
    }

    #[test]
    fn f1_of_constant_state_is_zero() {
        let g = Grid::interval(1.0, 16).unwrap();
        let s = state(Field::constant(g, 2.0), Field::constant(g, 5.0));
        assert_eq!(lyap_f1(&s, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn f2_vanishes_at_equilibrium_only() {
        let g = Grid::interval(1.0, 16).unwrap();
        let p = ModelParams {
            chi: 0.5,
            a: 2.0,
            mu: 1.0,
            theta: 1.0,
            ..Default::default()
        };
        let s = state(Field::constant(g, 2.0), Field::constant(g, 2.0));
        assert_eq!(lyap_f2(&s, &p).unwrap(), 0.0);
        let s = state(Field::constant(g, 2.5), Field::constant(g, 2.0));
        assert!(lyap_f2(&s, &p).unwrap() > 0.0);
        assert!(lyap_f2(&s, &ModelParams::default()).is_err());
    }

    #[test]
    fn grad_l2_of_linear_field() {
        let g = Grid::interval(1.0, 10).unwrap();
        let f = Field::from_fn(g, |x| 3.0 * x[0]);
        // Nine interior faces with slope 3, each weighted by h.
        let expect = (9.0 * 9.0 * 0.1f64).sqrt();
        assert!((grad_l2(&f) - expect).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_rate() {
        let series: Vec<(f64, f64)> = (0..=100)
            .map(|k| {
                let t = k as f64 * 0.05;
                let noise = if k % 2 == 0 { 1e-15 } else { -1e-15 };
                (t, (-2.0 * t).exp() + noise)
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 5.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-6);
        assert!(fit.r_squared > 0.999_999);
        assert_eq!(fit.samples, 101);
        assert_eq!(default_window(&series), Some((2.5, 5.0)));
    }

    #[test]
    fn fit_exact_and_constant_series() {
        let exact: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, (-0.2 * k as f64).exp())).collect();
        let fit = fit_decay_rate(&exact, (0.0, 5.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 3.5)).collect();
        let fit = fit_decay_rate(&flat, (0.0, 49.0)).unwrap();
        assert!(fit.rate.abs() < 1e-12);
        assert_eq!((fit.window_start, fit.window_end), (0.0, 49.0));
    }

    #[test]
    fn grad_l2_cosine_oracle() {
        let g = Grid::interval(1.0, 256).unwrap();
        let f = Field::from_fn(g, |x| (std::f64::consts::PI * x[0]).cos());
        let expect = std::f64::consts::PI / 2f64.sqrt();
        assert!((grad_l2(&f) - expect).abs() < 1e-3);
        assert!((grad_l2(&f.map(|x| 3.0 * x)) - 3.0 * grad_l2(&f)).abs() < 1e-12);
        assert_eq!(grad_l2(&Field::constant(g, 2.0)), 0.0);
    }

    #[test]
    fn fit_errors() {
        let few: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 1.0)).collect();
        assert!(fit_decay_rate(&few, (0.0, 10.0)).is_err());
        let mut s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 1.0)).collect();
        assert!(fit_decay_rate(&s, (3.0, 1.0)).is_err());
        s[4].1 = 0.0;
        assert!(fit_decay_rate(&s, (0.0, 19.0)).is_err());
        s[4].1 = f64::NAN;
        assert!(fit_decay_rate(&s, (0.0, 19.0)).is_err());
    }

    #[test]
    fn floor_window_stops_before_plateau() {
        let s: Vec<(f64, f64)> = (0..100)
            .map(|k| (k as f64, (-(k as f64)).exp().max(1e-15)))
            .collect();
        let (t0, t1) = window_above_floor(&s, 1.0, 1e-12).unwrap();
        assert_eq!(t0, 1.0);
        assert_eq!(t1, 27.0);
    }

    #[test]
    fn mass_balance_is_round_off_when_every_step_is_recorded() {
        let g = Grid::interval(1.0, 32).unwrap();
        let p = ModelParams {
            chi: 0.5,
            a: 1.0,
            mu: 2.0,
            theta: 1.0,
            n_dim: 1,
            ..Default::default()
        };
        let init = make_initial(&g, &InitialSpec::cosine(1.0, 0.4)).unwrap();
        let cfg = crate::dynamics::SolverConfig {
            dt: 1e-3,
            t_end: 0.1,
            ..Default::default()
        };
        let traj = crate::dynamics::run(&init, &p, &cfg).unwrap();
        assert!(mass_balance_residual(&traj) < 1e-13);
        assert!(traj.records.iter().all(|r| r.f2.is_some() && r.f1.is_none()));
    }

    fn positive_field() -> impl Strategy<Value = Field> {
        (1usize..=2, 4usize..12, any::<u64>(), 0.01f64..0.99).prop_map(|(dim, n, seed, amp)| {
            let g = if dim == 1 {
                Grid::interval(1.3, n).unwrap()
            } else {
                Grid::rectangle(1.0, 0.7, n, n + 1).unwrap()
            };
            let spec = InitialSpec {
                profile: Profile::RandomPositive,
                base: 1.0,
                amplitude: amp,
                seed,
                ..Default::default()
            };
            make_initial(&g, &spec).unwrap().u
        })
    }

    proptest! {
        #[test]
        fn sandwich_holds(u in positive_field(), scale in 1e-3f64..1e3) {
            let u = u.map(|x| x * scale);
            let (lo, hi) = entropy_sandwich_check(&u).unwrap();
            let h = relative_entropy(&u).unwrap();
            let tol = 1e-12 * (1.0 + h.abs());
            prop_assert!(lo >= -tol, "lower gap {lo}");
            prop_assert!(hi >= -tol, "upper gap {hi}");
        }

        #[test]
        fn functionals_are_nonnegative(u in positive_field(), chi in 0.0f64..3.0) {
            let s = state(u.clone(), u.map(|x| x * 0.5));
            prop_assert!(lyap_f1(&s, chi).unwrap() >= 0.0);
            let p = ModelParams { chi, a: 1.0, mu: 1.0, ..Default::default() };
            prop_assert!(lyap_f2(&s, &p).unwrap() >= 0.0);
        }
    }
}
