//! Structural bounds and parameter thresholds.
//!
//! The structural formulas carry generic multipliers that are only known
//! to exist; they are inputs here (default 1), so values are meaningful as
//! scaling shapes, not as sharp numbers. The empirical checks substitute
//! suprema measured along a trajectory for the continuum ones.

use std::fmt::Write as _;

use crate::dynamics::{ModelParams, Trajectory};
use crate::error::{Error, Result};
use crate::grid::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericConstants {
    /// Multiplier of the `‖v‖∞` bound.
    pub k1: f64,
    /// Multiplier of the `‖∇w‖∞` bound.
    pub k2: f64,
    /// Multiplier of the Moser-type `‖v‖∞` bound.
    pub c0: f64,
    /// Stand-in for the `ξ₁ ≥ ξ₀χ²` threshold constant.
    pub xi0: f64,
    /// Stand-in for the large-`μ` threshold constant.
    pub mu0: f64,
}

impl Default for GenericConstants {
    fn default() -> Self {
        GenericConstants {
            k1: 1.0,
            k2: 1.0,
            c0: 1.0,
            xi0: 1.0,
            mu0: 1.0,
        }
    }
}

impl GenericConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("c0", self.c0),
            ("xi0", self.xi0),
            ("mu0", self.mu0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "generic constant {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn n_of(p: &ModelParams) -> f64 {
    p.n_dim as f64
}

/// Ceiling on `‖u(t)‖_{L¹}`.
pub fn compute_m1(u0_mass: f64, p: &ModelParams, omega_measure: f64) -> f64 {
    if p.mu == 0.0 {
        return u0_mass;
    }
    let th = p.theta;
    u0_mass
        + (1.0 + p.a).powf((1.0 + th) / th)
            * (1.0 / p.mu).powf(1.0 / th)
            * (2.0 / (th + 1.0)).powf(1.0 / th)
            * (th / (th + 1.0))
            * omega_measure
}

/// Structural `‖v‖∞` bound in terms of the model parameters.
pub fn structural_m0(p: &ModelParams, g: &GenericConstants) -> Result<f64> {
    if p.xi2 <= 0.0 {
        return Err(Error::InvalidArgument(
            "the structural v bound divides by xi2, which must be > 0".into(),
        ));
    }
    let n = n_of(p);
    let s = if p.mu == 0.0 {
        1.0
    } else {
        (1.0 / p.mu).powf(1.0 / p.theta)
    };
    let extra = if p.mu == 0.0 { 0.0 } else { s };
    let x = s * p.xi2;
    Ok(g.k1
        * (1.0 + extra + 1.0 / p.xi2)
        * (1.0 + x + (1.0 / p.d).powf(n / 2.0) * x.powf(1.0 + n / 2.0)))
}

/// Moser-type `‖v‖∞` bound through the `L¹` ceiling `m1` and the norms of
/// `v0`.
pub fn moser_m0(p: &ModelParams, m1: f64, v0_l1: f64, v0_linf: f64, g: &GenericConstants) -> Result<f64> {
    if p.xi2 <= 0.0 {
        return Err(Error::InvalidArgument("the Moser v bound needs xi2 > 0".into()));
    }
    let n = n_of(p);
    let x = m1 * p.xi2;
    let lead = (m1 + v0_l1).max(1.0 / p.xi2).max(v0_linf);
    Ok(g.c0 * lead * (1.0 + x + (1.0 / p.d).powf(n / 2.0) * x.powf(1.0 + n / 2.0)))
}

/// `(1 + ξ₁μ^{−1/θ} + μ^{−1/θ})·μ^{−(n+1)/θ}`.
pub fn m_mu(p: &ModelParams, theta: f64) -> Result<f64> {
    if p.mu <= 0.0 {
        return Err(Error::InvalidArgument("M_mu needs mu > 0".into()));
    }
    let s = (1.0 / p.mu).powf(1.0 / theta);
    Ok((1.0 + p.xi1 * s + s) * (1.0 / p.mu).powf((n_of(p) + 1.0) / theta))
}

/// Threshold of the large-`μ` regime for `θ = 1`:
/// `max{1, χ^{(8+2n)/(5+n)}}·μ₀·χ^{2/(5+n)}`.
pub fn mu_regime_threshold(p: &ModelParams, g: &GenericConstants) -> f64 {
    let n = n_of(p);
    let e1 = (8.0 + 2.0 * n) / (5.0 + n);
    let e2 = 2.0 / (5.0 + n);
    1.0f64.max(p.chi.powf(e1)) * g.mu0 * p.chi.powf(e2)
}

/// Which branch produced `M₁ᶜ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum M1cBranch {
    XiLarge,
    MuLargeLinear,
    Superlinear,
}

/// The three-branch quantity `M₁ᶜ` entering the `∇w` bound.
pub fn m1c(p: &ModelParams, m0: f64, g: &GenericConstants) -> Result<(f64, M1cBranch)> {
    let n = n_of(p);
    if p.mu == 0.0 {
        let need = g.xi0 * p.chi * p.chi;
        if p.xi1 >= need {
            return Ok((p.xi1, M1cBranch::XiLarge));
        }
        return Err(Error::InvalidArgument(format!(
            "no branch applies: mu = 0 needs xi1 >= xi0*chi^2 = {need}, got xi1 = {}",
            p.xi1
        )));
    }
    if p.theta == 1.0 {
        let need = mu_regime_threshold(p, g);
        if p.mu > need {
            return Ok((m_mu(p, 1.0)?, M1cBranch::MuLargeLinear));
        }
        return Err(Error::InvalidArgument(format!(
            "no branch applies: theta = 1 needs mu > {need}, got mu = {}",
            p.mu
        )));
    }
    if p.theta > 1.0 {
        let th = p.theta;
        let inner = (1.0 + 1.0 / p.d.powf(n + 2.0)) * (1.0 + m0 * p.xi2) * m0 * p.chi * p.chi;
        let value = m_mu(p, th)?
            + (th - 1.0) / p.mu.powf((n + 2.0) / (th - 1.0))
                * inner.powf((n + 1.0 + th) / (th - 1.0));
        return Ok((value, M1cBranch::Superlinear));
    }
    Err(Error::InvalidArgument(format!(
        "no branch applies: mu > 0 needs theta >= 1, got theta = {}",
        p.theta
    )))
}

/// Structural `‖∇w‖∞` bound; `convex` drops the boundary-curvature term.
pub fn structural_gradw_bound(p: &ModelParams, m0: f64, convex: bool, g: &GenericConstants) -> Result<f64> {
    let n = n_of(p);
    let (m1c, _) = m1c(p, m0, g)?;
    let d_omega = if convex { 0.0 } else { p.d };
    let inner = 1.0
        + (1.0 + d_omega * m0.powf(2.0 * (n + 1.0))) / p.d * p.chi * p.chi * m0.powf(1.0 - n)
        + m1c;
    Ok(g.k2 * inner.powf(1.0 / (n + 1.0)))
}

/// `Λ(z) = (dχ² + d²Cp²ξ₁² + Cp²ξ₂²z) / (2d²a^{(θ−2)/θ})`.
pub fn lambda(p: &ModelParams, cp: f64, z: f64) -> Result<f64> {
    if p.a <= 0.0 {
        return Err(Error::InvalidArgument(
            "Lambda needs a > 0 (the factor a^((theta-2)/theta) degenerates)".into(),
        ));
    }
    let (d, cp2) = (p.d, cp * cp);
    Ok((d * p.chi * p.chi + d * d * cp2 * p.xi1 * p.xi1 + cp2 * p.xi2 * p.xi2 * z)
        / (2.0 * d * d * p.a.powf((p.theta - 2.0) / p.theta)))
}

fn require_logistic(p: &ModelParams) -> Result<()> {
    if !(p.a > 0.0 && p.mu > 0.0 && p.theta >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "needs a > 0, mu > 0 and theta >= 1 (got a={}, mu={}, theta={})",
            p.a, p.mu, p.theta
        )));
    }
    Ok(())
}

fn require_records(traj: &Trajectory) -> Result<()> {
    if traj.records.is_empty() {
        return Err(Error::InvalidArgument("trajectory has no records".into()));
    }
    Ok(())
}

/// `max_t ‖v‖∞` over the records.
pub fn measured_sup_v(traj: &Trajectory) -> Result<f64> {
    require_records(traj)?;
    Ok(traj.records.iter().map(|r| r.linf_v).fold(0.0, f64::max))
}

/// `max_t ‖∇w‖∞` over the records.
pub fn measured_sup_grad_w(traj: &Trajectory) -> Result<f64> {
    require_records(traj)?;
    Ok(traj.records.iter().map(|r| r.linf_grad_w).fold(0.0, f64::max))
}

/// `Λ(M₀²)^{θ/2}` with `M₀` the measured `sup ‖v‖∞`.
pub fn mu_threshold_from(p: &ModelParams, cp: f64, m0: f64) -> Result<f64> {
    require_logistic(p)?;
    Ok(lambda(p, cp, m0 * m0)?.powf(p.theta / 2.0))
}

pub fn empirical_mu_threshold(traj: &Trajectory, p: &ModelParams, cp: f64) -> Result<f64> {
    mu_threshold_from(p, cp, measured_sup_v(traj)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D0Check {
    /// Measured `sup ‖v‖∞`.
    pub a: f64,
    /// Measured `sup ‖∇w‖∞`.
    pub b: f64,
    pub value: f64,
    pub epsilon1: f64,
}

impl D0Check {
    pub fn passes(&self) -> bool {
        self.value >= 0.0
    }
}

/// `(d − (2+Aξ₂)²χ/(4ξ₁) − B²ξ₂²/4)·χ` from given suprema.
pub fn d0_check_from(p: &ModelParams, a: f64, b: f64) -> Result<D0Check> {
    if p.xi1 <= 0.0 {
        return Err(Error::InvalidArgument("the d0 check divides by xi1, which must be > 0".into()));
    }
    let pterm = (2.0 + a * p.xi2).powi(2) * p.chi / (4.0 * p.xi1);
    let qterm = b * b * p.xi2 * p.xi2 / 4.0;
    let value = (p.d - pterm - qterm) * p.chi;
    let epsilon1 = if value > 0.0 {
        0.5 * (p.d - pterm - qterm) / (p.d - pterm)
    } else {
        0.0
    };
    Ok(D0Check { a, b, value, epsilon1 })
}

pub fn empirical_d0_check(traj: &Trajectory, p: &ModelParams) -> Result<D0Check> {
    if p.a != 0.0 || p.mu != 0.0 {
        return Err(Error::InvalidArgument("the d0 check applies to a = mu = 0 only".into()));
    }
    d0_check_from(p, measured_sup_v(traj)?, measured_sup_grad_w(traj)?)
}

/// Decay-rate constant
/// `min{1, b^θ[μ − ((1 + Cp²ξ₂²M₀²/d)χ²/d + Cp²ξ₁²)/(2b^{θ−2})]}`.
pub fn sigma_rate(p: &ModelParams, cp: f64, m0: f64) -> Result<f64> {
    require_logistic(p)?;
    let b = p.equilibrium().expect("a, mu > 0");
    let cp2 = cp * cp;
    let correction = ((1.0 + cp2 * p.xi2 * p.xi2 * m0 * m0 / p.d) * p.chi * p.chi / p.d
        + cp2 * p.xi1 * p.xi1)
        / (2.0 * b.powf(p.theta - 2.0));
    let bracket = p.mu - correction;
    if !(bracket > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu = {} does not exceed the decay correction {correction}; outside the convergence regime",
            p.mu
        )));
    }
    Ok((b.powf(p.theta) * bracket).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regime {
    /// `ξ₁ ≥ ξ₀χ²`.
    R1,
    /// `θ = 1`, `μ ≥ max{1, χ^{(8+2n)/(5+n)}}μ₀χ^{2/(5+n)}`.
    R2,
    /// `θ > 1`, `μ > 0`.
    R3,
    Open,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::R1 => "R1",
            Regime::R2 => "R2",
            Regime::R3 => "R3",
            Regime::Open => "open",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    /// First satisfied condition in the order R1, R2, R3.
    pub label: Regime,
    pub satisfied: Vec<Regime>,
    /// `ξ₀χ²`.
    pub r1_xi_threshold: f64,
    /// `max{1, χ^{e₁}}μ₀χ^{e₂}`.
    pub r2_mu_threshold: f64,
    /// `e₁ = (8+2n)/(5+n)` as numerator and denominator.
    pub r2_exponent_max: (usize, usize),
    /// `e₂ = 2/(5+n)`.
    pub r2_exponent_chi: (usize, usize),
}

impl RegimeReport {
    pub fn exponent_string(&self) -> String {
        let (a, b) = self.r2_exponent_max;
        let (c, e) = self.r2_exponent_chi;
        format!("max{{1, chi^({a}/{b})}}*mu0*chi^({c}/{e})")
    }
}

fn reduced(num: usize, den: usize) -> (usize, usize) {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(num, den).max(1);
    (num / g, den / g)
}

pub fn condition_presets(p: &ModelParams, g: &GenericConstants) -> RegimeReport {
    let n = p.n_dim;
    let r1_xi_threshold = g.xi0 * p.chi * p.chi;
    let r2_mu_threshold = mu_regime_threshold(p, g);
    let mut satisfied = Vec::new();
    if p.xi1 >= r1_xi_threshold {
        satisfied.push(Regime::R1);
    }
    if p.theta == 1.0 && p.mu >= r2_mu_threshold {
        satisfied.push(Regime::R2);
    }
    if p.theta > 1.0 && p.mu > 0.0 {
        satisfied.push(Regime::R3);
    }
    RegimeReport {
        label: satisfied.first().copied().unwrap_or(Regime::Open),
        satisfied,
        r1_xi_threshold,
        r2_mu_threshold,
        r2_exponent_max: reduced(8 + 2 * n, 5 + n),
        r2_exponent_chi: reduced(2, 5 + n),
    }
}

/// Inputs that are not part of `ModelParams`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportInputs {
    pub u0_mass: f64,
    pub omega_measure: f64,
    pub convex: bool,
    /// Poincaré constant of the domain.
    pub cp: f64,
    pub constants: GenericConstants,
}

/// Every threshold quantity that is defined for the given parameters;
/// undefined ones are `None` and serialize as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub m1: f64,
    pub m0: Option<f64>,
    pub gradw_bound: Option<f64>,
    pub m1c: Option<f64>,
    pub m_mu: Option<f64>,
    pub lambda_of_z: Option<f64>,
    pub mu_threshold: Option<f64>,
    pub mu_passes: Option<bool>,
    pub empirical_a: Option<f64>,
    pub empirical_b: Option<f64>,
    pub d0_check_value: Option<f64>,
    pub d0_passes: Option<bool>,
    pub epsilon1: Option<f64>,
    pub sigma: Option<f64>,
    pub b: Option<f64>,
    pub cp: f64,
    pub regime: RegimeReport,
    pub constants: GenericConstants,
}

pub const REPORT_COLUMNS: [&str; 18] = [
    "m1",
    "M0",
    "gradw_bound",
    "M1c",
    "M_mu",
    "lambda_of_z",
    "mu_threshold",
    "mu_passes",
    "empirical_A",
    "empirical_B",
    "d0_check_value",
    "d0_passes",
    "epsilon1",
    "sigma",
    "b",
    "cp",
    "regime",
    "regime_satisfied",
];

impl ThresholdReport {
    pub fn evaluate(p: &ModelParams, inputs: &ReportInputs, traj: Option<&Trajectory>) -> Result<Self> {
        p.validate()?;
        inputs.constants.validate()?;
        let g = &inputs.constants;
        let m0 = structural_m0(p, g).ok();
        let m1c_value = m0.and_then(|m0| m1c(p, m0, g).ok()).map(|x| x.0);
        let gradw_bound = m0.and_then(|m0| structural_gradw_bound(p, m0, inputs.convex, g).ok());
        let m_mu = (p.mu > 0.0).then(|| m_mu(p, p.theta).ok()).flatten();

        let empirical_a = traj.and_then(|t| measured_sup_v(t).ok());
        let empirical_b = traj.and_then(|t| measured_sup_grad_w(t).ok());
        let lambda_of_z = empirical_a.and_then(|a| lambda(p, inputs.cp, a * a).ok());
        let mu_threshold = empirical_a.and_then(|a| mu_threshold_from(p, inputs.cp, a).ok());
        let sigma = empirical_a.and_then(|a| sigma_rate(p, inputs.cp, a).ok());
        let d0 = match (empirical_a, empirical_b) {
            (Some(a), Some(b)) if p.a == 0.0 && p.mu == 0.0 => d0_check_from(p, a, b).ok(),
            _ => None,
        };
        Ok(ThresholdReport {
            m1: compute_m1(inputs.u0_mass, p, inputs.omega_measure),
            m0,
            gradw_bound,
            m1c: m1c_value,
            m_mu,
            lambda_of_z,
            mu_threshold,
            mu_passes: mu_threshold.map(|t| p.mu > t),
            empirical_a,
            empirical_b,
            d0_check_value: d0.map(|d| d.value),
            d0_passes: d0.map(|d| d.passes()),
            epsilon1: d0.map(|d| d.epsilon1),
            sigma,
            b: p.equilibrium(),
            cp: inputs.cp,
            regime: condition_presets(p, g),
            constants: inputs.constants,
        })
    }

    fn values(&self) -> Vec<String> {
        let f = |x: Option<f64>| fmt_f64(x.unwrap_or(f64::NAN));
        let flag = |x: Option<bool>| x.map_or("NaN".to_string(), |b| b.to_string());
        let satisfied: Vec<String> = self.regime.satisfied.iter().map(|r| r.to_string()).collect();
        vec![
            fmt_f64(self.m1),
            f(self.m0),
            f(self.gradw_bound),
            f(self.m1c),
            f(self.m_mu),
            f(self.lambda_of_z),
            f(self.mu_threshold),
            flag(self.mu_passes),
            f(self.empirical_a),
            f(self.empirical_b),
            f(self.d0_check_value),
            flag(self.d0_passes),
            f(self.epsilon1),
            f(self.sigma),
            f(self.b),
            fmt_f64(self.cp),
            self.regime.label.to_string(),
            satisfied.join(";"),
        ]
    }

    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }

    /// `key=value` lines, preceded by comments naming the generic
    /// constants and the measured quantities.
    pub fn to_key_values(&self) -> String {
        let c = &self.constants;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# generic constants (not pinned, scaling shape only): K1={} K2={} C0={} xi0={} mu0={}",
            c.k1, c.k2, c.c0, c.xi0, c.mu0
        );
        let _ = writeln!(s, "# empirical_A and empirical_B are measured along the trajectory");
        for (k, v) in REPORT_COLUMNS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "regime_R2_threshold_form={}", self.regime.exponent_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_initial, run, InitialSpec, SolverConfig};
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn params() -> ModelParams {
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

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn m1_examples() {
        let p = params();
        assert_eq!(compute_m1(2.0, &p, 1.0), 2.0);
        let p = ModelParams { a: 1.0, mu: 1.0, ..p };
        assert!(close(compute_m1(2.0, &p, 1.0), 4.0, 1e-15));
        let p = ModelParams { mu: 1e12, ..p };
        assert!(close(compute_m1(2.0, &p, 1.0), 2.0, 1e-9));
    }

    #[test]
    fn m0_examples() {
        let g = GenericConstants::default();
        assert!(close(structural_m0(&params(), &g).unwrap(), 6.0, 1e-15));
        let big_d = ModelParams { d: 1e12, xi2: 2.0, ..params() };
        assert!(close(structural_m0(&big_d, &g).unwrap(), 1.5 * 3.0, 1e-9));
        assert!(structural_m0(&ModelParams { xi2: 0.0, ..params() }, &g).is_err());
        // mu = 1, theta = 1: (1 + 1 + 1)(1 + 1 + 1) = 9.
        let p = ModelParams { mu: 1.0, a: 1.0, ..params() };
        assert!(close(structural_m0(&p, &g).unwrap(), 9.0, 1e-15));
    }

    #[test]
    fn m0_non_increasing_in_d() {
        let g = GenericConstants::default();
        for n in 1..=3 {
            let mut last = f64::INFINITY;
            for k in 0..200 {
                let d = 0.01 * 1.07f64.powi(k);
                let m = structural_m0(&ModelParams { d, n_dim: n, xi2: 0.7, ..params() }, &g).unwrap();
                assert!(m <= last);
                last = m;
            }
        }
    }

    #[test]
    fn moser_m0_formula() {
        let g = GenericConstants { c0: 2.0, ..Default::default() };
        let p = ModelParams { xi2: 0.5, d: 4.0, n_dim: 2, ..params() };
        // lead = max{3 + 1, 2, 0.5} = 4; x = 1.5.
        let expect = 2.0 * 4.0 * (1.0 + 1.5 + 0.25 * 1.5 * 1.5);
        assert!(close(moser_m0(&p, 3.0, 1.0, 0.5, &g).unwrap(), expect, 1e-15));
    }

    #[test]
    fn gradw_bound_branches() {
        let g = GenericConstants::default();
        let p = ModelParams { chi: 0.5, xi1: 2.0, n_dim: 2, d: 2.0, ..params() };
        let (m, br) = m1c(&p, 3.0, &g).unwrap();
        assert_eq!((m, br), (2.0, M1cBranch::XiLarge));
        let convex = structural_gradw_bound(&p, 3.0, true, &g).unwrap();
        let expect = (1.0 + 0.5 * 0.25 / 3.0 + 2.0f64).powf(1.0 / 3.0);
        assert!(close(convex, expect, 1e-15));
        let nonconvex = structural_gradw_bound(&p, 3.0, false, &g).unwrap();
        let expect = (1.0 + (1.0 + 2.0 * 3.0f64.powi(6)) * 0.5 * 0.25 / 3.0 + 2.0f64).powf(1.0 / 3.0);
        assert!(close(nonconvex, expect, 1e-15));

        let low = ModelParams { xi1: 0.1, ..p };
        let err = structural_gradw_bound(&low, 3.0, true, &g).unwrap_err();
        assert!(err.to_string().contains("xi1 >= xi0*chi^2"));

        let lin = ModelParams { theta: 1.0, mu: 4.0, a: 1.0, ..p };
        let (m, br) = m1c(&lin, 3.0, &g).unwrap();
        assert_eq!(br, M1cBranch::MuLargeLinear);
        assert!(close(m, (1.0 + 2.0 * 0.25 + 0.25) * 0.25f64.powi(3), 1e-15));

        let sup = ModelParams { theta: 2.0, mu: 1.0, a: 1.0, ..p };
        let (m, br) = m1c(&sup, 3.0, &g).unwrap();
        assert_eq!(br, M1cBranch::Superlinear);
        let inner: f64 = (1.0 + 1.0 / 16.0) * (1.0 + 3.0) * 3.0 * 0.25;
        let expect = (1.0 + 2.0 + 1.0) + 1.0 * inner.powf(5.0);
        assert!(close(m, expect, 1e-14));

        let sub = ModelParams { theta: 0.5, mu: 1.0, a: 1.0, ..p };
        assert!(m1c(&sub, 3.0, &g).is_err());
    }

    #[test]
    fn lambda_examples() {
        let p = ModelParams { chi: 0.0, xi1: 0.0, xi2: 1.0, d: 1.0, theta: 2.0, a: 1.0, mu: 1.0, ..params() };
        let l = lambda(&p, 1.0 / PI, 4.0).unwrap();
        assert!(close(l, 2.0 / (PI * PI), 1e-15));
        assert!((l - 0.20264).abs() < 1e-5);
        let p2 = ModelParams { chi: 1.5, xi1: 0.0, a: 3.0, theta: 1.0, d: 2.0, ..p };
        let expect = 2.0 * 2.25 / (2.0 * 4.0 * 3.0f64.powf(-1.0));
        assert!(close(lambda(&p2, 0.3, 0.0).unwrap(), expect, 1e-15));
        let p3 = ModelParams { a: 7.0, ..p };
        assert!(close(lambda(&p3, 1.0 / PI, 4.0).unwrap(), l, 1e-15));
        assert!(lambda(&ModelParams { a: 0.0, ..p }, 1.0, 1.0).is_err());
    }

    #[test]
    fn mu_threshold_properties() {
        let p = ModelParams { chi: 0.0, xi1: 0.0, xi2: 0.0, a: 1.0, mu: 0.01, ..params() };
        assert_eq!(mu_threshold_from(&p, 0.3, 5.0).unwrap(), 0.0);
        let p = ModelParams { chi: 0.5, xi1: 0.5, xi2: 0.5, a: 1.0, mu: 1.0, ..params() };
        let mut last = 0.0;
        for k in 0..20 {
            let t = mu_threshold_from(&p, 1.0 / PI, k as f64 * 0.3).unwrap();
            assert!(t > last || k == 0);
            last = t;
        }
    }

    #[test]
    fn d0_check_examples() {
        let p = ModelParams { chi: 0.0, xi1: 1.0, ..params() };
        for d in [1e-3, 1.0, 100.0] {
            let c = d0_check_from(&ModelParams { d, ..p }, 3.0, 2.0).unwrap();
            assert!(c.passes());
            assert_eq!(c.epsilon1, 0.0);
        }
        let p = ModelParams { chi: 0.5, ..p };
        let mut last = f64::NEG_INFINITY;
        for k in 1..50 {
            let c = d0_check_from(&ModelParams { d: k as f64, ..p }, 1.0, 0.5).unwrap();
            assert!(c.value > last);
            last = c.value;
            if c.value > 0.0 {
                assert!(c.epsilon1 > 0.0 && c.epsilon1 <= 0.5);
            }
        }
        assert!(d0_check_from(&ModelParams { xi1: 0.0, ..p }, 1.0, 1.0).is_err());
    }

    #[test]
    fn sigma_examples() {
        let p = ModelParams { chi: 0.0, xi1: 0.0, xi2: 0.0, a: 1.0, mu: 1.0, theta: 1.0, ..params() };
        assert_eq!(sigma_rate(&p, 0.3, 2.0).unwrap(), 1.0);
        let p = ModelParams { chi: 1.0, xi1: 0.5, xi2: 0.5, a: 0.5, mu: 2.0, ..p };
        let s1 = sigma_rate(&p, 1.0 / PI, 1.0).unwrap();
        let s2 = sigma_rate(&ModelParams { mu: 4.0, ..p }, 1.0 / PI, 1.0).unwrap();
        assert!(s1 <= 1.0 && s2 <= 1.0);
        // With theta = 1 the bracket is mu − (const)·b/2 with b = a/mu.
        let bracket = |mu: f64| {
            let b = 0.5 / mu;
            mu - ((1.0 + 0.25 * 1.0 / (PI * PI)) + 0.25 / (PI * PI)) * b / 2.0
        };
        assert!(bracket(4.0) > bracket(2.0));
        assert!(close(s1, (0.25 * bracket(2.0)).min(1.0), 1e-14));
        let bad = ModelParams { chi: 10.0, mu: 0.1, a: 1.0, ..p };
        assert!(sigma_rate(&bad, 1.0, 10.0).is_err());
    }

    #[test]
    fn regime_labels() {
        let g = GenericConstants::default();
        let r = condition_presets(&ModelParams { chi: 2.0, xi1: 0.1, theta: 1.5, mu: 0.1, ..params() }, &g);
        assert_eq!(r.label, Regime::R3);
        let r = condition_presets(&ModelParams { chi: 1.0, xi1: 10.0, theta: 1.0, mu: 0.0, ..params() }, &g);
        assert_eq!(r.label, Regime::R1);
        assert_eq!(r.r2_exponent_max, (12, 7));
        assert_eq!(r.r2_exponent_chi, (2, 7));
        assert_eq!(r.exponent_string(), "max{1, chi^(12/7)}*mu0*chi^(2/7)");
        let r = condition_presets(&ModelParams { chi: 2.0, xi1: 0.1, theta: 1.0, mu: 0.1, ..params() }, &g);
        assert_eq!(r.label, Regime::Open);
        assert!(r.satisfied.is_empty());
        let r = condition_presets(
            &ModelParams { chi: 0.5, xi1: 1.0, theta: 1.0, mu: 5.0, a: 1.0, n_dim: 1, ..params() },
            &g,
        );
        assert_eq!(r.label, Regime::R1);
        assert_eq!(r.satisfied, vec![Regime::R1, Regime::R2]);
        assert_eq!(r.r2_exponent_max, (5, 3));
        assert_eq!(r.r2_exponent_chi, (1, 3));
    }

    #[test]
    fn report_serialization_and_reproducibility() {
        let grid = Grid::interval(1.0, 32).unwrap();
        let p = ModelParams { chi: 0.5, xi1: 0.5, xi2: 0.5, a: 1.0, mu: 1.0, theta: 1.0, d: 1.0, n_dim: 1 };
        let init = make_initial(&grid, &InitialSpec::cosine(1.0, 0.3)).unwrap();
        let cfg = SolverConfig { dt: 1e-2, t_end: 0.5, ..Default::default() };
        let traj = run(&init, &p, &cfg).unwrap();
        let inputs = ReportInputs {
            u0_mass: init.u.integrate(),
            omega_measure: 1.0,
            convex: true,
            cp: 1.0 / PI,
            constants: GenericConstants::default(),
        };
        let rep = ThresholdReport::evaluate(&p, &inputs, Some(&traj)).unwrap();
        let a = rep.empirical_a.unwrap();
        let hand = ((0.25 + 0.25 / (PI * PI) + 0.25 * a * a / (PI * PI)) / 2.0).powf(0.5);
        assert!(close(rep.mu_threshold.unwrap(), hand, 1e-12));
        assert_eq!(rep.mu_passes, Some(true));
        assert!(rep.d0_check_value.is_none());
        assert!(rep.sigma.unwrap() > 0.0 && rep.sigma.unwrap() <= 1.0);

        let header = ThresholdReport::csv_header();
        let row = rep.csv_row();
        assert_eq!(header.split(',').count(), row.split(',').count());
        let kv = rep.to_key_values();
        assert!(kv.contains("regime=R1"));
        assert!(kv.contains("d0_check_value=NaN"));
        let parsed: f64 = kv
            .lines()
            .find_map(|l| l.strip_prefix("mu_threshold="))
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(parsed, rep.mu_threshold.unwrap());
    }
}
