//! Numerical checks of three gradient interpolation inequalities on smooth
//! Neumann test functions, for `p ≥ 1` in dimension `n`:
//!
//! ```text
//! (1) |∫|∇g|^{2p−2}∇g·(D²g∇h + D²h∇g)|
//!         ≤ (√n/2p + 1) ‖∇g‖^{2p}_{2(p+1)} ‖D²h‖_{p+1}
//! (2) |∫ gΔh ∇·(|∇g|^{2p−2}∇g)|
//!         ≤ (2(p−1) + √n) ‖g‖∞ ‖∇g‖^{p−1}_{2(p+1)} ‖Δh‖_{p+1}
//!           (∫|∇g|^{2p−2}|D²g|²)^{1/2}
//! (3) ∫|∇g|^{2(p+1)} ≤ (2p + √n)² ‖g‖∞² ∫|∇g|^{2(p−1)}|D²g|²
//! ```
//!
//! Test functions are finite sums of products `cos(kπx/L)`, so derivatives
//! are exact; integrals use the midpoint rule on the grid cells.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, Grid};

/// Highest wavenumber per axis in the random family.
const MAX_MODE: usize = 3;

/// `Σ c·cos(kₓπx/Lₓ)cos(k_yπy/L_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSum {
    lengths: [f64; 2],
    terms: Vec<([usize; 2], f64)>,
}

struct Jet {
    value: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

impl CosineSum {
    pub fn new(grid: &Grid, terms: Vec<([usize; 2], f64)>) -> Self {
        let mut lengths = [1.0; 2];
        lengths[..grid.dim()].copy_from_slice(grid.lengths());
        let terms = terms
            .into_iter()
            .map(|(k, c)| if grid.dim() == 1 { ([k[0], 0], c) } else { (k, c) })
            .collect();
        CosineSum { lengths, terms }
    }

    fn jet(&self, x: [f64; 2]) -> Jet {
        let mut j = Jet {
            value: 0.0,
            grad: [0.0; 2],
            hess: [[0.0; 2]; 2],
        };
        for &(k, c) in &self.terms {
            let w = [
                k[0] as f64 * std::f64::consts::PI / self.lengths[0],
                k[1] as f64 * std::f64::consts::PI / self.lengths[1],
            ];
            let (sx, cx) = (w[0] * x[0]).sin_cos();
            let (sy, cy) = (w[1] * x[1]).sin_cos();
            j.value += c * cx * cy;
            j.grad[0] -= c * w[0] * sx * cy;
            j.grad[1] -= c * w[1] * cx * sy;
            j.hess[0][0] -= c * w[0] * w[0] * cx * cy;
            j.hess[1][1] -= c * w[1] * w[1] * cx * cy;
            j.hess[0][1] += c * w[0] * w[1] * sx * sy;
        }
        j.hess[1][0] = j.hess[0][1];
        j
    }
}

/// The pair `(g, h)` selected by `test_id`: 0 is a constant `g`, 1 is
/// `g = h = cos(πx/L)` along the first axis, larger ids draw random
/// coefficients on modes up to 3 per axis.
pub fn test_pair(grid: &Grid, test_id: u64) -> (CosineSum, CosineSum) {
    let first = CosineSum::new(grid, vec![([1, 0], 1.0)]);
    match test_id {
        0 => (CosineSum::new(grid, vec![([0, 0], 1.0)]), first),
        1 => (first.clone(), first),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(test_id);
            let ky_max = if grid.dim() == 2 { MAX_MODE } else { 0 };
            let draw = |rng: &mut ChaCha8Rng| {
                let mut terms = Vec::new();
                for kx in 0..=MAX_MODE {
                    for ky in 0..=ky_max {
                        if rng.gen_bool(0.6) {
                            terms.push(([kx, ky], rng.gen_range(-1.0..1.0)));
                        }
                    }
                }
                if terms.iter().all(|(k, _)| *k == [0, 0]) {
                    terms.push(([1, 0], rng.gen_range(0.5..1.0)));
                }
                CosineSum::new(grid, terms)
            };
            let g = draw(&mut rng);
            let h = draw(&mut rng);
            (g, h)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    Inter1,
    Inter2,
    Inter3,
}

impl std::fmt::Display for Inequality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Inequality::Inter1 => "inter-1",
            Inequality::Inter2 => "inter-2",
            Inequality::Inter3 => "inter-3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub test_id: u64,
    pub p: f64,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    /// Relative quadrature allowance, `5h`.
    pub tolerance: f64,
}

impl InequalityCheck {
    /// `rhs·(1 + tolerance) − lhs`.
    pub fn margin(&self) -> f64 {
        self.rhs * (1.0 + self.tolerance) - self.lhs
    }

    pub fn pass(&self) -> bool {
        self.margin() >= 0.0
    }
}

fn frob2(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum()
}

fn matvec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Evaluates both sides of the three inequalities for one pair.
pub fn check_pair(grid: &Grid, g: &CosineSum, h: &CosineSum, p: f64, test_id: u64) -> Result<[InequalityCheck; 3]> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let n = grid.dim() as f64;
    let vol = grid.cell_volume();
    let (mut i1, mut i2) = (0.0, 0.0);
    let (mut grad_pow, mut hess_h_pow, mut lap_h_pow, mut weighted_hess, mut g_sup) =
        (0.0, 0.0, 0.0, 0.0, 0.0f64);
    for idx in 0..grid.len() {
        let x = grid.cell_center(idx);
        let gj = g.jet(x);
        let hj = h.jet(x);
        let ng2 = dot2(gj.grad, gj.grad);
        let ng = ng2.sqrt();
        let w = ng.powf(2.0 * p - 2.0);
        let lap_g = gj.hess[0][0] + gj.hess[1][1];
        let lap_h = hj.hess[0][0] + hj.hess[1][1];

        let a = matvec(&gj.hess, hj.grad);
        let b = matvec(&hj.hess, gj.grad);
        i1 += w * dot2(gj.grad, [a[0] + b[0], a[1] + b[1]]);

        let quad = dot2(gj.grad, matvec(&gj.hess, gj.grad));
        let second = if ng2 > 0.0 {
            (2.0 * p - 2.0) * w * quad / ng2
        } else {
            0.0
        };
        i2 += gj.value * lap_h * (w * lap_g + second);

        grad_pow += ng.powf(2.0 * p + 2.0);
        hess_h_pow += frob2(&hj.hess).sqrt().powf(p + 1.0);
        lap_h_pow += lap_h.abs().powf(p + 1.0);
        weighted_hess += w * frob2(&gj.hess);
        g_sup = g_sup.max(gj.value.abs());
    }
    let (i1, i2) = (i1 * vol, i2 * vol);
    let (grad_pow, hess_h_pow, lap_h_pow, weighted_hess) = (
        grad_pow * vol,
        hess_h_pow * vol,
        lap_h_pow * vol,
        weighted_hess * vol,
    );
    let tolerance = 5.0 * grid.max_spacing();
    let check = |inequality, lhs: f64, rhs: f64| InequalityCheck {
        test_id,
        p,
        inequality,
        lhs,
        rhs,
        tolerance,
    };
    let q = 2.0 * p + 2.0;
    Ok([
        check(
            Inequality::Inter1,
            i1.abs(),
            (n.sqrt() / (2.0 * p) + 1.0) * grad_pow.powf(2.0 * p / q) * hess_h_pow.powf(1.0 / (p + 1.0)),
        ),
        check(
            Inequality::Inter2,
            i2.abs(),
            (2.0 * (p - 1.0) + n.sqrt())
                * g_sup
                * grad_pow.powf((p - 1.0) / q)
                * lap_h_pow.powf(1.0 / (p + 1.0))
                * weighted_hess.sqrt(),
        ),
        check(
            Inequality::Inter3,
            grad_pow,
            (2.0 * p + n.sqrt()).powi(2) * g_sup * g_sup * weighted_hess,
        ),
    ])
}

/// Runs the three inequalities on the pair selected by `test_id`.
pub fn verify_interpolation(grid: &Grid, test_id: u64, p: f64) -> Result<[InequalityCheck; 3]> {
    let (g, h) = test_pair(grid, test_id);
    check_pair(grid, &g, &h, p, test_id)
}

pub fn write_inequality_csv<W: Write>(checks: &[InequalityCheck], mut w: W) -> Result<()> {
    writeln!(w, "test_id,p,inequality,lhs,rhs,margin,pass")?;
    for c in checks {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            c.test_id,
            fmt_f64(c.p),
            c.inequality,
            fmt_f64(c.lhs),
            fmt_f64(c.rhs),
            fmt_f64(c.margin()),
            c.pass()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_cosine() {
        let g = Grid::interval(1.0, 512).unwrap();
        let [_, _, c3] = verify_interpolation(&g, 1, 1.0).unwrap();
        let pi4 = PI.powi(4);
        assert!((c3.lhs - 3.0 * pi4 / 8.0).abs() < 1e-10 * pi4);
        assert!((c3.rhs - 9.0 * pi4 / 2.0).abs() < 1e-4 * pi4);
        assert!(c3.pass());
    }

    #[test]
    fn constant_g_is_trivial() {
        let g = Grid::rectangle(1.0, 1.0, 16, 16).unwrap();
        for c in verify_interpolation(&g, 0, 2.0).unwrap() {
            assert_eq!(c.lhs, 0.0);
            assert!(c.pass());
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let g = Grid::rectangle(1.0, 2.0, 8, 8).unwrap();
        let (f, _) = test_pair(&g, 7);
        let x = [0.31, 1.17];
        let e = 1e-5;
        let j = f.jet(x);
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += e;
            xm[a] -= e;
            let fd = (f.jet(xp).value - f.jet(xm).value) / (2.0 * e);
            assert!((fd - j.grad[a]).abs() < 1e-6);
            for b in 0..2 {
                let fd = (f.jet(xp).grad[b] - f.jet(xm).grad[b]) / (2.0 * e);
                assert!((fd - j.hess[a][b]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn rejects_small_p() {
        let g = Grid::interval(1.0, 8).unwrap();
        assert!(verify_interpolation(&g, 1, 0.5).is_err());
    }

    #[test]
    fn battery_passes() {
        for dim in [1, 2] {
            let g = if dim == 1 {
                Grid::interval(1.0, 256).unwrap()
            } else {
                Grid::rectangle(1.0, 1.0, 64, 64).unwrap()
            };
            for id in 0..20 {
                for &p in &[1.0, 1.5, 2.0, 3.0] {
                    for c in verify_interpolation(&g, id, p).unwrap() {
                        assert!(c.pass(), "{dim}d id={id} p={p} {}: {} > {}", c.inequality, c.lhs, c.rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn csv_report_format() {
        let g = Grid::interval(1.0, 16).unwrap();
        let checks = verify_interpolation(&g, 1, 1.0).unwrap();
        let mut out = Vec::new();
        write_inequality_csv(&checks, &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "test_id,p,inequality,lhs,rhs,margin,pass");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("1,1.0000000000000000e0,inter-3,"));
        assert!(lines[3].ends_with(",true"));
    }
}
