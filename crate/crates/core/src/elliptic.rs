//! The constrained Neumann Poisson problem `−Δw = u − ū`, `∫w = 0`, and the
//! spectral constants of the discrete Neumann Laplacian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{apply_laplacian, dot, Field, Grid};
use crate::linalg::{conjugate_gradient, remove_mean};

/// Guards the relative residual when `u` is (numerically) constant.
pub const RESIDUAL_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticConfig {
    /// Relative residual target, in `(0, 1e-4]`.
    pub tolerance: f64,
    /// Iteration budget; `None` means ten times the number of cells.
    pub max_iterations: Option<usize>,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        EllipticConfig {
            tolerance: 1e-10,
            max_iterations: None,
        }
    }
}

impl EllipticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-4) {
            return Err(Error::InvalidArgument(format!(
                "elliptic tolerance must lie in (0, 1e-4], got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument(
                "elliptic max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn budget(&self, grid: &Grid) -> usize {
        self.max_iterations.unwrap_or(10 * grid.len())
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub w: Field,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `−Δw = u − ū` with `∫w = 0`.
pub fn solve_w(u: &Field, cfg: &EllipticConfig) -> Result<Field> {
    solve_w_from(u, None, cfg).map(|s| s.w)
}

/// Same as [`solve_w`], starting the iteration from `guess` (typically the
/// previous time step's `w`).
pub fn solve_w_from(
    u: &Field,
    guess: Option<&Field>,
    cfg: &EllipticConfig,
) -> Result<EllipticSolution> {
    cfg.validate()?;
    if !u.is_finite() {
        return Err(Error::InvalidArgument(
            "solve_w needs a finite right-hand side".into(),
        ));
    }
    let grid = *u.grid();
    let mut rhs = u.values().to_vec();
    remove_mean(&mut rhs);
    let mut x = match guess {
        Some(g) if g.grid() == &grid => g.values().to_vec(),
        _ => vec![0.0; grid.len()],
    };
    let neg_lap = |a: &[f64], out: &mut [f64]| {
        apply_laplacian(&grid, a, out);
        out.iter_mut().for_each(|v| *v = -*v);
    };
    let outcome = conjugate_gradient(
        neg_lap,
        &rhs,
        &mut x,
        cfg.tolerance,
        cfg.budget(&grid),
        true,
        RESIDUAL_FLOOR,
    )
    .map_err(|o| Error::NotConverged {
        what: "elliptic solve",
        iterations: o.iterations,
        residual: o.residual,
    })?;
    Ok(EllipticSolution {
        w: Field::new(grid, x)?,
        residual: outcome.residual,
        iterations: outcome.iterations,
    })
}

/// `‖Δw + u − ū‖₂ / max(‖u − ū‖₂, floor)`.
pub fn elliptic_residual(u: &Field, w: &Field) -> f64 {
    let grid = u.grid();
    let mut lap = vec![0.0; grid.len()];
    apply_laplacian(grid, w.values(), &mut lap);
    let ubar = u.mean();
    let mut num = 0.0;
    let mut den = 0.0;
    for (l, uv) in lap.iter().zip(u.values()) {
        let dev = uv - ubar;
        num += (l + dev) * (l + dev);
        den += dev * dev;
    }
    num.sqrt() / den.sqrt().max(RESIDUAL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    /// First nonzero eigenvalue of the discrete Neumann `−Δ`.
    pub lambda1: f64,
    /// Poincaré constant `λ₁^{-1/2}`.
    pub poincare_cp: f64,
}

const SPECTRAL_MAX_SWEEPS: usize = 1000;

/// Inverse power iteration on the zero-mean subspace.
pub fn spectral_info(grid: &Grid, cfg: &EllipticConfig) -> Result<SpectralInfo> {
    cfg.validate()?;
    let n = grid.len();
    let neg_lap = |a: &[f64], out: &mut [f64]| {
        apply_laplacian(grid, a, out);
        out.iter_mut().for_each(|v| *v = -*v);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    remove_mean(&mut x);
    normalize(&mut x);

    let mut ax = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut lambda = f64::NAN;
    for _ in 0..SPECTRAL_MAX_SWEEPS {
        conjugate_gradient(
            neg_lap,
            &x,
            &mut y,
            cfg.tolerance,
            cfg.budget(grid),
            true,
            RESIDUAL_FLOOR,
        )
        .map_err(|o| Error::NotConverged {
            what: "inverse iteration solve",
            iterations: o.iterations,
            residual: o.residual,
        })?;
        x.copy_from_slice(&y);
        remove_mean(&mut x);
        normalize(&mut x);

        neg_lap(&x, &mut ax);
        lambda = dot(&x, &ax);
        let resid: f64 = ax
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= 1e-8 * lambda {
            return Ok(SpectralInfo {
                lambda1: lambda,
                poincare_cp: lambda.powf(-0.5),
            });
        }
    }
    Err(Error::NotConverged {
        what: "inverse power iteration",
        iterations: SPECTRAL_MAX_SWEEPS,
        residual: lambda,
    })
}

fn normalize(x: &mut [f64]) {
    let s = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= s);
}
