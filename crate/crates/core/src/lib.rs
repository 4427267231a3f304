//! Finite-volume solver and diagnostics for a chemotaxis model with an
//! attractant `v`, an elliptic repellent `w` and optional logistic source.
//!
//! * [`grid`]: uniform cell-centered grids, fields and Neumann operators.
//! * [`elliptic`]: the zero-mean Poisson solve for `w` and spectral data.
//! * [`dynamics`]: IMEX time stepping and trajectories.
//! * [`functionals`]: Lyapunov functionals, diagnostics and rate fits.
//! * [`interpolation`]: numerical checks of the gradient inequalities.
//! * [`thresholds`]: structural bounds and parameter thresholds.

// Negated comparisons are how NaN gets rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod interpolation;
mod linalg;
pub mod thresholds;

pub use dynamics::{
    make_initial, run, stable_dt, step, FluxScheme, InitialSpec, ModelParams, Profile, SimState,
    SolverConfig, Termination, Trajectory,
};
pub use elliptic::{elliptic_residual, solve_w, spectral_info, EllipticConfig, SpectralInfo};
pub use error::{Error, Result};
pub use functionals::{
    fit_decay_rate, lyap_f1, lyap_f2, relative_entropy, DeviationReference, DiagnosticsRecord,
    RateFit,
};
pub use grid::{fmt_f64, FaceFlux, Field, Grid};
pub use thresholds::{GenericConstants, ThresholdReport};
