//! Fixtures shared by the criterion benches.

use angio_core::{make_initial, Grid, InitialSpec, ModelParams, Profile, SimState};

/// A square grid with `n` cells per side (`dim = 2`) or an interval.
pub fn grid(dim: usize, n: usize) -> Grid {
    if dim == 1 {
        Grid::interval(1.0, n).expect("valid interval")
    } else {
        Grid::rectangle(1.0, 1.0, n, n).expect("valid rectangle")
    }
}

/// Seeded random positive initial state.
pub fn state(grid: &Grid) -> SimState {
    let spec = InitialSpec {
        profile: Profile::RandomPositive,
        amplitude: 0.3,
        v_amplitude: 0.2,
        seed: 1,
        ..Default::default()
    };
    make_initial(grid, &spec).expect("positive initial data")
}

pub fn params(n_dim: usize) -> ModelParams {
    ModelParams {
        chi: 0.5,
        xi1: 0.5,
        xi2: 0.5,
        d: 1.0,
        a: 1.0,
        mu: 1.0,
        theta: 1.0,
        n_dim,
    }
}
