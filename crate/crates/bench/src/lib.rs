//! Shared fixtures for the solver benchmarks.

use replicator_core::{tabulate, GameSpec, Grid, InitProfile, PayoffKernel, ReplicatorState};

/// Kernel of `game` on an `m`-node grid with the asymmetric initial pair.
pub fn fixture(game: &GameSpec, m: usize) -> (PayoffKernel, ReplicatorState) {
    let grid = Grid::new(m).expect("odd node count");
    let kernel = tabulate(game, grid).expect("valid game");
    (kernel, InitProfile::Asymmetric.state(grid, InitProfile::DEFAULT_TILT))
}
