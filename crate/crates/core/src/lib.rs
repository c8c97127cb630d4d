//! Replicator dynamics for Boltzmann Q-learning agents with strategies on `[0, 1]`.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod games;
pub mod grid;
pub mod io;
pub mod simulate;
pub mod steady;

pub use analytic::{
    scan_bifurcation, BifurcationDiagram, Branch, ExponentialFamilyFit, GameFamily, TruncatedGaussianFit,
};
pub use dynamics::{
    average_reward, evolve, evolve_with_frozen, replicator_rhs, Agent, InitProfile, ReplicatorState, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use games::{tabulate, GameSpec, PayoffKernel};
pub use grid::{entropy, free_energy, integrate, ks_distance, normalize, Density, Grid, LearningParams, Quadrature};
pub use simulate::{run_simulation, QTable, SimConfig, SimOutcome};
pub use steady::{gibbs_map, solve_steady, ParametricFit, SteadyOptions, SteadyStateResult};
