//! Average reward optimality equation on a truncated information-state grid.

pub mod grid;
pub mod partition;
pub mod sandwich;
pub mod solver;

pub use grid::{BeliefGrid, Slot};
pub use partition::{build_partition, Partition, PartitionSet};
pub use sandwich::{check_finite_horizon_sandwich, SandwichReport};
pub use solver::{
    expected_reward, solve_instance, AroeModel, AroeSolution, SolvedAroe, SolverOptions, DEFAULT_GAP_TOL,
};
