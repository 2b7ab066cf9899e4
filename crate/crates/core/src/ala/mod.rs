//! Adaptive learning algorithm and its finite-partition variant.

pub mod agent;
pub mod index;

pub use agent::{auto_tau0, AlaAgent, AlaConfig, TieBreak, Variant};
pub use index::{compute_indices, confidence_radius, IndexOrigin, IndexValue};
