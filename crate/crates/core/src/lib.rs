//! Learning in restless bandits with uncontrolled Markov arms.

pub mod ala;
pub mod aroe;
pub mod belief;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod markov;
pub mod sim;

pub use error::{Error, Result};
