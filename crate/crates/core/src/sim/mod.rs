//! Environment, exact oracle, regret and diagnostics.

pub mod baselines;
pub mod diagnostics;
pub mod env;
pub mod oracle;
pub mod regret;
pub mod run;
pub mod verify;

pub use diagnostics::{concentration_report, diagnostics, DiagnosticsReport};
pub use env::Environment;
pub use oracle::{finite_horizon_oracle, HorizonTable, MemoOracle, OracleOptions, OracleResult};
pub use regret::{regret_curve, RegretMode, RegretPoint, RegretReport};
pub use run::{simulate, simulate_in, Decision, Phase, Policy, RunRecord, StepRecord};
