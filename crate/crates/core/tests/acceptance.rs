use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rbandit::experiment::acceptance::*;
use rbandit::experiment::ExperimentConfig;

fn pinned() {
    assert_eq!((ORACLE_INSTANCES, ORACLE_HORIZON, ORACLE_TOL, ORACLE_SECONDS), (20, 6, 1e-9, 60.0));
    assert_eq!((GAIN_INSTANCES, GAIN_STEPS, GAIN_TOL, GAIN_SECONDS), (10, 1_000_000, 0.01, 300.0));
    assert_eq!((SANDWICH_INSTANCES, SANDWICH_MAX_T, SANDWICH_SLACK), (5, 8, 1e-6));
    assert_eq!(REGRET_HORIZONS, [500, 1000, 2000, 4000, 8000]);
    assert_eq!((REGRET_REPLICATES, REGRET_FIXED_L, REGRET_MIN_R2, REGRET_RATIO_SLACK), (50, 100.0, 0.9, 1.6));
    assert_eq!(REGRET_SECONDS, 1200.0);
    assert_eq!((ADAPTIVE_FACTOR, FP_HORIZON, FP_FACTOR), (3.0, 4000, 2.0));
    assert_eq!(CONCENTRATION_EPSILON, 0.1);
    assert!((CONCENTRATION_L - 3.0 / (2.0 * CONCENTRATION_EPSILON * CONCENTRATION_EPSILON)).abs() < 1e-9);
    assert_eq!((CONCENTRATION_RUNS, CONCENTRATION_HORIZON, CONCENTRATION_MIN_FRACTION), (200, 10_000, 0.95));
    assert_eq!(INEQUALITY_TRIALS, 100_000);
}

fn main() -> ExitCode {
    pinned();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance.json");
    let config = ExperimentConfig::load(&path).expect("acceptance config loads");
    assert_eq!(config.horizons, REGRET_HORIZONS.to_vec());
    assert_eq!(config.replicates, REGRET_REPLICATES);
    let work = tempfile::tempdir().expect("tempdir");
    let start = Instant::now();
    let all = run_acceptance_with(&config, work.path(), 0, |o| println!("{}", o.line())).expect("acceptance suite runs");
    let failed = all.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed in {:.1}s", all.len() - failed, all.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
