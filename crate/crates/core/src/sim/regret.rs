use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::oracle::{HorizonTable, DEFAULT_TABLE_CAP};
use super::run::RunRecord;
use crate::aroe::solver::SolvedAroe;
use crate::belief::{enumerate_joint, InformationState};
use crate::error::{Error, Result};
use crate::markov::BanditInstance;

pub const REGRET_CSV_HEADER: &str = "T,regret,mode,stderr,n_replicates";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretMode {
    /// Oracle value minus realized reward.
    Exact,
    /// Cumulative suboptimality gaps under the true model.
    Delta,
}

impl RegretMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegretMode::Exact => "exact",
            RegretMode::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub horizon: u32,
    pub regret: f64,
    pub stderr: f64,
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub policy: String,
    pub mode: RegretMode,
    pub points: Vec<RegretPoint>,
}

impl RegretReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REGRET_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{},{}", p.horizon, p.regret, self.mode.as_str(), p.stderr, p.n_replicates);
        }
        out
    }

    pub fn at(&self, horizon: u32) -> Option<&RegretPoint> {
        self.points.iter().find(|p| p.horizon == horizon)
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Oracle values from every post-initialization information state.
pub fn oracle_table(instance: &BanditInstance, horizons: &[u32]) -> Result<HorizonTable> {
    let queries: Vec<InformationState> = enumerate_joint(&instance.sizes())
        .into_iter()
        .map(|o| InformationState::after_initialization(&o))
        .collect();
    HorizonTable::compute(&instance.transitions(), &instance.rewards(), &queries, horizons, DEFAULT_TABLE_CAP)
}

/// V_T(info0) − reward through T, averaged over runs.
pub fn exact_regret(runs: &[RunRecord], table: &HorizonTable, horizons: &[u32]) -> Result<RegretReport> {
    let first = runs.first().ok_or_else(|| Error::NoData("no runs".into()))?;
    let mut points = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut xs = Vec::with_capacity(runs.len());
        for r in runs {
            if r.horizon() < h as usize {
                return Err(Error::Config(format!("run has horizon {}, probe needs {h}", r.horizon())));
            }
            let v = table
                .value_of(&r.initial_info(), h)
                .ok_or_else(|| Error::Config(format!("oracle table lacks horizon {h}")))?;
            xs.push(v - r.reward_through(h as usize));
        }
        let (m, se) = mean_stderr(&xs);
        points.push(RegretPoint { horizon: h, regret: m, stderr: se, n_replicates: runs.len() });
    }
    Ok(RegretReport { policy: first.policy.clone(), mode: RegretMode::Exact, points })
}

/// Cumulative Σ Δ(ψ_t, U_t) along one run, true-model beliefs.
pub fn delta_series(run: &RunRecord, solved: &SolvedAroe) -> Vec<f64> {
    let mut info = run.initial_info();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(run.horizon());
    for s in run.post_init() {
        acc += solved.suboptimality_gap(&info, s.arm);
        out.push(acc);
        info = info.advance(s.arm, s.observation);
    }
    out
}

pub fn delta_regret(runs: &[RunRecord], solved: &SolvedAroe, horizons: &[u32]) -> Result<RegretReport> {
    let first = runs.first().ok_or_else(|| Error::NoData("no runs".into()))?;
    let series: Vec<Vec<f64>> = runs.iter().map(|r| delta_series(r, solved)).collect();
    let mut points = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let xs: Vec<f64> = series
            .iter()
            .map(|s| s.get(h as usize - 1).copied().ok_or_else(|| Error::Config(format!("run shorter than {h}"))))
            .collect::<Result<_>>()?;
        let (m, se) = mean_stderr(&xs);
        points.push(RegretPoint { horizon: h, regret: m, stderr: se, n_replicates: runs.len() });
    }
    Ok(RegretReport { policy: first.policy.clone(), mode: RegretMode::Delta, points })
}

/// Regret at each probe horizon in the requested mode.
pub fn regret_curve(
    runs: &[RunRecord],
    instance: &BanditInstance,
    horizons: &[u32],
    mode: RegretMode,
    solved: Option<&SolvedAroe>,
) -> Result<RegretReport> {
    match mode {
        RegretMode::Exact => exact_regret(runs, &oracle_table(instance, horizons)?, horizons),
        RegretMode::Delta => {
            let s = solved.ok_or_else(|| Error::Config("delta regret needs a true-model solution".into()))?;
            delta_regret(runs, s, horizons)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aroe::solver::{solve_instance, SolverOptions};
    use crate::markov::{validate_instance, ArmSpec, InstanceSpec, ValidationMode};
    use crate::sim::baselines::{FixedArm, OraclePolicy};
    use crate::sim::run::simulate;

    #[test]
    fn oracle_policy_on_deterministic_instance() {
        let spec = InstanceSpec {
            arms: vec![
                ArmSpec { transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]], rewards: Some(vec![0.0, 1.0]), labels: None },
                ArmSpec {
                    transition: vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
                    rewards: Some(vec![0.2, 0.5, 0.9]),
                    labels: None,
                },
            ],
        };
        let inst = validate_instance(&spec, ValidationMode::Diagnostic).unwrap();
        let horizons = [1, 3, 6, 10];
        let runs: Vec<_> = (0..4)
            .map(|seed| {
                let mut p = OraclePolicy::new(&inst.transitions(), &inst.rewards(), 10).unwrap();
                simulate(&inst, &mut p, 10, seed).unwrap()
            })
            .collect();
        let rep = regret_curve(&runs, &inst, &horizons, RegretMode::Exact, None).unwrap();
        for p in &rep.points {
            assert!(p.regret.abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn single_arm_has_no_regret() {
        let inst = BanditInstance::from_parts(&[vec![vec![0.8, 0.2], vec![0.3, 0.7]]], &[vec![0.0, 1.0]]).unwrap();
        let solved = solve_instance(&inst.transitions(), &inst.rewards(), 4, &SolverOptions::default()).unwrap();
        let runs: Vec<_> = (0..3).map(|s| simulate(&inst, &mut FixedArm { arm: 0 }, 50, s).unwrap()).collect();
        let d = regret_curve(&runs, &inst, &[10, 50], RegretMode::Delta, Some(&solved)).unwrap();
        assert!(d.points.iter().all(|p| p.regret == 0.0));
        let e = regret_curve(&runs, &inst, &[10, 50], RegretMode::Exact, None).unwrap();
        // realized minus expected reward of the only policy: zero in expectation
        for p in &e.points {
            assert!(p.regret.abs() < 4.0 * p.stderr.max(0.2));
        }
    }

    #[test]
    fn optimal_actions_have_zero_delta() {
        let inst = BanditInstance::from_parts(
            &[vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.5, 0.5]]],
            &[vec![1.0, 1.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let solved = solve_instance(&inst.transitions(), &inst.rewards(), 4, &SolverOptions::default()).unwrap();
        let run = simulate(&inst, &mut FixedArm { arm: 0 }, 100, 1).unwrap();
        assert!(delta_series(&run, &solved).iter().all(|&x| x.abs() < 1e-9));
        let run = simulate(&inst, &mut FixedArm { arm: 1 }, 100, 1).unwrap();
        assert!((delta_series(&run, &solved)[99] - 100.0).abs() < 1e-6);
        assert!(matches!(regret_curve(&[run], &inst, &[10], RegretMode::Delta, None), Err(Error::Config(_))));
    }

    #[test]
    fn csv_header() {
        let rep = RegretReport {
            policy: "x".into(),
            mode: RegretMode::Delta,
            points: vec![RegretPoint { horizon: 5, regret: 1.5, stderr: 0.25, n_replicates: 3 }],
        };
        assert_eq!(rep.to_csv(), "T,regret,mode,stderr,n_replicates\n5,1.5,delta,0.25,3\n");
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-15);
    }
}
