use serde::{Deserialize, Serialize};

use super::solver::SolvedAroe;
use crate::error::Result;
use crate::sim::oracle::{MemoOracle, OracleOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub horizon: u32,
    /// min over points of (h_T − T g) − (h − sup h)
    pub lower_margin: f64,
    /// min over points of (h − inf h) − (h_T − T g)
    pub upper_margin: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub slack: f64,
    pub rows: Vec<SandwichRow>,
    /// Same margins with exact dynamics from the singleton points.
    pub exact_rows: Vec<SandwichRow>,
}

impl SandwichReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }
}

/// Checks h − sup h ≤ h_T − T g ≤ h − inf h at every grid point for T = 1..=max_t.
pub fn check_finite_horizon_sandwich(solved: &SolvedAroe, max_t: u32, slack: f64) -> Result<SandwichReport> {
    let grid = solved.grid();
    let model = &solved.model;
    let h = &solved.solution.bias;
    let g = solved.gain();
    let sup = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = h.iter().copied().fold(f64::INFINITY, f64::min);
    let hint = grid.tau0() as u64 + max_t as u64 + 1;
    let closed = OracleOptions { closure: Some(grid.tau0()), keep_policy: false, ..Default::default() };
    let open = OracleOptions { closure: None, keep_policy: false, ..Default::default() };
    let mut grid_oracle = MemoOracle::new(model.transitions(), model.rewards(), hint, closed)?;
    let mut exact_oracle = MemoOracle::new(model.transitions(), model.rewards(), hint, open)?;
    let mut rows = Vec::new();
    let mut exact_rows = Vec::new();
    for t in 1..=max_t {
        let mut row = SandwichRow { horizon: t, lower_margin: f64::INFINITY, upper_margin: f64::INFINITY, violations: 0 };
        let mut exact = row.clone();
        for p in 0..grid.len() {
            let lo = h[p] - sup;
            let hi = h[p] - inf;
            let v = grid_oracle.value(grid.point(p), t)? - t as f64 * g;
            row.lower_margin = row.lower_margin.min(v - lo);
            row.upper_margin = row.upper_margin.min(hi - v);
            if v < lo - slack || v > hi + slack {
                row.violations += 1;
            }
            if grid.is_singleton(p) {
                let v = exact_oracle.value(grid.point(p), t)? - t as f64 * g;
                exact.lower_margin = exact.lower_margin.min(v - lo);
                exact.upper_margin = exact.upper_margin.min(hi - v);
                if v < lo - slack || v > hi + slack {
                    exact.violations += 1;
                }
            }
        }
        rows.push(row);
        exact_rows.push(exact);
    }
    Ok(SandwichReport { slack, rows, exact_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aroe::solver::{solve_instance, SolverOptions};
    use crate::markov::{random_instance, BanditInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_instance_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = random_instance(&[2, 2], 0.05, &mut rng);
        let s = solve_instance(&inst.transitions(), &inst.rewards(), 4, &SolverOptions::default()).unwrap();
        let rep = check_finite_horizon_sandwich(&s, 8, 1e-6).unwrap();
        assert_eq!(rep.rows.len(), 8);
        assert_eq!(rep.violations(), 0);
    }

    #[test]
    fn constant_rewards_bracket_zero() {
        let inst = BanditInstance::from_parts(
            &[vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.5, 0.5]]],
            &[vec![3.0, 3.0], vec![3.0, 3.0]],
        )
        .unwrap();
        let s = solve_instance(&inst.transitions(), &inst.rewards(), 3, &SolverOptions::default()).unwrap();
        let rep = check_finite_horizon_sandwich(&s, 5, 1e-9).unwrap();
        for r in &rep.rows {
            assert!(r.lower_margin.abs() < 1e-9 && r.upper_margin.abs() < 1e-9);
        }
    }
}
