use std::fmt::Write as _;

use crate::aroe::solver::SolvedAroe;
use crate::sim::oracle::HorizonTable;

/// Header for a K-armed solution table.
pub fn solution_header(k: usize) -> String {
    let mut h = String::from("point,state,g,h");
    for u in 0..k {
        let _ = write!(h, ",delta_{u}");
    }
    h
}

/// One row per grid point: description, gain, bias and the per-arm
/// suboptimality gaps of the AROE right-hand side.
pub fn solution_table(solved: &SolvedAroe) -> String {
    let grid = solved.grid();
    let k = solved.k();
    let g = solved.gain();
    let mut out = solution_header(k);
    out.push('\n');
    for p in 0..grid.len() {
        let v = solved.point_action_values(p);
        let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = write!(out, "{p},{},{g},{}", grid.describe(p), solved.solution.bias[p]);
        for x in &v {
            let _ = write!(out, ",{}", best - x);
        }
        out.push('\n');
    }
    out
}

pub const ORACLE_CSV_HEADER: &str = "s,tau,T,value";

/// Oracle values per query state and horizon; s and τ vectors are `|`-joined.
pub fn oracle_csv(table: &HorizonTable) -> String {
    let mut out = String::from(ORACLE_CSV_HEADER);
    out.push('\n');
    let join = |v: Vec<String>| v.join("|");
    for (q, info) in table.queries.iter().enumerate() {
        let s = join(info.s.iter().map(|x| x.to_string()).collect());
        let tau = join(info.tau.iter().map(|x| x.to_string()).collect());
        for (i, h) in table.horizons.iter().enumerate() {
            let _ = writeln!(out, "{s},{tau},{h},{}", table.values[i][q]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aroe::solver::{solve_instance, SolverOptions};
    use crate::markov::BanditInstance;
    use crate::sim::regret::oracle_table;

    #[test]
    fn dominant_arm_table() {
        let inst = BanditInstance::from_parts(
            &[vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.5, 0.5]]],
            &[vec![1.0, 1.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let s = solve_instance(&inst.transitions(), &inst.rewards(), 2, &SolverOptions::default()).unwrap();
        let csv = solution_table(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "point,state,g,h,delta_0,delta_1");
        assert_eq!(lines.len(), 1 + s.grid().len());
        for l in &lines[1..] {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 6);
            assert!((f[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
            assert!(f[4].parse::<f64>().unwrap().abs() < 1e-9);
            assert!((f[5].parse::<f64>().unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_rows() {
        let inst = BanditInstance::from_parts(&[vec![vec![0.5, 0.5], vec![0.5, 0.5]]], &[vec![0.0, 2.0]]).unwrap();
        let t = oracle_table(&inst, &[1, 3]).unwrap();
        assert_eq!(oracle_csv(&t), "s,tau,T,value\n0,1,1,1\n0,1,3,3\n1,1,1,1\n1,1,3,3\n");
    }
}
