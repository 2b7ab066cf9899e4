//! Brute-force reference values on the joint state space, independent of the
//! information-state machinery.

use crate::belief::{belief_of, enumerate_joint, InformationState};
use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

/// Joint distribution of the arm states at the next decision.
struct JointModel<'a> {
    p: &'a [TransitionMatrix],
    rewards: &'a [Vec<f64>],
    states: Vec<Vec<usize>>,
}

impl<'a> JointModel<'a> {
    fn new(p: &'a [TransitionMatrix], rewards: &'a [Vec<f64>]) -> Self {
        let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
        JointModel { p, rewards, states: enumerate_joint(&sizes) }
    }

    fn observation_mass(&self, joint: &[f64], u: usize, y: usize) -> f64 {
        self.states.iter().zip(joint).filter(|(x, _)| x[u] == y).map(|(_, q)| q).sum()
    }

    /// Condition on x^u = y, then move every arm one step.
    fn posterior(&self, joint: &[f64], u: usize, y: usize) -> Vec<f64> {
        let mass = self.observation_mass(joint, u, y);
        let mut out = vec![0.0; joint.len()];
        for (a, xa) in self.states.iter().enumerate() {
            if xa[u] != y || joint[a] == 0.0 {
                continue;
            }
            for (b, xb) in self.states.iter().enumerate() {
                let t: f64 = (0..self.p.len()).map(|k| self.p[k].get(xa[k], xb[k])).product();
                out[b] += joint[a] / mass * t;
            }
        }
        out
    }

    fn n_obs(&self, u: usize) -> usize {
        self.rewards[u].len()
    }
}

/// Joint distribution at the first decision for `info0`.
pub fn initial_joint(p: &[TransitionMatrix], info0: &InformationState) -> Result<Vec<f64>> {
    belief_of(info0, p)?.joint(usize::MAX)
}

/// Expectimax over every action/observation history of length `horizon`.
pub fn brute_force_value(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    info0: &InformationState,
    horizon: u32,
) -> Result<f64> {
    let m = JointModel::new(p, rewards);
    let joint = initial_joint(p, info0)?;
    fn rec(m: &JointModel, joint: &[f64], h: u32) -> f64 {
        if h == 0 {
            return 0.0;
        }
        (0..m.p.len())
            .map(|u| {
                (0..m.n_obs(u))
                    .map(|y| {
                        let q = m.observation_mass(joint, u, y);
                        if q == 0.0 {
                            0.0
                        } else {
                            q * (m.rewards[u][y] + rec(m, &m.posterior(joint, u, y), h - 1))
                        }
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
    Ok(rec(&m, &joint, horizon))
}

/// Observation-contingent policy tree: an arm, then one subtree per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTree {
    pub arm: usize,
    pub children: Vec<PolicyTree>,
}

/// Every policy tree of the given depth.
pub fn enumerate_policy_trees(sizes: &[usize], depth: u32, cap: usize) -> Result<Vec<PolicyTree>> {
    if depth == 0 {
        return Ok(Vec::new());
    }
    let sub = enumerate_policy_trees(sizes, depth - 1, cap)?;
    let mut out = Vec::new();
    for (arm, &n) in sizes.iter().enumerate() {
        if depth == 1 {
            out.push(PolicyTree { arm, children: Vec::new() });
            continue;
        }
        let count = (sub.len() as f64).powi(n as i32);
        if count + out.len() as f64 > cap as f64 {
            return Err(Error::OracleTooLarge { needed: count as usize, cap });
        }
        let mut idx = vec![0usize; n];
        loop {
            out.push(PolicyTree { arm, children: idx.iter().map(|&i| sub[i].clone()).collect() });
            let mut j = 0;
            while j < n {
                idx[j] += 1;
                if idx[j] < sub.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
        }
    }
    Ok(out)
}

pub fn policy_tree_value(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    info0: &InformationState,
    tree: &PolicyTree,
) -> Result<f64> {
    let m = JointModel::new(p, rewards);
    fn rec(m: &JointModel, joint: &[f64], t: &PolicyTree) -> f64 {
        let u = t.arm;
        (0..m.n_obs(u))
            .map(|y| {
                let q = m.observation_mass(joint, u, y);
                if q == 0.0 {
                    return 0.0;
                }
                let cont = match t.children.get(y) {
                    Some(c) => rec(m, &m.posterior(joint, u, y), c),
                    None => 0.0,
                };
                q * (m.rewards[u][y] + cont)
            })
            .sum()
    }
    Ok(rec(&m, &initial_joint(p, info0)?, tree))
}

/// Best value over the literal enumeration of policy trees.
pub fn enumerate_best_tree(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    info0: &InformationState,
    horizon: u32,
    cap: usize,
) -> Result<f64> {
    let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
    let mut best = f64::NEG_INFINITY;
    for t in enumerate_policy_trees(&sizes, horizon, cap)? {
        best = best.max(policy_tree_value(p, rewards, info0, &t)?);
    }
    Ok(best)
}
