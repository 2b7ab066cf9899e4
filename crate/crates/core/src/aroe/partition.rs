//! Finite partition of the information states: one set per grid point, with
//! centers, optimal sets at the centers, diameters and ε-membership tests.

use serde::{Deserialize, Serialize};

use super::grid::Slot;
use super::solver::{optimal_from_values, SolvedAroe};
use crate::belief::{belief_distance_capped, Belief, InformationState, JOINT_CAP};
use crate::error::Result;
use crate::markov::TransitionMatrix;

pub const DEFAULT_TAU_PROBE: u32 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Members {
    Singleton(InformationState),
    /// Arms listed are aggregated (τ > τ0).
    Aggregate { mixed: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSet {
    pub id: usize,
    pub vector: Vec<Slot>,
    pub members: Members,
    pub center: Belief,
    pub optimal_at_center: Vec<usize>,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub tau0: u32,
    pub epsilon: f64,
    pub sets: Vec<PartitionSet>,
    pub overlaps: Vec<(usize, usize)>,
}

impl Partition {
    pub fn has_overlap(&self) -> bool {
        !self.overlaps.is_empty()
    }

    /// ε-membership: exact for singletons, center distance plus diameter for
    /// aggregates.
    pub fn contains_belief(&self, id: usize, belief: &Belief, epsilon: f64) -> Result<bool> {
        let set = &self.sets[id];
        let d = belief_distance_capped(belief, &set.center, JOINT_CAP)?;
        Ok(d <= set.diameter + epsilon + 1e-12)
    }
}

/// L1 diameter of {row s of P^τ : τ0 < τ ≤ τ0 + probe} ∪ {π}.
pub fn arm_aggregate_diameter(p: &TransitionMatrix, pi: &[f64], tau0: u32, probe: u32) -> f64 {
    let mut q = p.pow(tau0 as u64 + 1);
    let mut pts: Vec<Vec<f64>> = vec![pi.to_vec()];
    for _ in 0..probe.max(1) {
        for s in 0..p.n() {
            pts.push(q.row(s).to_vec());
        }
        q = q.mul(p);
    }
    let mut diam: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).abs()).sum();
            diam = diam.max(d);
        }
    }
    diam
}

fn distance_lower_bound(a: &Belief, b: &Belief) -> f64 {
    if a.joint_size() <= JOINT_CAP {
        return belief_distance_capped(a, b, JOINT_CAP).expect("joint within cap");
    }
    a.marginals
        .iter()
        .zip(&b.marginals)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn build_partition(solved: &SolvedAroe, epsilon: f64, tau_probe: u32, gap_tol: f64) -> Result<Partition> {
    let grid = solved.grid();
    let model = &solved.model;
    let tau0 = grid.tau0();
    let arm_diam: Vec<f64> = (0..grid.k())
        .map(|k| arm_aggregate_diameter(&model.transitions()[k], model.powers().stationary(k), tau0, tau_probe))
        .collect();
    let sets: Vec<PartitionSet> = (0..grid.len())
        .map(|p| {
            let center = model.point_belief(p);
            let optimal_at_center = optimal_from_values(&solved.point_action_values(p), gap_tol);
            let (members, diameter) = match grid.point_info(p) {
                Some(info) => (Members::Singleton(info), 0.0),
                None => {
                    let mixed = grid.mixed_arms(p);
                    let d = mixed.iter().map(|&k| arm_diam[k]).sum::<f64>().min(2.0);
                    (Members::Aggregate { mixed }, d)
                }
            };
            PartitionSet { id: p, vector: grid.point(p).to_vec(), members, center, optimal_at_center, diameter }
        })
        .collect();
    let mut overlaps = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let d = distance_lower_bound(&sets[i].center, &sets[j].center);
            if d < sets[i].diameter + sets[j].diameter + 2.0 * epsilon {
                overlaps.push((i, j));
            }
        }
    }
    Ok(Partition { tau0, epsilon, sets, overlaps })
}

/// Members of an aggregate set with mixed-arm taus in (τ0, τ0 + probe].
pub fn aggregate_members(solved: &SolvedAroe, p: usize, probe: u32) -> Vec<InformationState> {
    let grid = solved.grid();
    let slots = grid.point(p);
    let tau0 = grid.tau0() as u64;
    let mut out = vec![InformationState { s: vec![0; slots.len()], tau: vec![0; slots.len()] }];
    for (k, slot) in slots.iter().enumerate() {
        let choices: Vec<(usize, u64)> = match *slot {
            Slot::Observed { state, tau } => vec![(state as usize, tau as u64)],
            Slot::Mixed => (tau0 + 1..=tau0 + probe as u64)
                .flat_map(|t| (0..grid.sizes()[k]).map(move |s| (s, t)))
                .collect(),
        };
        out = out
            .into_iter()
            .flat_map(|info| {
                choices.iter().map(move |&(s, t)| {
                    let mut n = info.clone();
                    n.s[k] = s;
                    n.tau[k] = t;
                    n
                })
            })
            .collect();
    }
    out.retain(|info| {
        let mut t = info.tau.clone();
        t.sort_unstable();
        t.windows(2).all(|w| w[0] != w[1])
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionProbe {
    pub members_checked: usize,
    /// (set id, member) where the member's optimal set is not inside O*(G_l).
    pub subset_violations: Vec<(usize, InformationState)>,
    /// Members with more than one optimal action.
    pub multiple_optimal: usize,
}

/// Samples member beliefs of every set and compares optimal sets with the center's.
pub fn probe_assumptions(solved: &SolvedAroe, partition: &Partition, probe: u32, gap_tol: f64) -> AssumptionProbe {
    let mut report = AssumptionProbe { members_checked: 0, subset_violations: Vec::new(), multiple_optimal: 0 };
    for set in &partition.sets {
        let members = match &set.members {
            Members::Singleton(info) => vec![info.clone()],
            Members::Aggregate { .. } => aggregate_members(solved, set.id, probe),
        };
        for m in members {
            let opt = solved.optimal_action_set(&m, gap_tol);
            report.members_checked += 1;
            if opt.len() > 1 {
                report.multiple_optimal += 1;
            }
            if !opt.iter().all(|u| set.optimal_at_center.contains(u)) {
                report.subset_violations.push((set.id, m));
            }
        }
    }
    report
}

/// Largest |h(member) − h(center)| over aggregate sets, members probed up to
/// `probe` steps past τ0.
pub fn aggregate_bias_variation(solved: &SolvedAroe, probe: u32) -> f64 {
    let grid = solved.grid();
    let mut worst: f64 = 0.0;
    for p in 0..grid.len() {
        if grid.is_singleton(p) {
            continue;
        }
        let hc = solved.solution.bias[p];
        for m in aggregate_members(solved, p, probe) {
            worst = worst.max((solved.bias_at(&m) - hc).abs());
        }
    }
    worst
}
