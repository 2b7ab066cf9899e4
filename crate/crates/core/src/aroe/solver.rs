use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{BeliefGrid, Slot};
use crate::belief::{Belief, InformationState, PowerTable};
use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// r̄(ψ, u) = Σ_x reward(x) ψ^u_x.
pub fn expected_reward(belief: &Belief, u: usize, rewards: &[Vec<f64>]) -> f64 {
    belief.marginals[u].iter().zip(&rewards[u]).map(|(p, r)| p * r).sum()
}

/// Grid plus the per-model tables the operator F needs.
#[derive(Debug, Clone)]
pub struct AroeModel {
    grid: Arc<BeliefGrid>,
    powers: PowerTable,
    rewards: Vec<Vec<f64>>,
    probs: Vec<f64>,
    rbar: Vec<f64>,
    positive: bool,
}

impl AroeModel {
    pub fn new(grid: Arc<BeliefGrid>, p: &[TransitionMatrix], rewards: &[Vec<f64>]) -> Result<Self> {
        let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
        if sizes != grid.sizes() || rewards.len() != sizes.len() {
            return Err(Error::Domain("model shape does not match grid".into()));
        }
        for (r, &n) in rewards.iter().zip(&sizes) {
            if r.len() != n {
                return Err(Error::Domain("reward vector length mismatch".into()));
            }
        }
        let powers = PowerTable::new(p, grid.tau0() as u64 + 1)?;
        let k = sizes.len();
        let stride = grid.stride();
        let mut probs = vec![0.0; grid.len() * stride];
        let mut rbar = vec![0.0; grid.len() * k];
        for (pt, slots) in grid.points().iter().enumerate() {
            for (u, slot) in slots.iter().enumerate() {
                let m = slot_marginal(&powers, u, *slot);
                let off = pt * stride + grid.arm_offset(u);
                probs[off..off + sizes[u]].copy_from_slice(&m);
                rbar[pt * k + u] = m.iter().zip(&rewards[u]).map(|(a, b)| a * b).sum();
            }
        }
        let positive = p.iter().all(|m| m.strictly_positive());
        Ok(AroeModel { grid, powers, rewards: rewards.to_vec(), probs, rbar, positive })
    }

    pub fn grid(&self) -> &BeliefGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<BeliefGrid> {
        &self.grid
    }

    pub fn transitions(&self) -> &[TransitionMatrix] {
        self.powers.transitions()
    }

    pub fn powers(&self) -> &PowerTable {
        &self.powers
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn positive(&self) -> bool {
        self.positive
    }

    pub fn k(&self) -> usize {
        self.grid.k()
    }

    /// Marginal of arm u at grid point p.
    pub fn point_marginal(&self, p: usize, u: usize) -> &[f64] {
        let off = p * self.grid.stride() + self.grid.arm_offset(u);
        &self.probs[off..off + self.grid.sizes()[u]]
    }

    pub fn point_belief(&self, p: usize) -> Belief {
        Belief {
            marginals: (0..self.k()).map(|u| self.point_marginal(p, u).to_vec()).collect(),
        }
    }

    pub fn point_reward(&self, p: usize, u: usize) -> f64 {
        self.rbar[p * self.k() + u]
    }

    pub fn belief_of(&self, info: &InformationState) -> Belief {
        self.powers.belief_of(info)
    }

    /// max_u { r̄ + Σ_y ψ^u_y v(succ) } at grid point p.
    fn backup(&self, p: usize, v: &[f64]) -> f64 {
        let k = self.k();
        let stride = self.grid.stride();
        let succ = self.grid.successors();
        let base = p * stride;
        let mut best = f64::NEG_INFINITY;
        for u in 0..k {
            let off = base + self.grid.arm_offset(u);
            let mut val = self.rbar[p * k + u];
            for y in 0..self.grid.sizes()[u] {
                val += self.probs[off + y] * v[succ[off + y] as usize];
            }
            if val > best {
                best = val;
            }
        }
        best
    }
}

fn slot_marginal(powers: &PowerTable, arm: usize, slot: Slot) -> Vec<f64> {
    match slot {
        Slot::Observed { state, tau } => powers.row(arm, state as usize, tau as u64),
        Slot::Mixed => powers.stationary(arm).to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Solve even when some entry of P is zero.
    pub allow_nonpositive: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, allow_nonpositive: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AroeSolution {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub span_residual: f64,
    pub reference_point: usize,
    pub span_history: Vec<f64>,
    pub last_diff_range: (f64, f64),
    pub assumption_override: bool,
}

impl AroeSolution {
    pub fn bias_span(&self) -> f64 {
        let max = self.bias.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.bias.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Relative value iteration with span stopping.
pub fn value_iterate(model: &AroeModel, opts: &SolverOptions, warm: Option<&[f64]>) -> Result<AroeSolution> {
    if !model.positive && !opts.allow_nonpositive {
        return Err(Error::Config(
            "transition matrices have zero entries; set allow_nonpositive to solve anyway".into(),
        ));
    }
    let n = model.grid.len();
    let reference = model.grid.reference();
    let mut v = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![0.0; n],
    };
    let mut w = vec![0.0; n];
    let mut history = Vec::new();
    for iter in 1..=opts.max_iters {
        let mut mx = f64::NEG_INFINITY;
        let mut mn = f64::INFINITY;
        for (p, slot) in w.iter_mut().enumerate() {
            let val = model.backup(p, &v);
            let d = val - v[p];
            mx = mx.max(d);
            mn = mn.min(d);
            *slot = val;
        }
        let span = mx - mn;
        history.push(span);
        let shift = w[reference];
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi - shift;
        }
        if span <= opts.tol {
            return Ok(AroeSolution {
                gain: 0.5 * (mx + mn),
                bias: v,
                iterations: iter,
                span_residual: span,
                reference_point: reference,
                span_history: history,
                last_diff_range: (mn, mx),
                assumption_override: !model.positive,
            });
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iters,
        last_span: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Model and its solution, with evaluation of action values at arbitrary
/// information states.
#[derive(Debug, Clone)]
pub struct SolvedAroe {
    pub model: AroeModel,
    pub solution: AroeSolution,
}

impl SolvedAroe {
    pub fn solve(model: AroeModel, opts: &SolverOptions) -> Result<Self> {
        let solution = value_iterate(&model, opts, None)?;
        Ok(SolvedAroe { model, solution })
    }

    pub fn solve_warm(model: AroeModel, opts: &SolverOptions, warm: Option<&[f64]>) -> Result<Self> {
        let solution = value_iterate(&model, opts, warm)?;
        Ok(SolvedAroe { model, solution })
    }

    pub fn gain(&self) -> f64 {
        self.solution.gain
    }

    pub fn grid(&self) -> &BeliefGrid {
        self.model.grid()
    }

    pub fn k(&self) -> usize {
        self.model.k()
    }

    /// L(p, u) at a grid point with successors snapped to the grid.
    pub fn point_action_values(&self, p: usize) -> Vec<f64> {
        let g = self.model.grid();
        (0..self.k())
            .map(|u| {
                let m = self.model.point_marginal(p, u);
                self.model.point_reward(p, u)
                    + m.iter()
                        .enumerate()
                        .map(|(y, q)| q * self.solution.bias[g.successor(p, u, y)])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn optimal_set_at_point(&self, p: usize, gap_tol: f64) -> Vec<usize> {
        optimal_from_values(&self.point_action_values(p), gap_tol)
    }

    /// One-step lookahead extension of h to the belief `b` attached to `info`:
    /// max_v { r̄(b,v) + Σ_z b^v_z h(grid(advance(info, v, z))) } − g.
    pub fn lookahead_bias(&self, b: &Belief, info: &InformationState) -> f64 {
        let g = self.model.grid();
        let mut best = f64::NEG_INFINITY;
        let mut next = info.clone();
        for v in 0..self.k() {
            let mut val = expected_reward(b, v, self.model.rewards());
            for (z, &q) in b.marginals[v].iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                advance_into(info, v, z, &mut next);
                let idx = g.index_of(&next).expect("reachable state maps to grid");
                val += q * self.solution.bias[idx];
            }
            best = best.max(val);
        }
        best - self.solution.gain
    }

    /// h at a reachable information state: the grid value when the state is
    /// on the grid, otherwise the lookahead extension at its exact belief.
    pub fn bias_at(&self, info: &InformationState) -> f64 {
        let g = self.model.grid();
        if g.is_exact(info) {
            if let Some(idx) = g.index_of(info) {
                return self.solution.bias[idx];
            }
        }
        let b = self.model.belief_of(info);
        self.lookahead_bias(&b, info)
    }

    /// L(ψ, u, h, P) for every u, with ψ = belief_of(info).
    pub fn action_values(&self, info: &InformationState) -> Vec<f64> {
        let psi = self.model.belief_of(info);
        self.action_values_with_belief(&psi, info)
    }

    pub fn action_values_with_belief(&self, psi: &Belief, info: &InformationState) -> Vec<f64> {
        let mut next = info.clone();
        (0..self.k())
            .map(|u| {
                let mut val = expected_reward(psi, u, self.model.rewards());
                for (y, &q) in psi.marginals[u].iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    advance_into(info, u, y, &mut next);
                    val += q * self.bias_at(&next);
                }
                val
            })
            .collect()
    }

    pub fn suboptimality_gap(&self, info: &InformationState, u: usize) -> f64 {
        let vals = self.action_values(info);
        let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (best - vals[u]).max(0.0)
    }

    pub fn optimal_action_set(&self, info: &InformationState, gap_tol: f64) -> Vec<usize> {
        optimal_from_values(&self.action_values(info), gap_tol)
    }
}

pub(crate) fn advance_into(info: &InformationState, u: usize, y: usize, out: &mut InformationState) {
    for k in 0..info.k() {
        if k == u {
            out.tau[k] = 1;
            out.s[k] = y;
        } else {
            out.tau[k] = info.tau[k] + 1;
            out.s[k] = info.s[k];
        }
    }
}

pub fn optimal_from_values(values: &[f64], gap_tol: f64) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| best - v <= gap_tol)
        .map(|(u, _)| u)
        .collect()
}

/// Builds the grid, model and solution in one call.
pub fn solve_instance(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    tau0: u32,
    opts: &SolverOptions,
) -> Result<SolvedAroe> {
    let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
    let grid = Arc::new(BeliefGrid::build(&sizes, tau0)?);
    SolvedAroe::solve(AroeModel::new(grid, p, rewards)?, opts)
}
