//! Exact finite-horizon optimal values under a known model.
//!
//! [`MemoOracle`] runs memoized backward induction over reachable slot
//! vectors and keeps the argmax policy. [`HorizonTable`] does the same
//! recursion layer by layer over a dense state space, which reaches horizons
//! in the thousands for small instances.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::aroe::grid::{advance_slots, info_slots, Slot};
use crate::belief::{InformationState, PowerTable};
use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

pub const DEFAULT_NODE_CAP: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub node_cap: usize,
    /// Taus past this value collapse to the stationary slot.
    pub closure: Option<u32>,
    pub keep_policy: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { node_cap: DEFAULT_NODE_CAP, closure: None, keep_policy: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub horizon: u32,
    pub value: f64,
    pub node_count: usize,
    /// (information state, steps left) → arm, ties to the lowest arm.
    #[serde(skip)]
    pub policy: BTreeMap<(InformationState, u32), usize>,
}

/// Memoized backward induction on slot vectors.
#[derive(Debug, Clone)]
pub struct MemoOracle {
    powers: PowerTable,
    rewards: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    opts: OracleOptions,
    memo: HashMap<(Vec<Slot>, u32), (f64, u8)>,
}

impl MemoOracle {
    /// `tau_hint` sizes the power table; larger taus are computed on demand.
    pub fn new(p: &[TransitionMatrix], rewards: &[Vec<f64>], tau_hint: u64, opts: OracleOptions) -> Result<Self> {
        check_shape(p, rewards)?;
        Ok(MemoOracle {
            powers: PowerTable::new(p, tau_hint.max(1))?,
            rewards: rewards.to_vec(),
            sizes: p.iter().map(|m| m.n()).collect(),
            opts,
            memo: HashMap::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.memo.len()
    }

    fn marginal(&self, arm: usize, slot: Slot) -> Vec<f64> {
        match slot {
            Slot::Observed { state, tau } => match self.powers.row_ref(arm, state as usize, tau as u64) {
                Some(r) => r.to_vec(),
                None => self.powers.row(arm, state as usize, tau as u64),
            },
            Slot::Mixed => self.powers.stationary(arm).to_vec(),
        }
    }

    /// Optimal expected reward over `h` steps from `slots`.
    pub fn value(&mut self, slots: &[Slot], h: u32) -> Result<f64> {
        Ok(self.solve(slots, h)?.0)
    }

    /// Optimal first action with `h ≥ 1` steps left.
    pub fn action(&mut self, slots: &[Slot], h: u32) -> Result<usize> {
        Ok(self.solve(slots, h)?.1)
    }

    pub fn value_of(&mut self, info: &InformationState, h: u32) -> Result<f64> {
        let slots = self.slots_of(info);
        self.value(&slots, h)
    }

    pub fn action_of(&mut self, info: &InformationState, h: u32) -> Result<usize> {
        let slots = self.slots_of(info);
        self.action(&slots, h)
    }

    fn slots_of(&self, info: &InformationState) -> Vec<Slot> {
        match self.opts.closure {
            Some(c) => crate::aroe::grid::snap_slots(info, c),
            None => info_slots(info),
        }
    }

    fn solve(&mut self, slots: &[Slot], h: u32) -> Result<(f64, usize)> {
        if h == 0 {
            return Ok((0.0, 0));
        }
        if let Some(&(v, a)) = self.memo.get(&(slots.to_vec(), h)) {
            return Ok((v, a as usize));
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for u in 0..self.sizes.len() {
            let m = self.marginal(u, slots[u]);
            let mut val = 0.0;
            for (y, &q) in m.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let next = advance_slots(slots, u, y, self.opts.closure);
                val += q * (self.rewards[u][y] + self.solve(&next, h - 1)?.0);
            }
            if val > best {
                best = val;
                arg = u;
            }
        }
        if self.memo.len() >= self.opts.node_cap {
            return Err(Error::OracleTooLarge { needed: self.memo.len() + 1, cap: self.opts.node_cap });
        }
        self.memo.insert((slots.to_vec(), h), (best, arg as u8));
        Ok((best, arg))
    }

    fn policy(&self) -> BTreeMap<(InformationState, u32), usize> {
        self.memo
            .iter()
            .filter_map(|((slots, h), &(_, a))| {
                let mut s = Vec::with_capacity(slots.len());
                let mut tau = Vec::with_capacity(slots.len());
                for slot in slots {
                    match *slot {
                        Slot::Observed { state, tau: t } => {
                            s.push(state as usize);
                            tau.push(t as u64);
                        }
                        Slot::Mixed => return None,
                    }
                }
                Some(((InformationState { s, tau }, *h), a as usize))
            })
            .collect()
    }
}

fn check_shape(p: &[TransitionMatrix], rewards: &[Vec<f64>]) -> Result<()> {
    if p.is_empty() || p.len() != rewards.len() || p.iter().zip(rewards).any(|(m, r)| m.n() != r.len()) {
        return Err(Error::Domain("transition and reward shapes differ".into()));
    }
    Ok(())
}

/// sup over policies of the expected T-step reward from `info0`.
pub fn finite_horizon_oracle(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    info0: &InformationState,
    horizon: u32,
    opts: OracleOptions,
) -> Result<OracleResult> {
    info0.check_shape(&p.iter().map(|m| m.n()).collect::<Vec<_>>())?;
    let hint = info0.tau.iter().copied().max().unwrap_or(1) + horizon as u64;
    let mut oracle = MemoOracle::new(p, rewards, hint, opts)?;
    let value = oracle.value_of(info0, horizon)?;
    let policy = if opts.keep_policy { oracle.policy() } else { BTreeMap::new() };
    Ok(OracleResult { horizon, value, node_count: oracle.node_count(), policy })
}

/// Expected T-step reward of always playing `arm` from `info0`.
pub fn fixed_arm_value(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    info0: &InformationState,
    arm: usize,
    horizon: u32,
) -> f64 {
    let mut dist = p[arm].pow(info0.tau[arm]).row(info0.s[arm]).to_vec();
    let mut total = 0.0;
    for _ in 0..horizon {
        total += dist.iter().zip(&rewards[arm]).map(|(a, b)| a * b).sum::<f64>();
        dist = p[arm].advance(&dist);
    }
    total
}

/// Optimal values V_T(info) for a set of query states and horizons, by
/// layered backward induction over every information state whose taus are
/// distinct, contain 1 and stay below a cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonTable {
    pub queries: Vec<InformationState>,
    pub horizons: Vec<u32>,
    /// values[h][q]
    pub values: Vec<Vec<f64>>,
    pub states_per_layer: usize,
}

pub const DEFAULT_TABLE_CAP: usize = 50_000_000;

impl HorizonTable {
    pub fn compute(
        p: &[TransitionMatrix],
        rewards: &[Vec<f64>],
        queries: &[InformationState],
        horizons: &[u32],
        state_cap: usize,
    ) -> Result<Self> {
        check_shape(p, rewards)?;
        let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
        let k = sizes.len();
        for q in queries {
            q.check_shape(&sizes)?;
            let mut t = q.tau.clone();
            t.sort_unstable();
            if t[0] != 1 || t.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Domain("query states need distinct taus containing 1".into()));
            }
        }
        let mut hs = horizons.to_vec();
        hs.sort_unstable();
        hs.dedup();
        let t_max = hs.last().copied().unwrap_or(0);
        let q_tau = queries.iter().flat_map(|q| q.tau.iter().copied()).max().unwrap_or(1);
        let cap = (q_tau + t_max as u64).max(1);

        let taus = enumerate_tau_vectors(k, cap, state_cap)?;
        let index: HashMap<&[u64], usize> = taus.iter().enumerate().map(|(i, t)| (t.as_slice(), i)).collect();
        let n_s: usize = sizes.iter().product();
        let total = taus.len().checked_mul(n_s).filter(|&t| t <= state_cap).ok_or(Error::OracleTooLarge {
            needed: taus.len().saturating_mul(n_s),
            cap: state_cap,
        })?;
        let mut succ = vec![u32::MAX; taus.len() * k];
        let mut next = vec![0u64; k];
        for (i, t) in taus.iter().enumerate() {
            for u in 0..k {
                for j in 0..k {
                    next[j] = if j == u { 1 } else { t[j] + 1 };
                }
                if let Some(&n) = index.get(next.as_slice()) {
                    succ[i * k + u] = n as u32;
                }
            }
        }
        let max_tau: Vec<u64> = taus.iter().map(|t| *t.iter().max().unwrap()).collect();
        let mut order: Vec<usize> = (0..taus.len()).collect();
        order.sort_by_key(|&i| max_tau[i]);

        let s_radix: Vec<usize> = {
            let mut r = vec![1; k];
            for j in (0..k.saturating_sub(1)).rev() {
                r[j] = r[j + 1] * sizes[j + 1];
            }
            r
        };
        let s_codes: Vec<Vec<usize>> = (0..n_s)
            .map(|c| (0..k).map(|j| (c / s_radix[j]) % sizes[j]).collect())
            .collect();

        let mut pw: Vec<Vec<TransitionMatrix>> = Vec::with_capacity(k);
        for m in p {
            let mut v = vec![TransitionMatrix::identity(m.n())];
            for t in 1..=cap {
                let q = v[t as usize - 1].mul(m);
                v.push(q);
            }
            pw.push(v);
        }

        let q_idx: Vec<usize> = queries
            .iter()
            .map(|q| {
                let code: usize = (0..k).map(|j| q.s[j] * s_radix[j]).sum();
                index[q.tau.as_slice()] * n_s + code
            })
            .collect();
        let mut values = Vec::with_capacity(hs.len());
        let mut prev = vec![0.0; total];
        let mut cur = vec![0.0; total];
        let mut hi = 0;
        if hs.first() == Some(&0) {
            values.push(vec![0.0; queries.len()]);
            hi = 1;
        }
        for h in 1..=t_max {
            let limit = cap + 1 - h as u64;
            for &i in &order {
                if max_tau[i] > limit {
                    break;
                }
                let t = &taus[i];
                for (c, s) in s_codes.iter().enumerate() {
                    let mut best = f64::NEG_INFINITY;
                    for u in 0..k {
                        let row = pw[u][t[u] as usize].row(s[u]);
                        let mut val = 0.0;
                        let next = succ[i * k + u];
                        if next == u32::MAX {
                            // only at h = 1, where the continuation is zero
                            for (y, &q) in row.iter().enumerate() {
                                val += q * rewards[u][y];
                            }
                        } else {
                            let base = next as usize * n_s + c - s[u] * s_radix[u];
                            for (y, &q) in row.iter().enumerate() {
                                val += q * (rewards[u][y] + prev[base + y * s_radix[u]]);
                            }
                        }
                        if val > best {
                            best = val;
                        }
                    }
                    cur[i * n_s + c] = best;
                }
            }
            std::mem::swap(&mut prev, &mut cur);
            if hi < hs.len() && hs[hi] == h {
                values.push(q_idx.iter().map(|&j| prev[j]).collect());
                hi += 1;
            }
        }
        Ok(HorizonTable { queries: queries.to_vec(), horizons: hs, values, states_per_layer: total })
    }

    pub fn value(&self, query: usize, horizon: u32) -> Option<f64> {
        let h = self.horizons.binary_search(&horizon).ok()?;
        self.values[h].get(query).copied()
    }

    pub fn value_of(&self, info: &InformationState, horizon: u32) -> Option<f64> {
        let q = self.queries.iter().position(|x| x == info)?;
        self.value(q, horizon)
    }
}

/// Tau vectors of length k with distinct entries, one equal to 1, all ≤ cap.
fn enumerate_tau_vectors(k: usize, cap: u64, state_cap: usize) -> Result<Vec<Vec<u64>>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; k];
    fn rec(pos: usize, cur: &mut Vec<u64>, cap: u64, out: &mut Vec<Vec<u64>>, limit: usize) -> bool {
        if pos == cur.len() {
            if cur.contains(&1) {
                out.push(cur.clone());
                if out.len() > limit {
                    return false;
                }
            }
            return true;
        }
        for t in 1..=cap {
            if cur[..pos].contains(&t) {
                continue;
            }
            cur[pos] = t;
            if !rec(pos + 1, cur, cap, out, limit) {
                return false;
            }
        }
        true
    }
    if !rec(0, &mut cur, cap, &mut out, state_cap) {
        return Err(Error::OracleTooLarge { needed: state_cap + 1, cap: state_cap });
    }
    Ok(out)
}
