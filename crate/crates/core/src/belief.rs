//! Information states `(s, τ)` and their factorized beliefs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, TransitionMatrix};

pub const JOINT_CAP: usize = 4096;

/// Last observed state and steps since that observation, per arm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InformationState {
    pub s: Vec<usize>,
    pub tau: Vec<u64>,
}

impl InformationState {
    pub fn new(s: Vec<usize>, tau: Vec<u64>) -> Result<Self> {
        if s.len() != tau.len() || s.is_empty() {
            return Err(Error::Domain("state and tau vectors must be non-empty and equal length".into()));
        }
        if tau.iter().any(|&t| t == 0) {
            return Err(Error::Domain("tau entries must be at least 1".into()));
        }
        Ok(InformationState { s, tau })
    }

    /// State after playing arm k at step k for k = 1..K.
    pub fn after_initialization(observed: &[usize]) -> Self {
        let k = observed.len() as u64;
        InformationState {
            s: observed.to_vec(),
            tau: (0..k).map(|i| k - i).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn check_shape(&self, sizes: &[usize]) -> Result<()> {
        if self.s.len() != sizes.len() {
            return Err(Error::Domain(format!(
                "information state has {} arms, instance has {}",
                self.s.len(),
                sizes.len()
            )));
        }
        for (k, (&s, &n)) in self.s.iter().zip(sizes).enumerate() {
            if s >= n {
                return Err(Error::Domain(format!("state {s} not in arm {k}")));
            }
        }
        Ok(())
    }

    /// Play arm u and observe y.
    pub fn advance(&self, u: usize, y: usize) -> InformationState {
        let mut next = self.clone();
        for (k, t) in next.tau.iter_mut().enumerate() {
            if k == u {
                *t = 1;
            } else {
                *t += 1;
            }
        }
        next.s[u] = y;
        next
    }
}

pub fn advance_information_state(
    info: &InformationState,
    u: usize,
    y: usize,
    sizes: &[usize],
) -> Result<InformationState> {
    info.check_shape(sizes)?;
    if u >= sizes.len() || y >= sizes[u] {
        return Err(Error::Domain(format!("observation {y} not in arm {u}")));
    }
    Ok(info.advance(u, y))
}

/// Product of per-arm marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub marginals: Vec<Vec<f64>>,
}

impl Belief {
    pub fn k(&self) -> usize {
        self.marginals.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.marginals.iter().map(|m| m.len()).collect()
    }

    pub fn joint_size(&self) -> usize {
        self.marginals.iter().map(|m| m.len()).product()
    }

    /// Joint distribution, arm 0 most significant.
    pub fn joint(&self, cap: usize) -> Result<Vec<f64>> {
        let size = self.joint_size();
        if size > cap {
            return Err(Error::Domain(format!("joint size {size} exceeds cap {cap}")));
        }
        let mut joint = vec![1.0];
        for m in &self.marginals {
            let mut next = Vec::with_capacity(joint.len() * m.len());
            for &a in &joint {
                for &b in m {
                    next.push(a * b);
                }
            }
            joint = next;
        }
        Ok(joint)
    }

    pub fn stationary(p: &[TransitionMatrix]) -> Result<Belief> {
        Ok(Belief {
            marginals: p.iter().map(stationary_distribution).collect::<Result<_>>()?,
        })
    }

    /// One-step advance of every arm.
    pub fn advance_all(&self, p: &[TransitionMatrix]) -> Belief {
        Belief {
            marginals: self.marginals.iter().zip(p).map(|(m, pk)| pk.advance(m)).collect(),
        }
    }

    pub fn advance_arm(&self, u: usize, p: &[TransitionMatrix]) -> Belief {
        let mut b = self.clone();
        b.marginals[u] = p[u].advance(&b.marginals[u]);
        b
    }

    pub fn marginal_l1_sum(&self, other: &Belief) -> f64 {
        self.marginals
            .iter()
            .zip(&other.marginals)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum()
    }

    /// Stable 64-bit digest of the marginals.
    pub fn digest(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for m in &self.marginals {
            h.update((m.len() as u64).to_le_bytes());
            for v in m {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
    }
}

fn check_matrices(info: &InformationState, p: &[TransitionMatrix]) -> Result<()> {
    let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
    info.check_shape(&sizes)
}

/// Row s^k of (P^k)^{τ^k} for every arm.
pub fn belief_of(info: &InformationState, p: &[TransitionMatrix]) -> Result<Belief> {
    check_matrices(info, p)?;
    Ok(Belief {
        marginals: info
            .s
            .iter()
            .zip(&info.tau)
            .zip(p)
            .map(|((&s, &t), pk)| pk.pow(t).row(s).to_vec())
            .collect(),
    })
}

fn check_obs(belief: &Belief, y: usize, u: usize, p: &[TransitionMatrix]) -> Result<()> {
    if u >= belief.k() || u >= p.len() {
        return Err(Error::Domain(format!("arm {u} out of range")));
    }
    if y >= p[u].n() || y >= belief.marginals[u].len() {
        return Err(Error::Domain(format!("state {y} not in arm {u}")));
    }
    Ok(())
}

/// `(marginal^u · P^u)_y`: probability that the next state of arm u is y.
pub fn observation_probability(belief: &Belief, y: usize, u: usize, p: &[TransitionMatrix]) -> Result<f64> {
    check_obs(belief, y, u, p)?;
    Ok(belief.marginals[u]
        .iter()
        .enumerate()
        .map(|(x, &m)| m * p[u].get(x, y))
        .sum())
}

/// Arm u collapses to `e_y`, every other arm advances one step.
pub fn belief_update(belief: &Belief, y: usize, u: usize, p: &[TransitionMatrix]) -> Result<Belief> {
    if observation_probability(belief, y, u, p)? <= 0.0 {
        return Err(Error::ImpossibleObservation { arm: u, state: y });
    }
    let marginals = belief
        .marginals
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if k == u {
                let mut e = vec![0.0; m.len()];
                e[y] = 1.0;
                e
            } else {
                p[k].advance(m)
            }
        })
        .collect();
    Ok(Belief { marginals })
}

pub fn belief_distance(b1: &Belief, b2: &Belief) -> Result<f64> {
    belief_distance_capped(b1, b2, JOINT_CAP)
}

/// L1 distance between the joint distributions.
pub fn belief_distance_capped(b1: &Belief, b2: &Belief, cap: usize) -> Result<f64> {
    if b1.sizes() != b2.sizes() {
        return Err(Error::Domain("belief shapes differ".into()));
    }
    let j1 = b1.joint(cap)?;
    let j2 = b2.joint(cap)?;
    Ok(j1.iter().zip(&j2).map(|(a, b)| (a - b).abs()).sum())
}

/// Returns (||ψ_P̂ − ψ_P||_1 on joints, |S^1|…|S^K|·C1·Σ_k ||P̂^k − P^k||_1)
/// at `info`, with `c1` a perturbation constant of the true chains.
pub fn perturbation_bound(
    info: &InformationState,
    p: &[TransitionMatrix],
    p_hat: &[TransitionMatrix],
    c1: f64,
) -> Result<(f64, f64)> {
    let lhs = belief_distance(&belief_of(info, p_hat)?, &belief_of(info, p)?)?;
    let joint: usize = p.iter().map(|m| m.n()).product();
    let dist: f64 = p.iter().zip(p_hat).map(|(a, b)| a.l1_distance(b)).sum();
    Ok((lhs, joint as f64 * c1 * dist))
}

/// Per-arm memo of (P^k)^τ for τ = 0..=cap; larger powers are computed on demand.
#[derive(Debug, Clone)]
pub struct PowerTable {
    transitions: Vec<TransitionMatrix>,
    powers: Vec<Vec<TransitionMatrix>>,
    stationary: Vec<Vec<f64>>,
}

impl PowerTable {
    pub fn new(transitions: &[TransitionMatrix], cap: u64) -> Result<Self> {
        let mut powers = Vec::with_capacity(transitions.len());
        for p in transitions {
            let mut v = Vec::with_capacity(cap as usize + 1);
            let mut q = TransitionMatrix::identity(p.n());
            v.push(q.clone());
            for _ in 0..cap {
                q = q.mul(p);
                v.push(q.clone());
            }
            powers.push(v);
        }
        let stationary = transitions.iter().map(stationary_distribution).collect::<Result<_>>()?;
        Ok(PowerTable { transitions: transitions.to_vec(), powers, stationary })
    }

    pub fn transitions(&self) -> &[TransitionMatrix] {
        &self.transitions
    }

    pub fn stationary(&self, arm: usize) -> &[f64] {
        &self.stationary[arm]
    }

    pub fn cap(&self) -> u64 {
        self.powers.first().map(|v| v.len() as u64 - 1).unwrap_or(0)
    }

    pub fn row(&self, arm: usize, s: usize, tau: u64) -> Vec<f64> {
        match self.powers[arm].get(tau as usize) {
            Some(m) => m.row(s).to_vec(),
            None => self.transitions[arm].pow(tau).row(s).to_vec(),
        }
    }

    pub fn row_ref(&self, arm: usize, s: usize, tau: u64) -> Option<&[f64]> {
        self.powers[arm].get(tau as usize).map(|m| m.row(s))
    }

    pub fn belief_of(&self, info: &InformationState) -> Belief {
        Belief {
            marginals: (0..info.k()).map(|k| self.row(k, info.s[k], info.tau[k])).collect(),
        }
    }
}

/// Joint-space Q-matrix update: returns (V, ψQ(y|u)/V) over the joint state space.
pub fn joint_q_update(
    joint: &[f64],
    sizes: &[usize],
    y: usize,
    u: usize,
    p: &[TransitionMatrix],
) -> (f64, Vec<f64>) {
    let states = enumerate_joint(sizes);
    let mut next = vec![0.0; joint.len()];
    for (a, xa) in states.iter().enumerate() {
        if joint[a] == 0.0 {
            continue;
        }
        for (b, xb) in states.iter().enumerate() {
            if xb[u] != y {
                continue;
            }
            let prob: f64 = (0..sizes.len()).map(|k| p[k].get(xa[k], xb[k])).product();
            next[b] += joint[a] * prob;
        }
    }
    let v: f64 = next.iter().sum();
    if v > 0.0 {
        next.iter_mut().for_each(|x| *x /= v);
    }
    (v, next)
}

/// All joint states in the order used by [`Belief::joint`].
pub fn enumerate_joint(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        let mut next = Vec::with_capacity(out.len() * n);
        for prefix in &out {
            for x in 0..n {
                let mut v = prefix.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
