//! Optimistic index: the AROE right-hand side maximized over transition
//! models in an L1 ball around the estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aroe::solver::{advance_into, expected_reward, SolvedAroe};
use crate::belief::{Belief, InformationState};
use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

/// Candidate that attained the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexOrigin {
    Center,
    /// Every row of `arm` (or only `row`) shifted toward column `col`.
    Corner { arm: usize, row: Option<usize>, col: usize },
    Random { draw: usize },
}

impl IndexOrigin {
    pub fn label(&self) -> String {
        match self {
            IndexOrigin::Center => "center".into(),
            IndexOrigin::Corner { arm, row: None, col } => format!("corner:{arm}:*:{col}"),
            IndexOrigin::Corner { arm, row: Some(r), col } => format!("corner:{arm}:{r}:{col}"),
            IndexOrigin::Random { draw } => format!("random:{draw}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub value: f64,
    pub center: f64,
    pub radius: f64,
    pub origin: IndexOrigin,
}

/// sqrt(2 ln t / N_u); infinite when the arm was never played.
pub fn confidence_radius(t: u64, n_u: u64) -> f64 {
    if n_u == 0 {
        return f64::INFINITY;
    }
    (2.0 * (t.max(1) as f64).ln() / n_u as f64).sqrt()
}

/// Moves mass `m` (clipped) of `row` toward column `col`, taking it
/// proportionally from the other entries.
pub fn shift_row(row: &mut [f64], col: usize, m: f64) {
    let rest = 1.0 - row[col];
    if rest <= 0.0 {
        return;
    }
    let m = m.min(rest);
    let scale = (rest - m) / rest;
    for (j, x) in row.iter_mut().enumerate() {
        if j != col {
            *x *= scale;
        }
    }
    row[col] += m;
}

/// Rows of a candidate model; unmodified arms are `None`.
type Candidate = Vec<Option<TransitionMatrix>>;

fn with_rows(p: &TransitionMatrix, f: impl Fn(usize, &mut [f64])) -> TransitionMatrix {
    let n = p.n();
    let mut rows = p.to_rows();
    for (i, r) in rows.iter_mut().enumerate() {
        f(i, r);
    }
    TransitionMatrix::from_flat(n, rows.concat())
}

fn candidates<R: Rng>(p: &[TransitionMatrix], radius: f64, budget: usize, rng: &mut R) -> Vec<(IndexOrigin, Candidate)> {
    let k = p.len();
    let mut out = Vec::new();
    let half = radius / 2.0;
    for arm in 0..k {
        let n = p[arm].n();
        for col in 0..n {
            let mut c: Candidate = vec![None; k];
            c[arm] = Some(with_rows(&p[arm], |_, r| shift_row(r, col, half)));
            out.push((IndexOrigin::Corner { arm, row: None, col }, c));
            for row in 0..n {
                let mut c: Candidate = vec![None; k];
                c[arm] = Some(with_rows(&p[arm], |i, r| {
                    if i == row {
                        shift_row(r, col, half)
                    }
                }));
                out.push((IndexOrigin::Corner { arm, row: Some(row), col }, c));
            }
        }
    }
    for draw in 0..budget {
        let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-12).collect();
        let ws: f64 = w.iter().sum();
        let mut c: Candidate = Vec::with_capacity(k);
        for (arm, m) in p.iter().enumerate() {
            let r_k = radius * w[arm] / ws;
            let n = m.n();
            let mut rows = m.to_rows();
            for row in rows.iter_mut() {
                let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let es: f64 = e.iter().sum();
                let q: Vec<f64> = e.iter().map(|x| x / es).collect();
                let d: f64 = q.iter().zip(row.iter()).map(|(a, b)| (a - b).abs()).sum();
                let scale = rng.gen::<f64>().powf(0.25);
                let lambda = if d > 0.0 { (r_k / d).min(1.0) * scale } else { 0.0 };
                for (x, qj) in row.iter_mut().zip(&q) {
                    *x = (1.0 - lambda) * *x + lambda * qj;
                }
            }
            c.push(Some(TransitionMatrix::from_flat(n, rows.concat())));
        }
        out.push((IndexOrigin::Random { draw }, c));
    }
    out
}

/// Indices of every arm at `info`, with ψ̂ the estimated belief and
/// `plays[u]` = N^u. A radius below sqrt(machine epsilon) evaluates the
/// center only.
pub fn compute_indices<R: Rng>(
    solved: &SolvedAroe,
    info: &InformationState,
    psi: &Belief,
    t: u64,
    plays: &[u64],
    radius_scale: f64,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<IndexValue>> {
    if budget < 1 {
        return Err(Error::Config("index budget must be at least 1".into()));
    }
    let k = solved.k();
    let p_hat = solved.model.transitions();
    let centers = solved.action_values_with_belief(psi, info);
    let mut out = Vec::with_capacity(k);
    let mut next = info.clone();
    for u in 0..k {
        let radius = radius_scale * confidence_radius(t, plays[u]);
        let mut best = IndexValue { value: centers[u], center: centers[u], radius, origin: IndexOrigin::Center };
        if radius * radius < f64::EPSILON {
            out.push(best);
            continue;
        }
        let r = radius.min(2.0 * k as f64);
        let base: Vec<Belief> = (0..psi.marginals[u].len())
            .map(|y| {
                advance_into(info, u, y, &mut next);
                solved.model.belief_of(&next)
            })
            .collect();
        let rbar = expected_reward(psi, u, solved.model.rewards());
        for (origin, cand) in candidates(p_hat, r, budget, rng) {
            // marginals of arms other than u in every successor of (u, y)
            let stale: Vec<Option<Vec<f64>>> = cand
                .iter()
                .enumerate()
                .map(|(j, m)| match m {
                    Some(m) if j != u => Some(m.pow(info.tau[j] + 1).row(info.s[j]).to_vec()),
                    _ => None,
                })
                .collect();
            let mut val = rbar;
            for (y, &q) in psi.marginals[u].iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                advance_into(info, u, y, &mut next);
                let mut b = base[y].clone();
                for j in 0..k {
                    if let Some(m) = &stale[j] {
                        b.marginals[j] = m.clone();
                    } else if j == u {
                        if let Some(m) = &cand[u] {
                            b.marginals[u] = m.row(y).to_vec();
                        }
                    }
                }
                val += q * solved.lookahead_bias(&b, &next);
            }
            if val > best.value {
                best.value = val;
                best.origin = origin;
            }
        }
        out.push(best);
    }
    Ok(out)
}
