//! Finite Markov chain primitives: validated transition matrices, arm and
//! instance models, stationary distributions, hitting times and the
//! uniform-ergodicity certificate used by the perturbation bounds.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INPUT_ROW_TOL: f64 = 1e-9;

/// Row-stochastic square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::from_rows_for_arm(&rows, 0)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.to_rows()
    }
}

impl TransitionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows_for_arm(rows, 0)
    }

    /// Validates and renormalizes rows so they sum to one in floating point.
    pub fn from_rows_for_arm(rows: &[Vec<f64>], arm: usize) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain(format!("arm {arm} has no states")));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain(format!(
                    "arm {arm}: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("arm {arm}: entry ({i},{j}) is not finite")));
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { arm, row: i, col: j, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > INPUT_ROW_TOL {
                return Err(Error::RowSum { arm, row: i, sum });
            }
            data.extend(row.iter().map(|v| v / sum));
        }
        Ok(TransitionMatrix { n, data })
    }

    pub(crate) fn from_flat(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        TransitionMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        TransitionMatrix { n, data }
    }

    pub fn uniform(n: usize) -> Self {
        TransitionMatrix { n, data: vec![1.0 / n as f64; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Every entry strictly positive.
    pub fn strictly_positive(&self) -> bool {
        self.data.iter().all(|&v| v > 0.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mul(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        TransitionMatrix { n, data: out }
    }

    /// Matrix power by repeated squaring.
    pub fn pow(&self, mut k: u64) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.n);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Row vector times matrix.
    pub fn advance(&self, dist: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += p * self.data[i * n + j];
            }
        }
        out
    }

    /// Induced L1 norm of the difference (maximum row L1 distance).
    pub fn l1_distance(&self, other: &TransitionMatrix) -> f64 {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(other.row(i))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn positive_edges(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.get(i, j) > 0.0).collect())
            .collect()
    }

    /// Irreducible and aperiodic.
    pub fn check_ergodic(&self, arm: usize) -> Result<()> {
        let n = self.n;
        let out = self.positive_edges();
        let mut inc = vec![Vec::new(); n];
        for (i, row) in out.iter().enumerate() {
            for &j in row {
                inc[j].push(i);
            }
        }
        let reach = |adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        if !reach(&out) || !reach(&inc) {
            return Err(Error::Ergodicity {
                arm,
                reason: "chain is not irreducible".into(),
            });
        }
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &w in &out[v] {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut period = 0usize;
        for v in 0..n {
            for &w in &out[v] {
                let diff = (level[v] + 1).abs_diff(level[w]);
                period = gcd(period, diff);
            }
        }
        if period != 1 {
            return Err(Error::Ergodicity {
                arm,
                reason: format!("chain has period {period}"),
            });
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Raw arm description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub transition: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub arms: Vec<ArmSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    #[default]
    Strict,
    /// Skips the ergodicity check (deterministic arms in diagnostics).
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub labels: Vec<String>,
    pub transition: TransitionMatrix,
    pub rewards: Vec<f64>,
}

impl ArmModel {
    pub fn n_states(&self) -> usize {
        self.transition.n()
    }

    pub fn mean_reward(&self, dist: &[f64]) -> f64 {
        dist.iter().zip(&self.rewards).map(|(p, r)| p * r).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceConstants {
    pub beta: f64,
    pub pi_min: f64,
    pub r_max: f64,
    pub s_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    pub arms: Vec<ArmModel>,
    pub constants: InstanceConstants,
    pub positive: Vec<bool>,
}

impl BanditInstance {
    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.arms.iter().map(|a| a.n_states()).collect()
    }

    pub fn transitions(&self) -> Vec<TransitionMatrix> {
        self.arms.iter().map(|a| a.transition.clone()).collect()
    }

    pub fn rewards(&self) -> Vec<Vec<f64>> {
        self.arms.iter().map(|a| a.rewards.clone()).collect()
    }

    /// Namespaced label, disjoint across arms.
    pub fn qualified_label(&self, arm: usize, state: usize) -> String {
        format!("arm{arm}:{}", self.arms[arm].labels[state])
    }

    pub fn all_positive(&self) -> bool {
        self.positive.iter().all(|&b| b)
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            arms: self
                .arms
                .iter()
                .map(|a| ArmSpec {
                    transition: a.transition.to_rows(),
                    rewards: Some(a.rewards.clone()),
                    labels: Some(a.labels.clone()),
                })
                .collect(),
        }
    }

    pub fn from_parts(transitions: &[Vec<Vec<f64>>], rewards: &[Vec<f64>]) -> Result<Self> {
        let spec = InstanceSpec {
            arms: transitions
                .iter()
                .zip(rewards)
                .map(|(t, r)| ArmSpec { transition: t.clone(), rewards: Some(r.clone()), labels: None })
                .collect(),
        };
        validate_instance(&spec, ValidationMode::Strict)
    }
}

pub fn validate_instance(spec: &InstanceSpec, mode: ValidationMode) -> Result<BanditInstance> {
    if spec.arms.is_empty() {
        return Err(Error::Domain("instance needs at least one arm".into()));
    }
    let mut arms = Vec::with_capacity(spec.arms.len());
    for (k, a) in spec.arms.iter().enumerate() {
        let transition = TransitionMatrix::from_rows_for_arm(&a.transition, k)?;
        let n = transition.n();
        if mode == ValidationMode::Strict {
            transition.check_ergodic(k)?;
        }
        let labels = match &a.labels {
            Some(l) if l.len() != n => {
                return Err(Error::Domain(format!("arm {k}: {} labels for {n} states", l.len())))
            }
            Some(l) => l.clone(),
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        let rewards = match &a.rewards {
            Some(r) if r.len() != n => {
                return Err(Error::Domain(format!("arm {k}: {} rewards for {n} states", r.len())))
            }
            Some(r) => r.clone(),
            None => labels
                .iter()
                .map(|l| {
                    l.trim().parse::<f64>().map_err(|_| {
                        Error::Domain(format!("arm {k}: label {l:?} is not numeric and no rewards given"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        if rewards.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Domain(format!("arm {k}: rewards must be finite and nonnegative")));
        }
        arms.push(ArmModel { labels, transition, rewards });
    }
    let positive = arms.iter().map(|a| a.transition.strictly_positive()).collect();
    let mut pi_min = f64::INFINITY;
    for a in &arms {
        let pi = stationary_distribution(&a.transition)?;
        pi_min = pi_min.min(pi.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let r_max = arms
        .iter()
        .flat_map(|a| a.rewards.iter().copied())
        .fold(0.0, f64::max);
    let s_max = arms.iter().map(|a| a.n_states()).max().unwrap_or(0);
    Ok(BanditInstance {
        arms,
        constants: InstanceConstants { beta: beta_constant(), pi_min, r_max, s_max },
        positive,
    })
}

/// Σ_{t≥1} 1/t², summed to 10^6 with an Euler–Maclaurin tail.
pub fn beta_constant() -> f64 {
    const N: u64 = 1_000_000;
    let mut s = 0.0;
    for t in (1..=N).rev() {
        let x = t as f64;
        s += 1.0 / (x * x);
    }
    let n = N as f64;
    s + 1.0 / n - 1.0 / (2.0 * n * n) + 1.0 / (6.0 * n * n * n)
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = p.n();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let mut pi: Vec<f64> = match solve_dense(a, b) {
        Ok(x) => x.iter().map(|v| v.max(0.0)).collect(),
        Err(_) => vec![1.0 / n as f64; n],
    };
    normalize(&mut pi);
    const CAP: usize = 1_000_000;
    for iter in 0..CAP {
        let next = p.advance(&pi);
        let resid: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if resid <= 1e-12 || (iter >= 2 && resid <= 1e-10) {
            return Ok(pi);
        }
        pi = next;
        normalize(&mut pi);
    }
    let resid: f64 = p.advance(&pi).iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
    Err(Error::Convergence { iterations: CAP, last_span: resid })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// `E[T_ij]`, the expected first-passage time from i to j; the diagonal holds
/// the expected return time 1/π_i.
pub fn expected_hitting_times(p: &TransitionMatrix) -> Result<Vec<Vec<f64>>> {
    let n = p.n();
    let pi = stationary_distribution(p)?;
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..n {
        out[j][j] = 1.0 / pi[j];
        if n == 1 {
            continue;
        }
        let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let m = others.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (r, &i) in others.iter().enumerate() {
            for (c, &l) in others.iter().enumerate() {
                a[(r, c)] = if r == c { 1.0 } else { 0.0 } - p.get(i, l);
            }
        }
        let h = solve_dense(a, DVector::from_element(m, 1.0))?;
        for (r, &i) in others.iter().enumerate() {
            if !h[r].is_finite() || h[r] < 0.0 {
                return Err(Error::Numerical(format!("invalid hitting time {i}->{j}")));
            }
            out[i][j] = h[r];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmCertificate {
    pub stationary: Vec<f64>,
    pub c: f64,
    pub rho: f64,
    pub t_hat: u64,
    pub c1_infinity: f64,
    pub hitting: Vec<Vec<f64>>,
}

impl ArmCertificate {
    /// C1(P, t) = t̂ + C(ρ^t̂ − ρ^t)/(1 − ρ), equal to t while t ≤ t̂.
    pub fn c1(&self, t: u64) -> f64 {
        if t <= self.t_hat {
            return t as f64;
        }
        self.t_hat as f64
            + self.c * (self.rho.powf(self.t_hat as f64) - self.rho.powf(t as f64)) / (1.0 - self.rho)
    }

    pub fn envelope(&self, t: u64) -> f64 {
        self.c * self.rho.powf(t as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityCertificate {
    pub arms: Vec<ArmCertificate>,
    pub t_max: f64,
}

impl ErgodicityCertificate {
    /// max_k C1(P^k, ∞).
    pub fn c1(&self) -> f64 {
        self.arms.iter().map(|a| a.c1_infinity).fold(0.0, f64::max)
    }
}

pub const PROBE_WINDOW: usize = 64;
const RHO_FLOOR: f64 = 1e-6;
const CERT_SLACK: f64 = 1e-9;

/// `d(t) = max_x ||e_x P^t − π||_1` for t = 0..=len.
pub fn tv_decay(p: &TransitionMatrix, pi: &[f64], len: usize) -> Vec<f64> {
    let n = p.n();
    let mut q = TransitionMatrix::identity(n);
    let mut d = Vec::with_capacity(len + 1);
    for t in 0..=len {
        if t > 0 {
            q = q.mul(p);
        }
        let dt = (0..n)
            .map(|x| q.row(x).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        d.push(dt);
    }
    d
}

pub fn arm_certificate(p: &TransitionMatrix, arm: usize, window: usize) -> Result<ArmCertificate> {
    let pi = stationary_distribution(p)?;
    let d = tv_decay(p, &pi, window);
    let mut rho: f64 = RHO_FLOOR;
    for t in 0..window {
        if d[t] > 1e-12 {
            rho = rho.max(d[t + 1] / d[t]);
        }
    }
    if rho >= 1.0 - 1e-12 {
        return Err(Error::Ergodicity {
            arm,
            reason: format!("total-variation contraction ratio {rho} is not below one"),
        });
    }
    let mut c: f64 = 1.0;
    for (t, &dt) in d.iter().enumerate() {
        if dt > 1e-13 {
            c = c.max(dt / rho.powi(t as i32));
        }
    }
    for (t, &dt) in d.iter().enumerate().skip(1) {
        if dt > c * rho.powi(t as i32) + CERT_SLACK {
            return Err(Error::Numerical(format!(
                "certificate fails at t={t}: {dt} > {}",
                c * rho.powi(t as i32)
            )));
        }
    }
    let t_hat = (c.ln() / -rho.ln()).ceil().max(0.0) as u64;
    let c1_infinity = t_hat as f64 + c * rho.powf(t_hat as f64) / (1.0 - rho);
    let hitting = expected_hitting_times(p)?;
    Ok(ArmCertificate { stationary: pi, c, rho, t_hat, c1_infinity, hitting })
}

pub fn ergodicity_certificate(instance: &BanditInstance) -> Result<ErgodicityCertificate> {
    let arms = instance
        .arms
        .iter()
        .enumerate()
        .map(|(k, a)| arm_certificate(&a.transition, k, PROBE_WINDOW))
        .collect::<Result<Vec<_>>>()?;
    let t_max = arms
        .iter()
        .flat_map(|a| a.hitting.iter().flatten().copied())
        .fold(0.0, f64::max)
        + 1.0;
    Ok(ErgodicityCertificate { arms, t_max })
}

/// Returns (|Πρ − Πρ'|, Σ|ρ_k − ρ'_k|).
pub fn product_difference_bound(rho: &[f64], rho_prime: &[f64]) -> Result<(f64, f64)> {
    if rho.len() != rho_prime.len() {
        return Err(Error::Domain("vectors differ in length".into()));
    }
    if rho.iter().chain(rho_prime).any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("entries must lie in [0,1]".into()));
    }
    let lhs = (rho.iter().product::<f64>() - rho_prime.iter().product::<f64>()).abs();
    let rhs = rho.iter().zip(rho_prime).map(|(a, b)| (a - b).abs()).sum();
    Ok((lhs, rhs))
}

/// Random row-stochastic matrix with every entry at least `min_entry`.
pub fn random_transition<R: Rng + ?Sized>(n: usize, min_entry: f64, rng: &mut R) -> TransitionMatrix {
    assert!(min_entry * n as f64 <= 1.0);
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n {
        let w: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
        let s: f64 = w.iter().sum();
        let free = 1.0 - min_entry * n as f64;
        data.extend(w.iter().map(|x| min_entry + free * x / s));
    }
    let mut m = TransitionMatrix::from_flat(n, data);
    for i in 0..n {
        let s: f64 = m.row(i).iter().sum();
        for j in 0..n {
            m.data[i * n + j] /= s;
        }
    }
    m
}

/// Random instance with rewards drawn uniformly from [0, 1].
pub fn random_instance<R: Rng + ?Sized>(sizes: &[usize], min_entry: f64, rng: &mut R) -> BanditInstance {
    let arms: Vec<ArmSpec> = sizes
        .iter()
        .map(|&n| ArmSpec {
            transition: random_transition(n, min_entry, rng).to_rows(),
            rewards: Some((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
            labels: None,
        })
        .collect();
    validate_instance(&InstanceSpec { arms }, ValidationMode::Strict)
        .expect("random instance with positive entries is ergodic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tm(rows: &[&[f64]]) -> TransitionMatrix {
        TransitionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn spec1(rows: &[&[f64]], rewards: &[f64]) -> InstanceSpec {
        InstanceSpec {
            arms: vec![ArmSpec {
                transition: rows.iter().map(|r| r.to_vec()).collect(),
                rewards: Some(rewards.to_vec()),
                labels: None,
            }],
        }
    }

    #[test]
    fn validate_examples() {
        let inst = validate_instance(&spec1(&[&[0.5, 0.5], &[0.5, 0.5]], &[1.0, 2.0]), ValidationMode::Strict).unwrap();
        assert!(inst.positive[0]);
        let err = validate_instance(&spec1(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 2.0]), ValidationMode::Strict);
        assert!(matches!(err, Err(Error::Ergodicity { .. })));
        let two = InstanceSpec {
            arms: vec![
                ArmSpec { transition: vec![vec![0.3, 0.7], vec![0.6, 0.4]], rewards: None, labels: Some(vec!["0".into(), "1".into()]) },
                ArmSpec { transition: vec![vec![0.2, 0.8], vec![0.9, 0.1]], rewards: None, labels: Some(vec!["2".into(), "5".into()]) },
            ],
        };
        let inst = validate_instance(&two, ValidationMode::Strict).unwrap();
        assert_eq!(inst.constants.s_max, 2);
        assert_eq!(inst.constants.r_max, 5.0);
        assert_eq!(inst.arms[1].rewards, vec![2.0, 5.0]);
        assert_ne!(inst.qualified_label(0, 1), inst.qualified_label(1, 0));
    }

    #[test]
    fn validation_errors() {
        let e = validate_instance(&spec1(&[&[0.5, 0.6], &[0.5, 0.5]], &[0.0, 1.0]), ValidationMode::Strict);
        assert!(matches!(e, Err(Error::RowSum { row: 0, .. })));
        let e = validate_instance(&spec1(&[&[1.5, -0.5], &[0.5, 0.5]], &[0.0, 1.0]), ValidationMode::Strict);
        assert!(matches!(e, Err(Error::NegativeEntry { .. })));
        let e = validate_instance(&spec1(&[&[0.0, 1.0], &[1.0, 0.0]], &[0.0, 1.0]), ValidationMode::Strict);
        assert!(matches!(e, Err(Error::Ergodicity { .. })));
        assert!(validate_instance(&spec1(&[&[0.0, 1.0], &[1.0, 0.0]], &[0.0, 1.0]), ValidationMode::Diagnostic).is_ok());
    }

    #[test]
    fn transient_state_is_rejected() {
        let e = validate_instance(&spec1(&[&[0.5, 0.5], &[0.0, 1.0]], &[0.0, 1.0]), ValidationMode::Strict);
        assert!(matches!(e, Err(Error::Ergodicity { .. })));
    }

    #[test]
    fn beta_constant_value() {
        let b = beta_constant();
        assert!((1.6449..=1.6450).contains(&b));
        assert!((b - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_examples() {
        assert_eq!(stationary_distribution(&tm(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap(), vec![0.5, 0.5]);
        let pi = stationary_distribution(&tm(&[&[0.9, 0.1], &[0.1, 0.9]])).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        let pi = stationary_distribution(&tm(&[&[0.7, 0.3], &[0.4, 0.6]])).unwrap();
        assert!((pi[0] - 4.0 / 7.0).abs() < 1e-12 && (pi[1] - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_fixed_point_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=6);
            let p = random_transition(n, 0.0, &mut rng);
            let pi = stationary_distribution(&p).unwrap();
            let resid: f64 = p.advance(&pi).iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            assert!(resid <= 1e-10);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hitting_time_examples() {
        let h = expected_hitting_times(&tm(&[&[0.5, 0.5], &[0.3, 0.7]])).unwrap();
        assert!((h[0][1] - 2.0).abs() < 1e-12);
        let h = expected_hitting_times(&tm(&[&[0.9, 0.1], &[0.3, 0.7]])).unwrap();
        assert!((h[0][1] - 10.0).abs() < 1e-12);
        let h = expected_hitting_times(&tm(&[&[0.7, 0.3], &[0.4, 0.6]])).unwrap();
        assert!((h[1][0] - 2.5).abs() < 1e-12);
        assert!((h[0][0] - 7.0 / 4.0).abs() < 1e-12);
    }

    /// First-passage times against direct simulation.
    #[test]
    fn hitting_times_monte_carlo() {
        let p = tm(&[&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.3], &[0.25, 0.25, 0.5]]);
        let h = expected_hitting_times(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (i, j) in [(0usize, 2usize), (2, 1), (1, 1)] {
            let n = 1_000_000;
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..n {
                let mut s = i;
                let mut steps = 0u64;
                loop {
                    let u: f64 = rng.gen();
                    let row = p.row(s);
                    let mut acc = 0.0;
                    let mut next = row.len() - 1;
                    for (c, &pc) in row.iter().enumerate() {
                        acc += pc;
                        if u < acc {
                            next = c;
                            break;
                        }
                    }
                    s = next;
                    steps += 1;
                    if s == j {
                        break;
                    }
                }
                sum += steps as f64;
                sumsq += (steps * steps) as f64;
            }
            let mean = sum / n as f64;
            let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - h[i][j]).abs() < 3.0 * se, "{i}->{j}: {mean} vs {}", h[i][j]);
        }
    }

    #[test]
    fn certificate_examples() {
        let c = arm_certificate(&tm(&[&[0.5, 0.5], &[0.5, 0.5]]), 0, 64).unwrap();
        assert!(c.rho <= 1e-6 && c.c >= 1.0);
        let c = arm_certificate(&tm(&[&[0.9, 0.1], &[0.1, 0.9]]), 0, 64).unwrap();
        assert!((c.rho - 0.8).abs() < 1e-9);
        assert!(c.c >= 1.0 && c.c < 1.0 + 1e-9);
        assert_eq!(c.t_hat, 0);
        assert!((c.c1_infinity - 5.0).abs() < 1e-6);
        assert!((c.c1(3) - (1.0 - 0.8f64.powi(3)) / 0.2).abs() < 1e-9);
    }

    #[test]
    fn certificate_soundness_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..=5);
            let p = random_transition(n, 0.01, &mut rng);
            let c = arm_certificate(&p, 0, 64).unwrap();
            let d = tv_decay(&p, &c.stationary, 64);
            for t in 1..=64u64 {
                assert!(d[t as usize] <= c.envelope(t) + 1e-9);
            }
        }
    }

    #[test]
    fn t_max_includes_return_times() {
        let inst = BanditInstance::from_parts(&[vec![vec![0.7, 0.3], vec![0.4, 0.6]]], &[vec![0.0, 1.0]]).unwrap();
        let cert = ergodicity_certificate(&inst).unwrap();
        let expect = [1.0 / 0.3, 2.5, 7.0 / 4.0, 7.0 / 3.0].iter().copied().fold(0.0, f64::max) + 1.0;
        assert!((cert.t_max - expect).abs() < 1e-9);
    }

    #[test]
    fn product_bound_examples() {
        assert_eq!(product_difference_bound(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), (0.0, 0.0));
        let (l, r) = product_difference_bound(&[0.9, 0.9], &[1.0, 1.0]).unwrap();
        assert!((l - 0.19).abs() < 1e-12 && (r - 0.2).abs() < 1e-12);
        assert!(matches!(product_difference_bound(&[1.1], &[0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn pow_matches_repeated_mul() {
        let p = tm(&[&[0.7, 0.3], &[0.4, 0.6]]);
        let p2 = p.pow(2);
        assert!((p2.get(0, 0) - 0.61).abs() < 1e-12);
        let mut q = TransitionMatrix::identity(2);
        for _ in 0..13 {
            q = q.mul(&p);
        }
        assert!(q.l1_distance(&p.pow(13)) < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let p = tm(&[&[0.7, 0.3], &[0.4, 0.6]]);
        let s = serde_json::to_string(&p).unwrap();
        let q: TransitionMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<TransitionMatrix>("[[0.5,0.6],[0.5,0.5]]").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn rows_stay_stochastic(seed in any::<u64>(), n in 1usize..6, k in 0u64..200) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = random_transition(n, 0.0, &mut rng);
                for m in [p.pow(k), p.mul(&p)] {
                    for i in 0..n {
                        prop_assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn product_set_inequality(rho in proptest::collection::vec(0.0f64..=1.0, 1..=6), seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let other: Vec<f64> = rho.iter().map(|_| rng.gen_range(0.0..=1.0)).collect();
                let (l, r) = product_difference_bound(&rho, &other).unwrap();
                prop_assert!(l <= r + 1e-15);
            }
        }
    }
}
