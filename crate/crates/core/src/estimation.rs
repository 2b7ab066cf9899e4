//! Count tables, transition estimates and exploration schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

/// Per-arm play counts N^k, transition counts N^k_ij and row visits C^k_i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTables {
    sizes: Vec<usize>,
    plays: Vec<u64>,
    transitions: Vec<Vec<u64>>,
    visits: Vec<Vec<u64>>,
    version: u64,
}

impl CountTables {
    pub fn new(sizes: &[usize]) -> Self {
        CountTables {
            sizes: sizes.to_vec(),
            plays: vec![0; sizes.len()],
            transitions: sizes.iter().map(|&n| vec![0; n * n]).collect(),
            visits: sizes.iter().map(|&n| vec![0; n]).collect(),
            version: 0,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn plays(&self, arm: usize) -> u64 {
        self.plays[arm]
    }

    pub fn transition(&self, arm: usize, i: usize, j: usize) -> u64 {
        self.transitions[arm][i * self.sizes[arm] + j]
    }

    pub fn visits(&self, arm: usize, i: usize) -> u64 {
        self.visits[arm][i]
    }

    /// Bumped whenever a transition count changes.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Play `arm` and observe `obs`; `prev` is the previous (arm, observation).
    pub fn record_step(&mut self, prev: Option<(usize, usize)>, arm: usize, obs: usize) -> Result<()> {
        if arm >= self.k() || obs >= self.sizes[arm] {
            return Err(Error::Domain(format!("observation {obs} not in arm {arm}")));
        }
        self.plays[arm] += 1;
        if let Some((pa, po)) = prev {
            if pa == arm {
                if po >= self.sizes[arm] {
                    return Err(Error::Domain(format!("observation {po} not in arm {arm}")));
                }
                let n = self.sizes[arm];
                self.transitions[arm][po * n + obs] += 1;
                self.visits[arm][po] += 1;
                self.version += 1;
            }
        }
        Ok(())
    }
}

/// p̄ (indicator-prior ratios) and p̂ (row-normalized p̄).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedModel {
    pub raw: Vec<Vec<Vec<f64>>>,
    pub normalized: Vec<TransitionMatrix>,
}

pub fn estimate(tables: &CountTables) -> EstimatedModel {
    let mut raw = Vec::with_capacity(tables.k());
    let mut normalized = Vec::with_capacity(tables.k());
    for (k, &n) in tables.sizes.iter().enumerate() {
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let c = tables.visits[k][i];
            let den = if c == 0 { n as f64 } else { c as f64 };
            let row: Vec<f64> = (0..n)
                .map(|j| {
                    let m = tables.transitions[k][i * n + j];
                    (if m == 0 { 1.0 } else { m as f64 }) / den
                })
                .collect();
            rows.push(row);
        }
        let norm: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(move |x| x / s)
            })
            .collect();
        normalized.push(TransitionMatrix::from_flat(n, norm));
        raw.push(rows);
    }
    EstimatedModel { raw, normalized }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveGrowth {
    /// L(t) = 1 + ln(1 + ln t)
    LogLog,
    /// L(t) = t^exponent
    Power { exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationSchedule {
    Fixed { l: f64 },
    Adaptive { growth: AdaptiveGrowth },
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule::Fixed { l: 100.0 }
    }
}

impl ExplorationSchedule {
    pub fn loglog() -> Self {
        ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::LogLog }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ExplorationSchedule::Fixed { l } if !(l > 0.0 && l.is_finite()) => {
                Err(Error::Config(format!("exploration constant must be positive, got {l}")))
            }
            ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::Power { exponent } }
                if !(exponent > 0.0 && exponent.is_finite()) =>
            {
                Err(Error::Config(format!("growth exponent must be positive, got {exponent}")))
            }
            _ => Ok(()),
        }
    }

    /// L(t).
    pub fn l_value(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            ExplorationSchedule::Fixed { l } => l,
            ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::LogLog } => 1.0 + (1.0 + t.ln()).ln(),
            ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::Power { exponent } } => t.powf(exponent),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ExplorationSchedule::Fixed { l } => format!("L={l}"),
            ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::LogLog } => "L(t)=1+ln(1+ln t)".into(),
            ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::Power { exponent } } => {
                format!("L(t)=t^{exponent}")
            }
        }
    }
}

/// f(t) = L(t) ln t.
pub fn schedule_value(schedule: &ExplorationSchedule, t: u64) -> f64 {
    schedule.l_value(t) * (t.max(1) as f64).ln()
}

/// W = {(k, i) : C^k_i < f(t)} in lexicographic order.
pub fn exploration_set(tables: &CountTables, t: u64, schedule: &ExplorationSchedule) -> Vec<(usize, usize)> {
    let f = schedule_value(schedule, t);
    let mut w = Vec::new();
    for (k, row) in tables.visits.iter().enumerate() {
        for (i, &c) in row.iter().enumerate() {
            if (c as f64) < f {
                w.push((k, i));
            }
        }
    }
    w
}

/// Exceedance frequencies for one bucket of exploit times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationBucket {
    pub t_start: u64,
    pub t_end: u64,
    pub exploit_steps: u64,
    /// max over (k,i,j) of P̂(|p̄ − p| > ε, exploit)
    pub raw_frequency: f64,
    pub normalized_frequency: f64,
    /// bucket mean of 2/t²
    pub raw_envelope: f64,
    /// bucket mean of (2K+2)/t²
    pub normalized_envelope: f64,
}

impl ConcentrationBucket {
    pub fn within_envelope(&self) -> bool {
        self.raw_frequency <= self.raw_envelope && self.normalized_frequency <= self.normalized_envelope
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub epsilon: f64,
    pub l: f64,
    pub horizon: u64,
    pub runs: usize,
    pub buckets: Vec<ConcentrationBucket>,
}

impl ConcentrationReport {
    pub fn fraction_within(&self) -> f64 {
        if self.buckets.is_empty() {
            return 1.0;
        }
        self.buckets.iter().filter(|b| b.within_envelope()).count() as f64 / self.buckets.len() as f64
    }
}

/// Decade buckets [1,9], [10,99], ...; the last one runs to the horizon.
pub fn decade_buckets(horizon: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut lo = 1u64;
    while lo <= horizon {
        let hi = if lo * 10 >= horizon { horizon } else { lo * 10 - 1 };
        out.push((lo, hi));
        if hi == horizon {
            break;
        }
        lo *= 10;
    }
    out
}

/// Per-run exceedance events: for each exploit time, which (k,i,j) exceed ε.
#[derive(Debug, Clone, Default)]
pub struct ExceedanceTally {
    /// (bucket, flat (k,i,j)) → count, raw then normalized
    raw: Vec<Vec<u64>>,
    normalized: Vec<Vec<u64>>,
    exploit: Vec<u64>,
}

impl ExceedanceTally {
    pub fn new(n_buckets: usize, cells: usize) -> Self {
        ExceedanceTally {
            raw: vec![vec![0; cells]; n_buckets],
            normalized: vec![vec![0; cells]; n_buckets],
            exploit: vec![0; n_buckets],
        }
    }

    pub fn merge(&mut self, other: &ExceedanceTally) {
        for (a, b) in self.raw.iter_mut().zip(&other.raw) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.normalized.iter_mut().zip(&other.normalized) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.exploit.iter_mut().zip(&other.exploit).for_each(|(x, y)| *x += y);
    }

    /// Compare the current estimate against P at exploit time t.
    pub fn record(&mut self, bucket: usize, tables: &CountTables, p: &[TransitionMatrix], epsilon: f64) {
        let est = estimate(tables);
        self.exploit[bucket] += 1;
        let mut cell = 0;
        for (k, m) in p.iter().enumerate() {
            let n = m.n();
            for i in 0..n {
                for j in 0..n {
                    let truth = m.get(i, j);
                    if (est.raw[k][i][j] - truth).abs() > epsilon {
                        self.raw[bucket][cell] += 1;
                    }
                    if (est.normalized[k].get(i, j) - truth).abs() > epsilon {
                        self.normalized[bucket][cell] += 1;
                    }
                    cell += 1;
                }
            }
        }
    }

    pub fn into_report(self, epsilon: f64, l: f64, horizon: u64, runs: usize, k: usize) -> ConcentrationReport {
        let buckets = decade_buckets(horizon)
            .into_iter()
            .enumerate()
            .map(|(b, (lo, hi))| {
                let len = (hi - lo + 1) as f64;
                let denom = runs.max(1) as f64 * len;
                let inv_sq: f64 = (lo..=hi).map(|t| 1.0 / (t as f64 * t as f64)).sum::<f64>() / len;
                ConcentrationBucket {
                    t_start: lo,
                    t_end: hi,
                    exploit_steps: self.exploit[b],
                    raw_frequency: self.raw[b].iter().copied().max().unwrap_or(0) as f64 / denom,
                    normalized_frequency: self.normalized[b].iter().copied().max().unwrap_or(0) as f64 / denom,
                    raw_envelope: 2.0 * inv_sq,
                    normalized_envelope: (2 * k + 2) as f64 * inv_sq,
                }
            })
            .collect();
        ConcentrationReport { epsilon, l, horizon, runs, buckets }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn consecutive_plays_count() {
        let mut t = CountTables::new(&[2, 2]);
        t.record_step(None, 0, 0).unwrap();
        t.record_step(Some((0, 0)), 0, 1).unwrap();
        assert_eq!(t.transition(0, 0, 1), 1);
        assert_eq!(t.visits(0, 0), 1);
        assert_eq!(t.plays(0), 2);
    }

    #[test]
    fn alternating_plays_leave_transitions_empty() {
        let mut t = CountTables::new(&[2, 2]);
        let mut prev = None;
        for (arm, obs) in [(0, 1), (1, 0), (0, 0), (1, 1)] {
            t.record_step(prev, arm, obs).unwrap();
            prev = Some((arm, obs));
        }
        for k in 0..2 {
            for i in 0..2 {
                assert_eq!(t.visits(k, i), 0);
                for j in 0..2 {
                    assert_eq!(t.transition(k, i, j), 0);
                }
            }
        }
        assert_eq!(t.version(), 0);
    }

    #[test]
    fn bad_observation_rejected() {
        let mut t = CountTables::new(&[2]);
        assert!(matches!(t.record_step(None, 0, 2), Err(Error::Domain(_))));
        assert!(matches!(t.record_step(None, 1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn estimate_examples() {
        let t = CountTables::new(&[2]);
        let e = estimate(&t);
        assert_eq!(e.raw[0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(e.normalized[0].to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);

        let mut t = CountTables::new(&[2]);
        let mut prev = Some((0, 0));
        for j in std::iter::repeat(0).take(3).chain(std::iter::repeat(1).take(7)) {
            t.record_step(prev, 0, j).unwrap();
            prev = Some((0, 0));
        }
        let e = estimate(&t);
        assert!((e.raw[0][0][0] - 0.3).abs() < 1e-15 && (e.raw[0][0][1] - 0.7).abs() < 1e-15);
        assert!((e.normalized[0].get(0, 1) - 0.7).abs() < 1e-15);

        let mut t = CountTables::new(&[2]);
        for _ in 0..10 {
            t.record_step(Some((0, 0)), 0, 1).unwrap();
        }
        let e = estimate(&t);
        assert_eq!(e.raw[0][0], vec![0.1, 1.0]);
        assert!((e.normalized[0].get(0, 0) - 1.0 / 11.0).abs() < 1e-15);
        assert!((e.normalized[0].get(0, 1) - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn forced_plays_converge() {
        let p = TransitionMatrix::from_rows(&[vec![0.3, 0.5, 0.2], vec![0.6, 0.1, 0.3], vec![0.25, 0.25, 0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = CountTables::new(&[3]);
        let mut x = 0;
        let mut prev = None;
        for _ in 0..100_000 {
            t.record_step(prev, 0, x).unwrap();
            prev = Some((0, x));
            let u: f64 = rng.gen();
            let row = p.row(x);
            x = if u < row[0] { 0 } else if u < row[0] + row[1] { 1 } else { 2 };
        }
        assert!(estimate(&t).normalized[0].l1_distance(&p) < 0.02);
    }

    #[test]
    fn schedule_examples() {
        let fixed = ExplorationSchedule::Fixed { l: 10.0 };
        assert!((schedule_value(&fixed, 1)).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((fixed.l_value(3) * e.ln() - 10.0).abs() < 1e-12);
        let one = ExplorationSchedule::Fixed { l: 1.0 };
        assert!((schedule_value(&one, 100) - 4.605170185988092).abs() < 1e-12);
        assert_eq!(schedule_value(&ExplorationSchedule::loglog(), 1), 0.0);
        assert_eq!(ExplorationSchedule::loglog().l_value(1), 1.0);
        assert!(ExplorationSchedule::Fixed { l: 0.0 }.validate().is_err());
    }

    #[test]
    fn adaptive_growth_is_nondecreasing() {
        for s in [ExplorationSchedule::loglog(), ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::Power { exponent: 0.1 } }] {
            assert_eq!(s.l_value(1), 1.0);
            let probes: Vec<f64> = [1u64, 2, 10, 100, 10_000, 1_000_000_000].iter().map(|&t| s.l_value(t)).collect();
            assert!(probes.windows(2).all(|w| w[1] >= w[0]));
            assert!(probes.last().unwrap() > &3.0);
        }
    }

    #[test]
    fn exploration_set_examples() {
        let s = ExplorationSchedule::Fixed { l: 10.0 };
        let mut t = CountTables::new(&[2, 2]);
        assert!(exploration_set(&t, 1, &s).is_empty());
        for _ in 0..5 {
            t.record_step(Some((1, 0)), 1, 0).unwrap();
        }
        let w = exploration_set(&t, 2, &s);
        assert!(w.contains(&(1, 0)));
        assert_eq!(w.len(), 4);
    }

    #[test]
    fn decades() {
        assert_eq!(decade_buckets(10_000), vec![(1, 9), (10, 99), (100, 999), (1000, 10_000)]);
        assert_eq!(decade_buckets(10), vec![(1, 10)]);
        assert_eq!(decade_buckets(50), vec![(1, 9), (10, 50)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn counts_stay_consistent(plays in proptest::collection::vec((0usize..2, 0usize..3), 1..200)) {
                let mut t = CountTables::new(&[3, 3]);
                let mut prev = None;
                for (arm, obs) in plays {
                    t.record_step(prev, arm, obs).unwrap();
                    prev = Some((arm, obs));
                    for k in 0..2 {
                        for i in 0..3 {
                            let s: u64 = (0..3).map(|j| t.transition(k, i, j)).sum();
                            prop_assert_eq!(s, t.visits(k, i));
                        }
                    }
                }
                let e = estimate(&t);
                for k in 0..2 {
                    for i in 0..3 {
                        let s: f64 = (0..3).map(|j| e.normalized[k].get(i, j)).sum();
                        prop_assert!((s - 1.0).abs() < 1e-12);
                        let floor = 1.0 / (3.0 * (t.visits(k, i) as f64 + 3.0));
                        for j in 0..3 {
                            prop_assert!(e.normalized[k].get(i, j) >= floor);
                        }
                    }
                }
            }

            #[test]
            fn exploration_set_is_literal(visits in proptest::collection::vec(0u64..50, 4), t in 1u64..1000, l in 0.1f64..20.0) {
                let mut tab = CountTables::new(&[2, 2]);
                for (cell, &c) in visits.iter().enumerate() {
                    let (k, i) = (cell / 2, cell % 2);
                    for _ in 0..c {
                        tab.record_step(Some((k, i)), k, 0).unwrap();
                    }
                }
                let s = ExplorationSchedule::Fixed { l };
                let f = schedule_value(&s, t);
                let w = exploration_set(&tab, t, &s);
                for k in 0..2 {
                    for i in 0..2 {
                        prop_assert_eq!(w.contains(&(k, i)), (tab.visits(k, i) as f64) < f);
                    }
                }
            }
        }
    }
}
