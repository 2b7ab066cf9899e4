use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{simulate, Phase, RunRecord};
use crate::ala::{AlaAgent, AlaConfig};
use crate::belief::{belief_distance, belief_of};
use crate::error::{Error, Result};
use crate::estimation::{decade_buckets, estimate, CountTables, ConcentrationReport, ExceedanceTally, ExplorationSchedule};
use crate::markov::{ergodicity_certificate, BanditInstance, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub epsilon: f64,
    pub horizon: u64,
    pub exploit_steps: u64,
    /// Exploit steps with ||ψ_t − ψ̂_t||_1 > ε.
    pub belief_error_events: u64,
    pub exploration_steps: u64,
    /// (Σ_k |S^k|)·L(T)·ln T·(1 + T_max)
    pub exploration_envelope: f64,
    pub t_max: f64,
}

impl DiagnosticsReport {
    pub fn within_envelope(&self) -> bool {
        self.exploration_steps as f64 <= self.exploration_envelope
    }
}

pub fn exploration_envelope(sizes: &[usize], schedule: &ExplorationSchedule, horizon: u64, t_max: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    n as f64 * schedule.l_value(horizon) * (horizon.max(1) as f64).ln() * (1.0 + t_max)
}

/// Replays the run's counts and compares estimated with true beliefs at
/// every exploit step. `estimates` overrides the count-based estimate.
pub fn diagnostics(
    run: &RunRecord,
    instance: &BanditInstance,
    schedule: &ExplorationSchedule,
    epsilon: f64,
    estimates: Option<&[TransitionMatrix]>,
) -> Result<DiagnosticsReport> {
    if !(epsilon >= 0.0) {
        return Err(Error::Config("epsilon must be nonnegative".into()));
    }
    let p = instance.transitions();
    let cert = ergodicity_certificate(instance)?;
    let mut tables = CountTables::new(&instance.sizes());
    let mut prev = None;
    for s in &run.steps[..run.k] {
        tables.record_step(prev, s.arm, s.observation)?;
        prev = Some((s.arm, s.observation));
    }
    let mut info = run.initial_info();
    let (mut exploit, mut events, mut explore) = (0u64, 0u64, 0u64);
    for s in run.post_init() {
        match s.phase {
            Phase::Explore => explore += 1,
            Phase::Exploit => {
                exploit += 1;
                if epsilon < 2.0 {
                    let p_hat = match estimates {
                        Some(e) => e.to_vec(),
                        None => estimate(&tables).normalized,
                    };
                    let d = belief_distance(&belief_of(&info, &p)?, &belief_of(&info, &p_hat)?)?;
                    if d > epsilon {
                        events += 1;
                    }
                }
            }
            Phase::Init => {}
        }
        tables.record_step(prev, s.arm, s.observation)?;
        prev = Some((s.arm, s.observation));
        info = info.advance(s.arm, s.observation);
    }
    let horizon = run.horizon() as u64;
    Ok(DiagnosticsReport {
        epsilon,
        horizon,
        exploit_steps: exploit,
        belief_error_events: events,
        exploration_steps: explore,
        exploration_envelope: exploration_envelope(&instance.sizes(), schedule, horizon, cert.t_max),
        t_max: cert.t_max,
    })
}

/// Replays counts along a run and tallies estimate exceedances at exploit times.
pub fn tally_run(run: &RunRecord, p: &[TransitionMatrix], epsilon: f64) -> Result<ExceedanceTally> {
    let horizon = run.horizon() as u64;
    let buckets = decade_buckets(horizon);
    let cells: usize = p.iter().map(|m| m.n() * m.n()).sum();
    let mut tally = ExceedanceTally::new(buckets.len(), cells);
    let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
    let mut tables = CountTables::new(&sizes);
    let mut prev = None;
    for s in &run.steps[..run.k] {
        tables.record_step(prev, s.arm, s.observation)?;
        prev = Some((s.arm, s.observation));
    }
    let mut bucket = 0;
    for s in run.post_init() {
        let t = s.t as u64;
        while buckets[bucket].1 < t {
            bucket += 1;
        }
        if s.phase == Phase::Exploit {
            tally.record(bucket, &tables, p, epsilon);
        }
        tables.record_step(prev, s.arm, s.observation)?;
        prev = Some((s.arm, s.observation));
    }
    Ok(tally)
}

/// ALA with fixed L over `runs` seeded replicates; estimate exceedance
/// frequencies per decade of exploit times.
pub fn concentration_report(
    instance: &BanditInstance,
    config: &AlaConfig,
    epsilon: f64,
    horizon: u32,
    runs: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if runs == 0 {
        return Err(Error::Config("need at least one run".into()));
    }
    let l = match config.schedule {
        ExplorationSchedule::Fixed { l } => l,
        _ => return Err(Error::Config("concentration report needs a fixed exploration constant".into())),
    };
    let p = instance.transitions();
    let tallies: Vec<ExceedanceTally> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut cfg = config.clone();
            cfg.seed = seed.wrapping_add(r).wrapping_mul(2).wrapping_add(1);
            let mut agent = AlaAgent::new(&instance.sizes(), &instance.rewards(), cfg)?;
            let run = simulate(instance, &mut agent, horizon, seed.wrapping_add(r))?;
            tally_run(&run, &p, epsilon)
        })
        .collect::<Result<_>>()?;
    let mut total = tallies[0].clone();
    for t in &tallies[1..] {
        total.merge(t);
    }
    Ok(total.into_report(epsilon, l, horizon as u64, runs, instance.k()))
}
