use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::env::Environment;
use crate::belief::InformationState;
use crate::error::{Error, Result};
use crate::markov::BanditInstance;

pub const RUN_CSV_HEADER: &str = "t,arm,observation,reward,phase";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Explore,
    Exploit,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub arm: usize,
    pub phase: Phase,
    /// Digest of the estimated belief the choice was made from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_hash: Option<u64>,
    /// Which index candidate attained the max.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    /// Optimal set the choice was drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_set: Option<Vec<usize>>,
}

impl Decision {
    pub fn new(arm: usize, phase: Phase) -> Self {
        Decision { arm, phase, belief_hash: None, origin: None, candidate_set: None }
    }
}

/// A decision rule that sees only its own plays and observations.
pub trait Policy: Send {
    fn name(&self) -> String;

    fn seed(&self) -> Option<u64> {
        None
    }

    /// Next arm after the initialization plays; `t` counts from 1.
    fn decide(&mut self, t: u64, horizon: u32) -> Result<Decision>;

    /// Result of a play, initialization included.
    fn observe(&mut self, arm: usize, obs: usize) -> Result<()>;
}

/// Tracks the information state from a policy's own observations.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoTracker {
    k: usize,
    init: Vec<usize>,
    info: Option<InformationState>,
}

impl InfoTracker {
    pub fn new(k: usize) -> Self {
        InfoTracker { k, init: Vec::with_capacity(k), info: None }
    }

    pub fn observe(&mut self, arm: usize, obs: usize) {
        match &mut self.info {
            Some(info) => {
                *info = info.advance(arm, obs);
            }
            None => {
                self.init.push(obs);
                if self.init.len() == self.k {
                    self.info = Some(InformationState::after_initialization(&self.init));
                }
            }
        }
    }

    pub fn info(&self) -> Result<&InformationState> {
        self.info.as_ref().ok_or_else(|| Error::Domain("initialization plays not finished".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1−K..0 for initialization, then 1..T.
    pub t: i64,
    pub arm: usize,
    pub observation: usize,
    pub reward: f64,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_hash: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_set: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy: String,
    pub env_seed: u64,
    pub agent_seed: Option<u64>,
    pub k: usize,
    pub steps: Vec<StepRecord>,
    /// Sum of every step's reward, initialization included.
    pub total_reward: f64,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.steps.len() - self.k
    }

    pub fn init_observations(&self) -> Vec<usize> {
        self.steps[..self.k].iter().map(|s| s.observation).collect()
    }

    pub fn initial_info(&self) -> InformationState {
        InformationState::after_initialization(&self.init_observations())
    }

    pub fn post_init(&self) -> &[StepRecord] {
        &self.steps[self.k..]
    }

    /// Reward collected over post-initialization steps 1..=t.
    pub fn reward_through(&self, t: usize) -> f64 {
        self.post_init()[..t].iter().map(|s| s.reward).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.steps.len() * 24);
        out.push_str(RUN_CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{},{},{}", s.t, s.arm, s.observation, s.reward, s.phase.as_str());
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Runs the K initialization plays and `horizon` decisions on a fresh environment.
pub fn simulate(instance: &BanditInstance, policy: &mut dyn Policy, horizon: u32, env_seed: u64) -> Result<RunRecord> {
    let env = Environment::new(instance, instance.k() + horizon as usize, env_seed);
    simulate_in(&env, instance.k(), policy, horizon)
}

pub fn simulate_in(env: &Environment, k: usize, policy: &mut dyn Policy, horizon: u32) -> Result<RunRecord> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let total = k + horizon as usize;
    if env.len() < total {
        return Err(Error::Config(format!("environment has {} steps, run needs {total}", env.len())));
    }
    let mut steps = Vec::with_capacity(total);
    let mut sum = 0.0;
    for arm in 0..k {
        let obs = env.state(arm, arm);
        let reward = env.reward(arm, obs);
        sum += reward;
        policy.observe(arm, obs)?;
        steps.push(StepRecord {
            t: arm as i64 + 1 - k as i64,
            arm,
            observation: obs,
            reward,
            phase: Phase::Init,
            belief_hash: None,
            origin: None,
            candidate_set: None,
        });
    }
    for t in 1..=horizon as u64 {
        let d = policy.decide(t, horizon)?;
        if d.arm >= k {
            return Err(Error::Domain(format!("policy chose arm {} of {k}", d.arm)));
        }
        let n = k + t as usize - 1;
        let obs = env.state(d.arm, n);
        let reward = env.reward(d.arm, obs);
        sum += reward;
        policy.observe(d.arm, obs)?;
        steps.push(StepRecord {
            t: t as i64,
            arm: d.arm,
            observation: obs,
            reward,
            phase: d.phase,
            belief_hash: d.belief_hash,
            origin: d.origin,
            candidate_set: d.candidate_set,
        });
    }
    Ok(RunRecord {
        policy: policy.name(),
        env_seed: env.seed(),
        agent_seed: policy.seed(),
        k,
        steps,
        total_reward: sum,
    })
}
