use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{MemoOracle, OracleOptions};
use super::run::{Decision, InfoTracker, Phase, Policy};
use crate::aroe::solver::{expected_reward, SolvedAroe};
use crate::belief::PowerTable;
use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

pub struct FixedArm {
    pub arm: usize,
}

impl Policy for FixedArm {
    fn name(&self) -> String {
        format!("fixed_arm:{}", self.arm)
    }

    fn decide(&mut self, _t: u64, _horizon: u32) -> Result<Decision> {
        Ok(Decision::new(self.arm, Phase::Exploit))
    }

    fn observe(&mut self, _arm: usize, _obs: usize) -> Result<()> {
        Ok(())
    }
}

/// Uniformly random arm every step.
pub struct RandomArm {
    k: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomArm {
    pub fn new(k: usize, seed: u64) -> Self {
        RandomArm { k, seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomArm {
    fn name(&self) -> String {
        "random".into()
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }

    fn decide(&mut self, _t: u64, _horizon: u32) -> Result<Decision> {
        Ok(Decision::new(self.rng.gen_range(0..self.k), Phase::Exploit))
    }

    fn observe(&mut self, _arm: usize, _obs: usize) -> Result<()> {
        Ok(())
    }
}

/// Belief-greedy on expected immediate reward under the true model.
pub struct Myopic {
    powers: PowerTable,
    rewards: Vec<Vec<f64>>,
    tracker: InfoTracker,
}

impl Myopic {
    pub fn new(p: &[TransitionMatrix], rewards: &[Vec<f64>]) -> Result<Self> {
        Ok(Myopic { powers: PowerTable::new(p, 64)?, rewards: rewards.to_vec(), tracker: InfoTracker::new(p.len()) })
    }
}

impl Policy for Myopic {
    fn name(&self) -> String {
        "myopic".into()
    }

    fn decide(&mut self, _t: u64, _horizon: u32) -> Result<Decision> {
        let b = self.powers.belief_of(self.tracker.info()?);
        let vals: Vec<f64> = (0..b.k()).map(|u| expected_reward(&b, u, &self.rewards)).collect();
        Ok(Decision::new(argmax_first(&vals), Phase::Exploit))
    }

    fn observe(&mut self, arm: usize, obs: usize) -> Result<()> {
        self.tracker.observe(arm, obs);
        Ok(())
    }
}

/// Greedy on the action values of a solved AROE.
pub struct AroeGreedy {
    solved: Arc<SolvedAroe>,
    tracker: InfoTracker,
}

impl AroeGreedy {
    pub fn new(solved: Arc<SolvedAroe>) -> Self {
        let k = solved.k();
        AroeGreedy { solved, tracker: InfoTracker::new(k) }
    }
}

impl Policy for AroeGreedy {
    fn name(&self) -> String {
        "aroe_greedy".into()
    }

    fn decide(&mut self, _t: u64, _horizon: u32) -> Result<Decision> {
        let vals = self.solved.action_values(self.tracker.info()?);
        Ok(Decision::new(argmax_first(&vals), Phase::Exploit))
    }

    fn observe(&mut self, arm: usize, obs: usize) -> Result<()> {
        self.tracker.observe(arm, obs);
        Ok(())
    }
}

/// Follows the exact finite-horizon optimal policy for the run's horizon.
pub struct OraclePolicy {
    oracle: MemoOracle,
    tracker: InfoTracker,
}

impl OraclePolicy {
    pub fn new(p: &[TransitionMatrix], rewards: &[Vec<f64>], horizon: u32) -> Result<Self> {
        let opts = OracleOptions { keep_policy: false, ..Default::default() };
        Ok(OraclePolicy {
            oracle: MemoOracle::new(p, rewards, p.len() as u64 + horizon as u64, opts)?,
            tracker: InfoTracker::new(p.len()),
        })
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn decide(&mut self, t: u64, horizon: u32) -> Result<Decision> {
        if t > horizon as u64 {
            return Err(Error::Domain("oracle policy asked past its horizon".into()));
        }
        let left = horizon - t as u32 + 1;
        let info = self.tracker.info()?.clone();
        Ok(Decision::new(self.oracle.action_of(&info, left)?, Phase::Exploit))
    }

    fn observe(&mut self, arm: usize, obs: usize) -> Result<()> {
        self.tracker.observe(arm, obs);
        Ok(())
    }
}

pub(crate) fn argmax_first(vals: &[f64]) -> usize {
    let mut best = 0;
    for (u, &v) in vals.iter().enumerate() {
        if v > vals[best] {
            best = u;
        }
    }
    best
}
