use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::index::compute_indices;
use crate::aroe::grid::BeliefGrid;
use crate::aroe::solver::{AroeModel, SolvedAroe, SolverOptions, DEFAULT_GAP_TOL};
use crate::belief::InformationState;
use crate::error::{Error, Result};
use crate::estimation::{estimate, exploration_set, CountTables, ExplorationSchedule};
use crate::markov::TransitionMatrix;
use crate::sim::run::{Decision, InfoTracker, Phase, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    DeterministicFirst,
    SeededUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Ala,
    /// Acts from the optimal set at the partition center.
    AlaFp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlaConfig {
    pub schedule: ExplorationSchedule,
    pub tau0: u32,
    pub index_budget: usize,
    pub tie_break: TieBreak,
    pub resolve_every: usize,
    pub seed: u64,
    /// Multiplies the confidence radius; 0 evaluates the center only.
    pub radius_scale: f64,
    pub variant: Variant,
    pub solver: SolverOptions,
}

impl Default for AlaConfig {
    fn default() -> Self {
        AlaConfig {
            schedule: ExplorationSchedule::default(),
            tau0: 8,
            index_budget: 8,
            tie_break: TieBreak::DeterministicFirst,
            resolve_every: 1,
            seed: 0,
            radius_scale: 1.0,
            variant: Variant::Ala,
            solver: SolverOptions::default(),
        }
    }
}

impl AlaConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.index_budget < 1 {
            return Err(Error::Config("index_budget must be at least 1".into()));
        }
        if self.resolve_every < 1 {
            return Err(Error::Config("resolve_every must be at least 1".into()));
        }
        if self.tau0 < 1 {
            return Err(Error::Config("tau0 must be at least 1".into()));
        }
        if !(self.radius_scale >= 0.0 && self.radius_scale.is_finite()) {
            return Err(Error::Config("radius_scale must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Ratio of values treated as a tie.
const TIE_TOL: f64 = 1e-12;

pub struct AlaAgent {
    config: AlaConfig,
    rewards: Vec<Vec<f64>>,
    grid: Arc<BeliefGrid>,
    tables: CountTables,
    tracker: InfoTracker,
    prev: Option<(usize, usize)>,
    injected: Option<Vec<TransitionMatrix>>,
    solved: Option<SolvedAroe>,
    solved_version: u64,
    since_solve: usize,
    solves: usize,
    t: u64,
    rng: ChaCha8Rng,
}

impl AlaAgent {
    /// Agent before the K initialization plays.
    pub fn new(sizes: &[usize], rewards: &[Vec<f64>], config: AlaConfig) -> Result<Self> {
        config.validate()?;
        if sizes.is_empty() || sizes.len() != rewards.len() {
            return Err(Error::Domain("need one reward vector per arm".into()));
        }
        let grid = Arc::new(BeliefGrid::build(sizes, config.tau0)?);
        Ok(AlaAgent {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            rewards: rewards.to_vec(),
            grid,
            tables: CountTables::new(sizes),
            tracker: InfoTracker::new(sizes.len()),
            prev: None,
            injected: None,
            solved: None,
            solved_version: 0,
            since_solve: 0,
            solves: 0,
            t: 0,
        })
    }

    /// Replaces the estimate with a fixed model.
    pub fn with_model(mut self, p: Vec<TransitionMatrix>) -> Self {
        self.injected = Some(p);
        self
    }

    pub fn tables(&self) -> &CountTables {
        &self.tables
    }

    pub fn info(&self) -> Result<&InformationState> {
        self.tracker.info()
    }

    pub fn clock(&self) -> u64 {
        self.t
    }

    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn solution(&self) -> Option<&SolvedAroe> {
        self.solved.as_ref()
    }

    pub fn config(&self) -> &AlaConfig {
        &self.config
    }

    fn ensure_solved(&mut self) -> Result<()> {
        let version = self.tables.version();
        let stale = match (&self.solved, &self.injected) {
            (None, _) => true,
            (Some(_), Some(_)) => false,
            (Some(_), None) => version != self.solved_version && self.since_solve >= self.config.resolve_every,
        };
        if !stale {
            self.since_solve += 1;
            return Ok(());
        }
        let p = match &self.injected {
            Some(p) => p.clone(),
            None => estimate(&self.tables).normalized,
        };
        let model = AroeModel::new(self.grid.clone(), &p, &self.rewards)?;
        let warm = self.solved.as_ref().map(|s| s.solution.bias.clone());
        let mut opts = self.config.solver;
        opts.allow_nonpositive |= self.injected.is_some();
        self.solved = Some(SolvedAroe::solve_warm(model, &opts, warm.as_deref())?);
        self.solved_version = version;
        self.since_solve = 1;
        self.solves += 1;
        Ok(())
    }

    fn pick(&mut self, values: &[f64]) -> usize {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOL * (1.0 + best.abs());
        let ties: Vec<usize> = (0..values.len()).filter(|&u| best - values[u] <= tol).collect();
        match self.config.tie_break {
            TieBreak::DeterministicFirst => ties[0],
            TieBreak::SeededUniform => ties[self.rng.gen_range(0..ties.len())],
        }
    }

    fn exploit(&mut self) -> Result<Decision> {
        let k = self.tables.k();
        if k == 1 {
            return Ok(Decision::new(0, Phase::Exploit));
        }
        self.ensure_solved()?;
        let solved = self.solved.as_ref().expect("solved above");
        let info = self.tracker.info()?.clone();
        let psi = solved.model.belief_of(&info);
        let hash = psi.digest();
        match self.config.variant {
            Variant::Ala => {
                let plays: Vec<u64> = (0..k).map(|u| self.tables.plays(u)).collect();
                let idx = compute_indices(
                    solved,
                    &info,
                    &psi,
                    self.t,
                    &plays,
                    self.config.radius_scale,
                    self.config.index_budget,
                    &mut self.rng,
                )?;
                let values: Vec<f64> = idx.iter().map(|v| v.value).collect();
                let arm = self.pick(&values);
                let mut d = Decision::new(arm, Phase::Exploit);
                d.belief_hash = Some(hash);
                d.origin = Some(idx[arm].origin.label());
                Ok(d)
            }
            Variant::AlaFp => {
                let point = solved
                    .grid()
                    .index_of(&info)
                    .ok_or_else(|| Error::Domain("information state outside the partition".into()))?;
                let set = solved.optimal_set_at_point(point, DEFAULT_GAP_TOL);
                let mut d = Decision::new(set[0], Phase::Exploit);
                d.belief_hash = Some(hash);
                d.candidate_set = Some(set);
                Ok(d)
            }
        }
    }
}

impl Policy for AlaAgent {
    fn name(&self) -> String {
        match self.config.variant {
            Variant::Ala => "ala".into(),
            Variant::AlaFp => "ala_fp".into(),
        }
    }

    fn seed(&self) -> Option<u64> {
        Some(self.config.seed)
    }

    fn decide(&mut self, _t: u64, _horizon: u32) -> Result<Decision> {
        self.tracker.info()?;
        self.t += 1;
        let w = exploration_set(&self.tables, self.t, &self.config.schedule);
        if w.is_empty() {
            return self.exploit();
        }
        let prev_arm = self.prev.map(|p| p.0).unwrap_or(self.tables.k() - 1);
        let arm = if w.iter().any(|&(k, _)| k == prev_arm) { prev_arm } else { w[0].0 };
        Ok(Decision::new(arm, Phase::Explore))
    }

    fn observe(&mut self, arm: usize, obs: usize) -> Result<()> {
        self.tables.record_step(self.prev, arm, obs)?;
        self.prev = Some((arm, obs));
        self.tracker.observe(arm, obs);
        Ok(())
    }
}

/// Smallest τ0 (up to `cap`) at which h varies by less than span(h)/(2T)
/// across the probed members of every aggregate set.
pub fn auto_tau0(
    p: &[TransitionMatrix],
    rewards: &[Vec<f64>],
    horizon: u32,
    tau_probe: u32,
    cap: u32,
    opts: &SolverOptions,
) -> Result<(u32, f64, f64)> {
    let sizes: Vec<usize> = p.iter().map(|m| m.n()).collect();
    let mut last = (cap, f64::INFINITY, 0.0);
    for tau0 in 1..=cap {
        let grid = Arc::new(BeliefGrid::build(&sizes, tau0)?);
        let solved = SolvedAroe::solve(AroeModel::new(grid, p, rewards)?, opts)?;
        let tol = solved.solution.bias_span() / (2.0 * horizon.max(1) as f64);
        let var = crate::aroe::partition::aggregate_bias_variation(&solved, tau_probe);
        last = (tau0, var, tol);
        if var < tol || var == 0.0 {
            return Ok(last);
        }
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aroe::solver::solve_instance;
    use crate::markov::{random_instance, BanditInstance};
    use crate::sim::run::simulate;

    fn dominance() -> BanditInstance {
        BanditInstance::from_parts(
            &[vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.5, 0.5]]],
            &[vec![1.0, 1.0], vec![0.0, 0.0]],
        )
        .unwrap()
    }

    fn agent(inst: &BanditInstance, config: AlaConfig) -> AlaAgent {
        AlaAgent::new(&inst.sizes(), &inst.rewards(), config).unwrap()
    }

    #[test]
    fn initialization_taus() {
        for k in 1..=3usize {
            let sizes = vec![2; k];
            let rewards = vec![vec![0.0, 1.0]; k];
            let mut a = AlaAgent::new(&sizes, &rewards, AlaConfig::default()).unwrap();
            for arm in 0..k {
                a.observe(arm, 0).unwrap();
            }
            let expect: Vec<u64> = (1..=k as u64).rev().collect();
            assert_eq!(a.info().unwrap().tau, expect);
            assert_eq!(a.clock(), 0);
        }
    }

    #[test]
    fn first_step_exploits_with_uniform_estimate() {
        let inst = dominance();
        let mut a = agent(&inst, AlaConfig::default());
        a.observe(0, 0).unwrap();
        a.observe(1, 1).unwrap();
        let d = a.decide(1, 10).unwrap();
        assert_eq!(d.phase, Phase::Exploit);
        let p = a.solution().unwrap().model.transitions();
        assert_eq!(p[0].to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn explore_keeps_previous_arm() {
        let inst = dominance();
        let mut a = agent(&inst, AlaConfig { schedule: ExplorationSchedule::Fixed { l: 10.0 }, ..Default::default() });
        a.observe(0, 0).unwrap();
        a.observe(1, 0).unwrap();
        a.decide(1, 100).unwrap();
        a.observe(0, 1).unwrap();
        let d = a.decide(2, 100).unwrap();
        assert_eq!(d.phase, Phase::Explore);
        assert_eq!(d.arm, 0);
        // arm 1's rows still deficient, arm 0 satisfied: prev arm 1 is kept
        let mut b = agent(&inst, AlaConfig { schedule: ExplorationSchedule::Fixed { l: 0.5 }, ..Default::default() });
        b.observe(0, 0).unwrap();
        b.observe(1, 0).unwrap();
        b.decide(1, 100).unwrap();
        b.observe(1, 1).unwrap();
        let d = b.decide(2, 100).unwrap();
        assert_eq!(d.phase, Phase::Explore);
        assert_eq!(d.arm, 1);
    }

    #[test]
    fn phase_matches_exploration_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_instance(&[2, 2], 0.1, &mut rng);
        let config = AlaConfig { schedule: ExplorationSchedule::Fixed { l: 2.0 }, tau0: 4, ..Default::default() };
        let run = simulate(&inst, &mut agent(&inst, config.clone()), 400, 3).unwrap();
        let mut tables = CountTables::new(&[2, 2]);
        let mut prev = None;
        for s in &run.steps {
            if s.t >= 1 {
                let w = exploration_set(&tables, s.t as u64, &config.schedule);
                assert_eq!(s.phase == Phase::Exploit, w.is_empty());
            }
            tables.record_step(prev, s.arm, s.observation).unwrap();
            prev = Some((s.arm, s.observation));
        }
    }

    #[test]
    fn dominance_with_true_model() {
        let inst = dominance();
        for variant in [Variant::Ala, Variant::AlaFp] {
            let config = AlaConfig { variant, schedule: ExplorationSchedule::Fixed { l: 1.0 }, ..Default::default() };
            let mut a = agent(&inst, config).with_model(inst.transitions());
            let run = simulate(&inst, &mut a, 300, 11).unwrap();
            let exploits: Vec<_> = run.post_init().iter().filter(|s| s.phase == Phase::Exploit).collect();
            assert!(!exploits.is_empty());
            assert!(exploits.iter().all(|s| s.arm == 0));
        }
    }

    #[test]
    fn greedy_with_true_model_is_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(&[2, 2], 0.1, &mut rng);
        let config = AlaConfig { radius_scale: 0.0, schedule: ExplorationSchedule::Fixed { l: 1.0 }, ..Default::default() };
        let solved = solve_instance(&inst.transitions(), &inst.rewards(), config.tau0, &SolverOptions::default()).unwrap();
        let mut a = agent(&inst, config).with_model(inst.transitions());
        let run = simulate(&inst, &mut a, 500, 2).unwrap();
        let mut tracker = InfoTracker::new(2);
        for s in &run.steps {
            if s.phase == Phase::Exploit {
                let opt = solved.optimal_action_set(tracker.info().unwrap(), 1e-9);
                assert!(opt.contains(&s.arm));
            }
            tracker.observe(s.arm, s.observation);
        }
    }

    #[test]
    fn fp_choice_in_center_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = random_instance(&[2, 2], 0.1, &mut rng);
        let config = AlaConfig { variant: Variant::AlaFp, schedule: ExplorationSchedule::Fixed { l: 3.0 }, tau0: 5, ..Default::default() };
        let run = simulate(&inst, &mut agent(&inst, config), 800, 6).unwrap();
        let mut n = 0;
        for s in run.post_init() {
            if s.phase == Phase::Exploit {
                let set = s.candidate_set.as_ref().unwrap();
                assert!(set.contains(&s.arm) && s.arm == set[0]);
                n += 1;
            }
        }
        assert!(n > 0);
    }

    #[test]
    fn fp_matches_greedy_at_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let inst = random_instance(&[2, 2], 0.1, &mut rng);
        let s = solve_instance(&inst.transitions(), &inst.rewards(), 6, &SolverOptions::default()).unwrap();
        for tau in 2..5u64 {
            for s0 in 0..2 {
                let info = InformationState::new(vec![s0, 1 - s0], vec![tau, 1]).unwrap();
                let p = s.grid().index_of(&info).unwrap();
                let fp = s.optimal_set_at_point(p, DEFAULT_GAP_TOL)[0];
                let av = s.action_values(&info);
                let greedy = if av[1] > av[0] { 1 } else { 0 };
                assert_eq!(fp, greedy);
            }
        }
    }

    #[test]
    fn symmetric_fp_is_reproducible() {
        let rows = vec![vec![0.4, 0.6], vec![0.3, 0.7]];
        let inst = BanditInstance::from_parts(&[rows.clone(), rows], &[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let config = AlaConfig { variant: Variant::AlaFp, seed: 5, schedule: ExplorationSchedule::Fixed { l: 1.0 }, ..Default::default() };
        let a = simulate(&inst, &mut agent(&inst, config.clone()), 300, 1).unwrap();
        let b = simulate(&inst, &mut agent(&inst, config), 300, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn same_seeds_same_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inst = random_instance(&[2, 2], 0.1, &mut rng);
        let config = AlaConfig { tie_break: TieBreak::SeededUniform, seed: 77, schedule: ExplorationSchedule::Fixed { l: 2.0 }, ..Default::default() };
        let a = simulate(&inst, &mut agent(&inst, config.clone()), 600, 4).unwrap();
        let b = simulate(&inst, &mut agent(&inst, config), 600, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_arm_never_solves() {
        let inst = BanditInstance::from_parts(&[vec![vec![0.9, 0.1], vec![0.1, 0.9]]], &[vec![1.0, 2.0]]).unwrap();
        let mut a = agent(&inst, AlaConfig { schedule: ExplorationSchedule::Fixed { l: 1.0 }, ..Default::default() });
        let run = simulate(&inst, &mut a, 200, 1).unwrap();
        assert!(run.post_init().iter().all(|s| s.arm == 0));
        assert_eq!(a.solves(), 0);
    }

    #[test]
    fn resolve_every_limits_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let inst = random_instance(&[2, 2], 0.1, &mut rng);
        let base = AlaConfig { schedule: ExplorationSchedule::Fixed { l: 1.0 }, tau0: 4, ..Default::default() };
        let mut a = agent(&inst, base.clone());
        simulate(&inst, &mut a, 400, 2).unwrap();
        let mut b = agent(&inst, AlaConfig { resolve_every: 50, ..base });
        simulate(&inst, &mut b, 400, 2).unwrap();
        assert!(b.solves() < a.solves());
        assert!(b.solves() >= 1);
    }

    #[test]
    fn auto_tau0_meets_tolerance() {
        let inst = BanditInstance::from_parts(
            &[vec![vec![0.7, 0.3], vec![0.3, 0.7]], vec![vec![0.3, 0.7], vec![0.2, 0.8]]],
            &[vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let (tau0, var, tol) = auto_tau0(&inst.transitions(), &inst.rewards(), 4000, 32, 64, &SolverOptions::default()).unwrap();
        assert!(var < tol, "tau0={tau0} var={var} tol={tol}");
        let (short, _, _) = auto_tau0(&inst.transitions(), &inst.rewards(), 10, 32, 64, &SolverOptions::default()).unwrap();
        assert!(short <= tau0);
    }
}
