use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ala::{AlaConfig, TieBreak, Variant};
use crate::aroe::solver::SolverOptions;
use crate::error::{Error, Result};
use crate::estimation::{AdaptiveGrowth, ExplorationSchedule};
use crate::markov::{random_instance, validate_instance, BanditInstance, InstanceSpec, ValidationMode};

pub const GENERATORS: &[&str] = &["acceptance", "random", "cycles"];

/// Inline arms or a named generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Generator {
        generator: String,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_entry: Option<f64>,
    },
    Inline(InstanceSpec),
}

/// 2 arms, 2 states, every entry in [0.2, 0.8].
pub fn acceptance_instance() -> BanditInstance {
    BanditInstance::from_parts(
        &[vec![vec![0.7, 0.3], vec![0.3, 0.7]], vec![vec![0.3, 0.7], vec![0.2, 0.8]]],
        &[vec![0.0, 1.0], vec![0.0, 1.0]],
    )
    .expect("fixed instance is valid")
}

/// Deterministic cycles of the given lengths, reward i/(n−1) in state i.
pub fn cycle_spec(sizes: &[usize]) -> InstanceSpec {
    let arms = sizes
        .iter()
        .map(|&n| {
            let transition = (0..n)
                .map(|i| (0..n).map(|j| if j == (i + 1) % n { 1.0 } else { 0.0 }).collect())
                .collect();
            let rewards = (0..n).map(|i| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 }).collect();
            crate::markov::ArmSpec { transition, rewards: Some(rewards), labels: None }
        })
        .collect();
    InstanceSpec { arms }
}

impl InstanceSource {
    pub fn build(&self, mode: ValidationMode) -> Result<BanditInstance> {
        match self {
            InstanceSource::Inline(spec) => validate_instance(spec, mode),
            InstanceSource::Generator { generator, seed, sizes, min_entry } => match generator.as_str() {
                "acceptance" => Ok(acceptance_instance()),
                "random" => {
                    let sizes = sizes.clone().unwrap_or_else(|| vec![2, 2]);
                    if sizes.is_empty() || sizes.contains(&0) {
                        return Err(Error::Config("random generator needs nonzero sizes".into()));
                    }
                    let m = min_entry.unwrap_or(0.05);
                    if !(0.0..=1.0).contains(&m) {
                        return Err(Error::Config(format!("min_entry {m} outside [0, 1]")));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    Ok(random_instance(&sizes, m, &mut rng))
                }
                "cycles" => {
                    let sizes = sizes.clone().unwrap_or_else(|| vec![2, 3]);
                    validate_instance(&cycle_spec(&sizes), ValidationMode::Diagnostic)
                }
                other => Err(Error::Config(format!("unknown generator {other:?}; known: {}", GENERATORS.join(", ")))),
            },
        }
    }
}

/// A number is a fixed L, a string names a growth function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Fixed(f64),
    Named(String),
    Full(ExplorationSchedule),
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<ExplorationSchedule> {
        let s = match self {
            ScheduleSpec::Fixed(l) => ExplorationSchedule::Fixed { l: *l },
            ScheduleSpec::Named(n) => match n.as_str() {
                "loglog" | "log_log" => ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::LogLog },
                other => return Err(Error::Config(format!("unknown schedule {other:?}"))),
            },
            ScheduleSpec::Full(s) => *s,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tau0Spec {
    Fixed(u32),
    Auto(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlaParams {
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_tau0")]
    pub tau0: Tau0Spec,
    /// Horizon used by automatic τ0 selection; defaults to the largest probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0_horizon: Option<u32>,
    #[serde(default = "default_budget")]
    pub index_budget: usize,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "default_one")]
    pub resolve_every: usize,
    #[serde(default = "default_radius_scale")]
    pub radius_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_schedule() -> ScheduleSpec {
    ScheduleSpec::Fixed(100.0)
}
fn default_tau0() -> Tau0Spec {
    Tau0Spec::Fixed(8)
}
fn default_budget() -> usize {
    8
}
fn default_one() -> usize {
    1
}
fn default_radius_scale() -> f64 {
    1.0
}

impl Default for AlaParams {
    fn default() -> Self {
        AlaParams {
            schedule: default_schedule(),
            tau0: default_tau0(),
            tau0_horizon: None,
            index_budget: 8,
            tie_break: TieBreak::DeterministicFirst,
            resolve_every: 1,
            radius_scale: 1.0,
            label: None,
        }
    }
}

impl AlaParams {
    /// Agent configuration; `auto` supplies τ0 when it is "auto".
    pub fn to_config(&self, variant: Variant, seed: u64, auto: Option<u32>) -> Result<AlaConfig> {
        let tau0 = match &self.tau0 {
            Tau0Spec::Fixed(t) => *t,
            Tau0Spec::Auto(s) if s == "auto" => {
                auto.ok_or_else(|| Error::Config("tau0 \"auto\" was not resolved".into()))?
            }
            Tau0Spec::Auto(s) => return Err(Error::Config(format!("tau0 must be an integer or \"auto\", got {s:?}"))),
        };
        let cfg = AlaConfig {
            schedule: self.schedule.resolve()?,
            tau0,
            index_budget: self.index_budget,
            tie_break: self.tie_break,
            resolve_every: self.resolve_every,
            seed,
            radius_scale: self.radius_scale,
            variant,
            solver: SolverOptions::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_auto(&self) -> bool {
        matches!(self.tau0, Tau0Spec::Auto(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Ala(AlaParams),
    AlaFp(AlaParams),
    FixedArm { arm: usize },
    Random,
    Myopic,
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Ala(p) => p.label.clone().unwrap_or_else(|| "ala".into()),
            AlgorithmSpec::AlaFp(p) => p.label.clone().unwrap_or_else(|| "ala_fp".into()),
            AlgorithmSpec::FixedArm { arm } => format!("fixed_arm_{arm}"),
            AlgorithmSpec::Random => "random".into(),
            AlgorithmSpec::Myopic => "myopic".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegretSelection {
    #[default]
    Exact,
    Delta,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub instance: InstanceSource,
    #[serde(default)]
    pub validation: ValidationMode,
    pub algorithms: Vec<AlgorithmSpec>,
    pub horizons: Vec<u32>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub regret_mode: RegretSelection,
    /// τ0 of the true-model solution behind delta-mode regret.
    #[serde(default = "default_delta_tau0")]
    pub delta_tau0: u32,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_delta_tau0() -> u32 {
    8
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked before any run starts.
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons[0] == 0 {
            return Err(Error::Config("horizons must be nonempty and positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("horizons must be strictly ascending".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms".into()));
        }
        if self.delta_tau0 < 1 {
            return Err(Error::Config("delta_tau0 must be at least 1".into()));
        }
        let inst = self.instance.build(self.validation)?;
        let mut labels = Vec::new();
        for a in &self.algorithms {
            match a {
                AlgorithmSpec::Ala(p) | AlgorithmSpec::AlaFp(p) => {
                    let variant = if matches!(a, AlgorithmSpec::Ala(_)) { Variant::Ala } else { Variant::AlaFp };
                    if p.is_auto() && variant == Variant::Ala {
                        return Err(Error::Config("automatic tau0 is only defined for ala_fp".into()));
                    }
                    p.to_config(variant, 0, Some(1))?;
                }
                AlgorithmSpec::FixedArm { arm } if *arm >= inst.k() => {
                    return Err(Error::Config(format!("fixed_arm {arm} but the instance has {} arms", inst.k())));
                }
                _ => {}
            }
            let l = a.label();
            if labels.contains(&l) {
                return Err(Error::Config(format!("duplicate algorithm label {l:?}")));
            }
            labels.push(l);
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> u32 {
        *self.horizons.last().expect("validated")
    }

    /// Canonical JSON of the parsed config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex(&Sha256::digest(c.canonical_json().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SplitMix64 finalizer over the tags, for per-run seeds.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(t);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "instance": {"generator": "acceptance"},
            "algorithms": [{"kind": "ala"}, {"kind": "fixed_arm", "arm": 1}, {"kind": "random"}],
            "horizons": [10, 20, 40, 80],
            "replicates": 2,
            "seed": 3
        })
    }

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(&base().to_string()).unwrap();
        assert_eq!(c.regret_mode, RegretSelection::Exact);
        assert_eq!(c.output_dir, PathBuf::from("results"));
        match &c.algorithms[0] {
            AlgorithmSpec::Ala(p) => {
                let cfg = p.to_config(Variant::Ala, 1, None).unwrap();
                assert_eq!(cfg.schedule, ExplorationSchedule::Fixed { l: 100.0 });
                assert_eq!(cfg.tau0, 8);
            }
            _ => panic!(),
        }
        assert_eq!(c.algorithms[1].label(), "fixed_arm_1");
    }

    #[test]
    fn schedule_forms() {
        let mut v = base();
        v["algorithms"] = serde_json::json!([
            {"kind": "ala", "schedule": 150, "label": "a"},
            {"kind": "ala", "schedule": "loglog", "label": "b"},
            {"kind": "ala", "schedule": {"kind": "adaptive", "growth": {"power": {"exponent": 0.5}}}, "label": "c"},
            {"kind": "ala_fp", "tau0": "auto"}
        ]);
        let c = ExperimentConfig::from_json(&v.to_string()).unwrap();
        let scheds: Vec<_> = c.algorithms[..3]
            .iter()
            .map(|a| match a {
                AlgorithmSpec::Ala(p) => p.schedule.resolve().unwrap(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(scheds[0], ExplorationSchedule::Fixed { l: 150.0 });
        assert_eq!(scheds[1], ExplorationSchedule::loglog());
        assert_eq!(scheds[2], ExplorationSchedule::Adaptive { growth: AdaptiveGrowth::Power { exponent: 0.5 } });
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            ("algorithms", serde_json::json!([{"kind": "ucb"}])),
            ("horizons", serde_json::json!([20, 10])),
            ("horizons", serde_json::json!([])),
            ("replicates", serde_json::json!(0)),
            ("instance", serde_json::json!({"generator": "nope"})),
            ("algorithms", serde_json::json!([{"kind": "fixed_arm", "arm": 2}])),
            ("algorithms", serde_json::json!([{"kind": "random"}, {"kind": "random"}])),
            ("algorithms", serde_json::json!([{"kind": "ala", "schedule": -1.0}])),
            ("algorithms", serde_json::json!([{"kind": "ala", "tau0": "auto"}])),
            ("algorithms", serde_json::json!([{"kind": "ala", "bogus": 1}])),
        ];
        for (k, v) in cases {
            let mut c = base();
            c[k] = v.clone();
            assert!(matches!(ExperimentConfig::from_json(&c.to_string()), Err(Error::Config(_))), "{k}: {v}");
        }
        let mut c = base();
        c["extra"] = serde_json::json!(1);
        assert!(ExperimentConfig::from_json(&c.to_string()).is_err());
    }

    #[test]
    fn inline_instances() {
        let mut v = base();
        v["instance"] = serde_json::json!({"arms": [
            {"transition": [[0.0, 1.0], [1.0, 0.0]], "rewards": [0.0, 1.0]}
        ]});
        v["algorithms"] = serde_json::json!([{"kind": "fixed_arm", "arm": 0}]);
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Ergodicity { .. })));
        v["validation"] = serde_json::json!("diagnostic");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_ok());
    }

    #[test]
    fn hash_is_stable() {
        let a = ExperimentConfig::from_json(&base().to_string()).unwrap();
        let b = ExperimentConfig::from_json(&serde_json::to_string_pretty(&base()).unwrap()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), c.hash());
        c.seed += 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn seeds_differ_by_tag() {
        let s: std::collections::BTreeSet<u64> =
            (0..100).flat_map(|a| (0..10).map(move |r| derive_seed(7, &[a, r]))).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
    }
}
