use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::markov::{stationary_distribution, BanditInstance, TransitionMatrix};

/// Pre-sampled state paths of every arm; arm k uses ChaCha stream k of the
/// environment seed, so paths do not depend on which arms are played.
#[derive(Debug, Clone)]
pub struct Environment {
    paths: Vec<Vec<u16>>,
    rewards: Vec<Vec<f64>>,
    seed: u64,
}

fn sample(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

impl Environment {
    /// Initial states drawn from the stationary distributions.
    pub fn new(instance: &BanditInstance, steps: usize, seed: u64) -> Self {
        Self::build(instance, steps, seed, None)
    }

    pub fn with_initial(instance: &BanditInstance, steps: usize, seed: u64, initial: &[usize]) -> Self {
        Self::build(instance, steps, seed, Some(initial))
    }

    fn build(instance: &BanditInstance, steps: usize, seed: u64, initial: Option<&[usize]>) -> Self {
        let paths = instance
            .arms
            .iter()
            .enumerate()
            .map(|(k, arm)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                path(&arm.transition, steps, initial.map(|s| s[k]), &mut rng)
            })
            .collect();
        Environment { paths, rewards: instance.rewards(), seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.paths.first().map_or(0, |p| p.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// State of `arm` at absolute step `n` (0-based, initialization included).
    pub fn state(&self, arm: usize, n: usize) -> usize {
        self.paths[arm][n] as usize
    }

    pub fn reward(&self, arm: usize, state: usize) -> f64 {
        self.rewards[arm][state]
    }

    pub fn path(&self, arm: usize) -> &[u16] {
        &self.paths[arm]
    }
}

fn path(p: &TransitionMatrix, steps: usize, initial: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<u16> {
    let mut out = Vec::with_capacity(steps);
    if steps == 0 {
        return out;
    }
    let mut x = match initial {
        Some(s) => s,
        None => {
            let pi = stationary_distribution(p).unwrap_or_else(|_| vec![1.0 / p.n() as f64; p.n()]);
            sample(&pi, rng.gen())
        }
    };
    out.push(x as u16);
    for _ in 1..steps {
        x = sample(p.row(x), rng.gen());
        out.push(x as u16);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{validate_instance, ArmSpec, InstanceSpec, ValidationMode};

    fn cycle() -> BanditInstance {
        let spec = InstanceSpec {
            arms: vec![
                ArmSpec {
                    transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                    rewards: Some(vec![0.0, 1.0]),
                    labels: None,
                },
                ArmSpec {
                    transition: vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
                    rewards: Some(vec![0.0, 1.0, 2.0]),
                    labels: None,
                },
            ],
        };
        validate_instance(&spec, ValidationMode::Diagnostic).unwrap()
    }

    #[test]
    fn deterministic_cycles() {
        let env = Environment::with_initial(&cycle(), 7, 99, &[0, 2]);
        assert_eq!(env.path(0), &[0, 1, 0, 1, 0, 1, 0]);
        assert_eq!(env.path(1), &[2, 0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn paths_are_reproducible_and_independent() {
        let inst = BanditInstance::from_parts(
            &[vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.5, 0.5]]],
            &[vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let a = Environment::new(&inst, 500, 7);
        let b = Environment::new(&inst, 500, 7);
        let c = Environment::new(&inst, 500, 8);
        assert_eq!(a.path(0), b.path(0));
        assert_eq!(a.path(1), b.path(1));
        assert_ne!(a.path(0), c.path(0));
        assert_ne!(a.path(0), a.path(1));
        let short = Environment::new(&inst, 100, 7);
        assert_eq!(&a.path(1)[..100], short.path(1));
    }

    #[test]
    fn empirical_transitions() {
        let inst = BanditInstance::from_parts(&[vec![vec![0.9, 0.1], vec![0.4, 0.6]]], &[vec![0.0, 1.0]]).unwrap();
        let env = Environment::new(&inst, 200_000, 3);
        let p = env.path(0);
        let (mut n00, mut n0) = (0.0f64, 0.0f64);
        for w in p.windows(2) {
            if w[0] == 0 {
                n0 += 1.0;
                if w[1] == 0 {
                    n00 += 1.0;
                }
            }
        }
        assert!((n00 / n0 - 0.9).abs() < 0.005);
    }
}
