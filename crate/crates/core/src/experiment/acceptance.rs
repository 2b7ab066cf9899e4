//! Acceptance criteria: exact oracle, gain, sandwich, regret shape,
//! adaptive schedule, finite partition, concentration, inequalities and
//! determinism.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{acceptance_instance, derive_seed, ExperimentConfig};
use super::fit::fit_log_curve;
use super::runner::{run_experiment, CriterionOutcome, ExperimentOutcome, RunOptions};
use crate::ala::AlaConfig;
use crate::aroe::sandwich::check_finite_horizon_sandwich;
use crate::aroe::solver::{solve_instance, SolverOptions};
use crate::belief::{belief_distance, perturbation_bound, Belief, InformationState};
use crate::error::{Error, Result};
use crate::estimation::ExplorationSchedule;
use crate::markov::{
    ergodicity_certificate, product_difference_bound, random_instance, random_transition, BanditInstance,
    TransitionMatrix,
};
use crate::sim::baselines::AroeGreedy;
use crate::sim::diagnostics::{concentration_report, exploration_envelope};
use crate::sim::env::Environment;
use crate::sim::oracle::{finite_horizon_oracle, OracleOptions};
use crate::sim::regret::RegretMode;
use crate::sim::run::{Phase, Policy, RunRecord};
use crate::sim::verify::brute_force_value;

pub const ORACLE_INSTANCES: usize = 20;
pub const ORACLE_HORIZON: u32 = 6;
pub const ORACLE_TOL: f64 = 1e-9;
pub const ORACLE_SECONDS: f64 = 60.0;

pub const GAIN_INSTANCES: usize = 10;
pub const GAIN_STEPS: u32 = 1_000_000;
pub const GAIN_TOL: f64 = 0.01;
pub const GAIN_SECONDS: f64 = 300.0;
pub const GAIN_TAU0: u32 = 8;

pub const SANDWICH_INSTANCES: usize = 5;
pub const SANDWICH_MAX_T: u32 = 8;
pub const SANDWICH_SLACK: f64 = 1e-6;
pub const SANDWICH_TAU0: u32 = 4;

pub const REGRET_HORIZONS: [u32; 5] = [500, 1000, 2000, 4000, 8000];
pub const REGRET_REPLICATES: usize = 50;
pub const REGRET_FIXED_L: f64 = 100.0;
pub const REGRET_MIN_R2: f64 = 0.9;
pub const REGRET_RATIO_SLACK: f64 = 1.6;
pub const REGRET_SECONDS: f64 = 1200.0;

pub const ADAPTIVE_FACTOR: f64 = 3.0;
pub const FP_HORIZON: u32 = 4000;
pub const FP_FACTOR: f64 = 2.0;

pub const CONCENTRATION_EPSILON: f64 = 0.1;
/// 3/(2ε²) at ε = 0.1.
pub const CONCENTRATION_L: f64 = 150.0;
pub const CONCENTRATION_RUNS: usize = 200;
pub const CONCENTRATION_HORIZON: u32 = 10_000;
pub const CONCENTRATION_MIN_FRACTION: f64 = 0.95;

pub const INEQUALITY_TRIALS: usize = 100_000;

/// Labels the acceptance experiment must define.
pub const LABEL_FIXED: &str = "ala";
pub const LABEL_ADAPTIVE: &str = "ala_adaptive";
pub const LABEL_FP: &str = "ala_fp";

fn outcome(id: u32, name: &str, start: Instant, res: Result<(bool, String)>) -> CriterionOutcome {
    let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome { id, name: name.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn random_info(sizes: &[usize], rng: &mut ChaCha8Rng) -> InformationState {
    let obs: Vec<usize> = sizes.iter().map(|&n| rng.gen_range(0..n)).collect();
    InformationState::after_initialization(&obs)
}

/// Oracle against the history-tree expectimax on random K=2, |S|=2 instances.
pub fn oracle_equivalence(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
        let mut worst: f64 = 0.0;
        for _ in 0..ORACLE_INSTANCES {
            let inst = random_instance(&[2, 2], 0.05, &mut rng);
            if !inst.all_positive() {
                return Err(Error::Domain("generated instance has a zero entry".into()));
            }
            let info = random_info(&[2, 2], &mut rng);
            let (p, r) = (inst.transitions(), inst.rewards());
            let o = finite_horizon_oracle(&p, &r, &info, ORACLE_HORIZON, OracleOptions::default())?;
            let b = brute_force_value(&p, &r, &info, ORACLE_HORIZON)?;
            worst = worst.max((o.value - b).abs());
        }
        let secs = start.elapsed().as_secs_f64();
        Ok((
            worst <= ORACLE_TOL && secs < ORACLE_SECONDS,
            format!("max |oracle - brute force| = {worst:.3e} over {ORACLE_INSTANCES} instances (tol {ORACLE_TOL:e}), {secs:.1}s"),
        ))
    })();
    outcome(1, "oracle equivalence", start, res)
}

/// Long-run average reward of the greedy policy of a solved AROE.
pub fn greedy_average_reward(inst: &BanditInstance, tau0: u32, steps: u32, env_seed: u64) -> Result<(f64, f64)> {
    let solved = Arc::new(solve_instance(&inst.transitions(), &inst.rewards(), tau0, &SolverOptions::default())?);
    let g = solved.gain();
    let k = inst.k();
    let env = Environment::new(inst, k + steps as usize, env_seed);
    let mut pol = AroeGreedy::new(solved);
    for arm in 0..k {
        pol.observe(arm, env.state(arm, arm))?;
    }
    let mut total = 0.0;
    for t in 1..=steps as u64 {
        let arm = pol.decide(t, steps)?.arm;
        let obs = env.state(arm, k + t as usize - 1);
        total += env.reward(arm, obs);
        pol.observe(arm, obs)?;
    }
    Ok((g, total / steps as f64))
}

pub fn gain_consistency(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let shapes: [&[usize]; 5] = [&[2, 2], &[2, 3], &[3, 3], &[3], &[3, 2]];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));
        let insts: Vec<(BanditInstance, u64)> = (0..GAIN_INSTANCES)
            .map(|i| (random_instance(shapes[i % shapes.len()], 0.05, &mut rng), rng.gen()))
            .collect();
        let pairs: Vec<(f64, f64)> = insts
            .par_iter()
            .map(|(inst, s)| greedy_average_reward(inst, GAIN_TAU0, GAIN_STEPS, *s))
            .collect::<Result<_>>()?;
        let worst = pairs.iter().map(|(g, a)| (g - a).abs()).fold(0.0, f64::max);
        let secs = start.elapsed().as_secs_f64();
        Ok((
            worst <= GAIN_TOL && secs < GAIN_SECONDS,
            format!("max |g - simulated average| = {worst:.4} over {GAIN_INSTANCES} instances x {GAIN_STEPS} steps (tol {GAIN_TOL}), {secs:.1}s"),
        ))
    })();
    outcome(2, "AROE gain consistency", start, res)
}

pub fn sandwich(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let shapes: [&[usize]; 5] = [&[2, 2], &[2, 3], &[3, 2], &[2, 2], &[2]];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3]));
        let mut violations = 0;
        let mut margin = f64::INFINITY;
        for shape in shapes.iter().take(SANDWICH_INSTANCES) {
            let inst = random_instance(shape, 0.05, &mut rng);
            let s = solve_instance(&inst.transitions(), &inst.rewards(), SANDWICH_TAU0, &SolverOptions::default())?;
            let rep = check_finite_horizon_sandwich(&s, SANDWICH_MAX_T, SANDWICH_SLACK)?;
            violations += rep.violations();
            for r in &rep.rows {
                margin = margin.min(r.lower_margin).min(r.upper_margin);
            }
        }
        Ok((
            violations == 0,
            format!("{violations} violations over {SANDWICH_INSTANCES} instances, T = 1..{SANDWICH_MAX_T} (slack {SANDWICH_SLACK:e}, min margin {margin:.3e})"),
        ))
    })();
    outcome(3, "finite-horizon sandwich", start, res)
}

fn regret_at(out: &ExperimentOutcome, label: &str, horizon: u32) -> Result<f64> {
    out.regret
        .get(&(label.to_string(), RegretMode::Exact))
        .and_then(|r| r.at(horizon))
        .map(|p| p.regret)
        .ok_or_else(|| Error::Config(format!("acceptance experiment lacks exact regret for {label:?} at T={horizon}")))
}

pub fn log_regret_shape(out: &ExperimentOutcome) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let rep = out
            .regret
            .get(&(LABEL_FIXED.to_string(), RegretMode::Exact))
            .ok_or_else(|| Error::Config(format!("no exact regret for {LABEL_FIXED:?}")))?;
        let hs: Vec<u32> = rep.points.iter().map(|p| p.horizon).collect();
        if hs != REGRET_HORIZONS || rep.points[0].n_replicates != REGRET_REPLICATES {
            return Err(Error::Config("acceptance experiment has the wrong horizons or replicate count".into()));
        }
        let fit = fit_log_curve(&rep.points.iter().map(|p| (p.horizon as f64, p.regret)).collect::<Vec<_>>())?;
        let ratio = regret_at(out, LABEL_FIXED, 8000)? / regret_at(out, LABEL_FIXED, 1000)?;
        let bound = REGRET_RATIO_SLACK * 8000f64.ln() / 1000f64.ln();
        let secs = out.manifest.wall_clock_seconds;
        let curve: Vec<String> = rep.points.iter().map(|p| format!("{}:{:.1}", p.horizon, p.regret)).collect();
        Ok((
            fit.r2 >= REGRET_MIN_R2 && ratio <= bound && secs < REGRET_SECONDS,
            format!(
                "R = {:.2} ln T + {:.2}, r2 = {:.4} (min {REGRET_MIN_R2}); R(8000)/R(1000) = {ratio:.3} (max {bound:.3}); curve {}; experiment {secs:.0}s",
                fit.slope,
                fit.intercept,
                fit.r2,
                curve.join(" ")
            ),
        ))
    })();
    outcome(4, "logarithmic regret shape", start, res)
}

pub fn adaptive_schedule(out: &ExperimentOutcome) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let fixed = regret_at(out, LABEL_FIXED, 8000)?;
        let adaptive = regret_at(out, LABEL_ADAPTIVE, 8000)?;
        let runs = out.runs.get(LABEL_ADAPTIVE).ok_or_else(|| Error::Config("no adaptive runs".into()))?;
        let schedule = ExplorationSchedule::loglog();
        if (schedule.l_value(1) - 1.0).abs() > 1e-15 {
            return Err(Error::Domain("adaptive schedule has L(1) != 1".into()));
        }
        let t_max = ergodicity_certificate(&out.instance)?.t_max;
        let mut worst: u64 = 0;
        let mut over = 0;
        let mut envelope = 0.0;
        for r in runs {
            let explore = r.post_init().iter().filter(|s| s.phase == Phase::Explore).count() as u64;
            envelope = exploration_envelope(&out.instance.sizes(), &schedule, r.horizon() as u64, t_max);
            worst = worst.max(explore);
            if explore as f64 > envelope {
                over += 1;
            }
        }
        Ok((
            adaptive <= ADAPTIVE_FACTOR * fixed && over == 0,
            format!(
                "R_adaptive(8000) = {adaptive:.2} vs {ADAPTIVE_FACTOR} x R_fixed(8000) = {:.2}; exploration max {worst} <= envelope {envelope:.1} in {}/{} replicates",
                ADAPTIVE_FACTOR * fixed,
                runs.len() - over,
                runs.len()
            ),
        ))
    })();
    outcome(5, "adaptive exploration schedule", start, res)
}

/// Exploit steps whose arm is missing from the logged optimal set.
pub fn fp_violations(runs: &[RunRecord]) -> (usize, usize) {
    let mut exploit = 0;
    let mut bad = 0;
    for r in runs {
        for s in r.post_init().iter().filter(|s| s.phase == Phase::Exploit) {
            exploit += 1;
            match &s.candidate_set {
                Some(set) if set.contains(&s.arm) => {}
                _ => bad += 1,
            }
        }
    }
    (exploit, bad)
}

pub fn finite_partition(out: &ExperimentOutcome) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let fp = regret_at(out, LABEL_FP, FP_HORIZON)?;
        let ala = regret_at(out, LABEL_FIXED, FP_HORIZON)?;
        let runs = out.runs.get(LABEL_FP).ok_or_else(|| Error::Config("no ala_fp runs".into()))?;
        let (exploit, bad) = fp_violations(runs);
        let tau0 = out.manifest.tau0.get(LABEL_FP).copied().unwrap_or(0);
        Ok((
            fp <= FP_FACTOR * ala && bad == 0 && exploit > 0,
            format!(
                "tau0 = {tau0}; R_fp({FP_HORIZON}) = {fp:.2} vs {FP_FACTOR} x R_ala = {:.2}; {bad} of {exploit} exploit choices outside the logged optimal set",
                FP_FACTOR * ala
            ),
        ))
    })();
    outcome(6, "ALA-FP", start, res)
}

pub fn concentration(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let res = (|| {
        let cfg = AlaConfig { schedule: ExplorationSchedule::Fixed { l: CONCENTRATION_L }, ..Default::default() };
        let rep = concentration_report(
            &acceptance_instance(),
            &cfg,
            CONCENTRATION_EPSILON,
            CONCENTRATION_HORIZON,
            CONCENTRATION_RUNS,
            derive_seed(seed, &[7]),
        )?;
        let frac = rep.fraction_within();
        let buckets: Vec<String> = rep
            .buckets
            .iter()
            .map(|b| {
                format!(
                    "[{},{}] raw {:.2e}/{:.2e} norm {:.2e}/{:.2e}",
                    b.t_start, b.t_end, b.raw_frequency, b.raw_envelope, b.normalized_frequency, b.normalized_envelope
                )
            })
            .collect();
        Ok((
            frac >= CONCENTRATION_MIN_FRACTION,
            format!("{:.0}% of buckets within envelope (min {:.0}%); {}", 100.0 * frac, 100.0 * CONCENTRATION_MIN_FRACTION, buckets.join("; ")),
        ))
    })();
    outcome(7, "concentration", start, res)
}

fn perturbed(p: &TransitionMatrix, rng: &mut ChaCha8Rng) -> TransitionMatrix {
    let lambda: f64 = rng.gen_range(0.0..0.5);
    let q = random_transition(p.n(), 0.0, rng);
    let rows: Vec<Vec<f64>> = (0..p.n())
        .map(|i| p.row(i).iter().zip(q.row(i)).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect())
        .collect();
    TransitionMatrix::from_rows(&rows).expect("convex combination of stochastic rows")
}

fn random_belief(sizes: &[usize], rng: &mut ChaCha8Rng) -> Belief {
    let marginals = sizes
        .iter()
        .map(|&n| {
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        })
        .collect();
    Belief { marginals }
}

/// Product-difference bound, joint-vs-marginal distance and belief
/// perturbation, each on `trials` random draws. Returns violation counts.
pub fn inequality_trials(seed: u64, trials: usize) -> Result<[usize; 3]> {
    let chunks = 64usize;
    let per = trials.div_ceil(chunks);
    let counts: Vec<[usize; 3]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[8, c as u64]));
            let mut v = [0usize; 3];
            let n = per.min(trials.saturating_sub(c * per));
            for _ in 0..n {
                let k = rng.gen_range(1..=6);
                let a: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=1.0)).collect();
                let b: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=1.0)).collect();
                let (l, r) = product_difference_bound(&a, &b)?;
                if l > r {
                    v[0] += 1;
                }
                let sizes: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=3)).collect();
                let b1 = random_belief(&sizes, &mut rng);
                let b2 = random_belief(&sizes, &mut rng);
                if belief_distance(&b1, &b2)? > b1.marginal_l1_sum(&b2) * (1.0 + 1e-12) {
                    v[1] += 1;
                }
                let shape: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=3)).collect();
                let inst = random_instance(&shape, 0.02, &mut rng);
                let c1 = ergodicity_certificate(&inst)?.c1();
                let p = inst.transitions();
                let p_hat: Vec<TransitionMatrix> = p.iter().map(|m| perturbed(m, &mut rng)).collect();
                let mut info = random_info(&shape, &mut rng);
                for _ in 0..rng.gen_range(0..20) {
                    let u = rng.gen_range(0..shape.len());
                    info = info.advance(u, rng.gen_range(0..shape[u]));
                }
                let (l, r) = perturbation_bound(&info, &p, &p_hat, c1)?;
                if l > r {
                    v[2] += 1;
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(counts.iter().fold([0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]))
}

pub fn inequalities(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let res = inequality_trials(seed, INEQUALITY_TRIALS).map(|v| {
        (
            v == [0, 0, 0],
            format!(
                "{INEQUALITY_TRIALS} trials each: product bound {} violations, joint vs marginal distance {}, belief perturbation {}",
                v[0], v[1], v[2]
            ),
        )
    });
    outcome(8, "product bound and belief perturbation", start, res)
}

/// Every CSV and SVG of two output trees, compared byte for byte.
pub fn compare_outputs(a: &Path, b: &Path) -> Result<(usize, Vec<String>)> {
    let ma = super::runner::ResultsManifest::load(a)?;
    let mb = super::runner::ResultsManifest::load(b)?;
    let mut differ = Vec::new();
    let mut n = 0;
    let list = |m: &super::runner::ResultsManifest| {
        let mut v: Vec<String> =
            m.files.iter().map(|f| f.path.clone()).filter(|p| p.ends_with(".csv") || p.ends_with(".svg")).collect();
        v.sort();
        v
    };
    let (la, lb) = (list(&ma), list(&mb));
    if la != lb {
        differ.push("file lists differ".into());
    }
    for rel in &la {
        n += 1;
        let x = std::fs::read(a.join(rel))?;
        let y = std::fs::read(b.join(rel)).unwrap_or_default();
        if x != y {
            differ.push(rel.clone());
        }
    }
    Ok((n, differ))
}

pub fn determinism(a: &Path, b: &Path) -> CriterionOutcome {
    let start = Instant::now();
    let res = compare_outputs(a, b).map(|(n, differ)| {
        let detail = if differ.is_empty() {
            format!("{n} CSV and SVG files byte-identical across two runs")
        } else {
            format!("{} of {n} files differ: {}", differ.len(), differ.iter().take(5).cloned().collect::<Vec<_>>().join(", "))
        };
        (differ.is_empty() && n > 0, detail)
    });
    outcome(9, "determinism", start, res)
}

/// Runs every criterion; the acceptance experiment is run twice under `workdir`.
pub fn run_acceptance(config: &ExperimentConfig, workdir: &Path, workers: usize) -> Result<Vec<CriterionOutcome>> {
    run_acceptance_with(config, workdir, workers, |_| {})
}

/// As `run_acceptance`, reporting each outcome as soon as it is known.
pub fn run_acceptance_with(
    config: &ExperimentConfig,
    workdir: &Path,
    workers: usize,
    mut report: impl FnMut(&CriterionOutcome),
) -> Result<Vec<CriterionOutcome>> {
    let seed = config.seed;
    let mut all = Vec::new();
    let mut push = |c: CriterionOutcome, all: &mut Vec<CriterionOutcome>| {
        report(&c);
        all.push(c);
    };
    push(oracle_equivalence(seed), &mut all);
    push(gain_consistency(seed), &mut all);
    push(sandwich(seed), &mut all);
    let dir_a = workdir.join("run_a");
    let dir_b = workdir.join("run_b");
    let opts = |d: &Path| RunOptions { workers, seed: None, output_dir: Some(d.to_path_buf()) };
    let first = run_experiment(config, &opts(&dir_a))?;
    push(log_regret_shape(&first), &mut all);
    push(adaptive_schedule(&first), &mut all);
    push(finite_partition(&first), &mut all);
    push(concentration(seed), &mut all);
    push(inequalities(seed), &mut all);
    run_experiment(config, &opts(&dir_b))?;
    push(determinism(&dir_a, &dir_b), &mut all);
    let mut manifest = first.manifest;
    manifest.acceptance = all.clone();
    manifest.save(&dir_a)?;
    Ok(all)
}
