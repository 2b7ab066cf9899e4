use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{derive_seed, hex, AlgorithmSpec, ExperimentConfig, RegretSelection};
use super::fit::{fit_log_curve, LogFit};
use super::plot::{regret_svg, Series};
use crate::ala::{auto_tau0, AlaAgent, Variant};
use crate::aroe::partition::DEFAULT_TAU_PROBE;
use crate::aroe::solver::{solve_instance, SolverOptions};
use crate::error::{Error, Result};
use crate::markov::BanditInstance;
use crate::sim::baselines::{FixedArm, Myopic, RandomArm};
use crate::sim::regret::{delta_regret, exact_regret, oracle_table, RegretMode, RegretReport, REGRET_CSV_HEADER};
use crate::sim::run::{simulate, Phase, Policy, RunRecord, RUN_CSV_HEADER};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;
pub const DECISIONS_CSV_HEADER: &str = "t,arm,belief_hash,origin,candidate_set";
/// Largest τ0 tried by automatic selection.
pub const AUTO_TAU0_CAP: u32 = 24;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub algorithm: String,
    pub replicate: usize,
    pub env_seed: u64,
    pub agent_seed: Option<u64>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretEntry {
    pub algorithm: String,
    pub mode: RegretMode,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<LogFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("criterion {} {verdict} {}: {} [{:.1}s]", self.id, self.name, self.detail, self.seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub csv_schemas: BTreeMap<String, String>,
    /// τ0 in use per ALA-type algorithm, after automatic selection.
    pub tau0: BTreeMap<String, u32>,
    pub runs: Vec<RunEntry>,
    pub regret: Vec<RegretEntry>,
    pub files: Vec<FileEntry>,
    pub failures: usize,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acceptance: Vec<CriterionOutcome>,
    pub wall_clock_seconds: f64,
}

impl ResultsManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("manifest: {e}")))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    /// Files whose content no longer matches the recorded hash.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            match std::fs::read(dir.join(&f.path)) {
                Ok(bytes) if sha256_hex(&bytes) == f.sha256 && bytes.len() as u64 == f.bytes => {}
                _ => bad.push(f.path.clone()),
            }
        }
        Ok(bad)
    }

    /// The manifest with wall-clock time zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        let mut m = self.clone();
        m.wall_clock_seconds = 0.0;
        for c in &mut m.acceptance {
            c.seconds = 0.0;
        }
        m
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Writes files under the output directory and records their hashes.
struct Collector {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Collector {
    fn write(&mut self, rel: &str, content: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, content)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(content), bytes: content.len() as u64 });
        Ok(())
    }
}

pub struct ExperimentOutcome {
    pub manifest: ResultsManifest,
    pub output_dir: PathBuf,
    pub instance: BanditInstance,
    /// Successful runs per algorithm label, in replicate order.
    pub runs: BTreeMap<String, Vec<RunRecord>>,
    pub regret: BTreeMap<(String, RegretMode), RegretReport>,
}

fn decisions_csv(run: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str(DECISIONS_CSV_HEADER);
    out.push('\n');
    for s in run.post_init().iter().filter(|s| s.phase == Phase::Exploit) {
        let set = s
            .candidate_set
            .as_ref()
            .map(|v| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("|"))
            .unwrap_or_default();
        let hash = s.belief_hash.map(|h| format!("{h:016x}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{hash},{},{set}", s.t, s.arm, s.origin.as_deref().unwrap_or(""));
    }
    out
}

fn make_policy(
    spec: &AlgorithmSpec,
    instance: &BanditInstance,
    seed: u64,
    tau0: Option<u32>,
) -> Result<Box<dyn Policy>> {
    Ok(match spec {
        AlgorithmSpec::Ala(p) => {
            Box::new(AlaAgent::new(&instance.sizes(), &instance.rewards(), p.to_config(Variant::Ala, seed, tau0)?)?)
        }
        AlgorithmSpec::AlaFp(p) => {
            Box::new(AlaAgent::new(&instance.sizes(), &instance.rewards(), p.to_config(Variant::AlaFp, seed, tau0)?)?)
        }
        AlgorithmSpec::FixedArm { arm } => Box::new(FixedArm { arm: *arm }),
        AlgorithmSpec::Random => Box::new(RandomArm::new(instance.k(), seed)),
        AlgorithmSpec::Myopic => Box::new(Myopic::new(&instance.transitions(), &instance.rewards())?),
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let mut config = config.clone();
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    if let Some(o) = &opts.output_dir {
        config.output_dir = o.clone();
    }
    config.validate()?;
    let instance = config.instance.build(config.validation)?;
    let (p, rewards) = (instance.transitions(), instance.rewards());
    let horizon = config.max_horizon();
    let mut notes = Vec::new();

    let mut tau0s: BTreeMap<String, u32> = BTreeMap::new();
    let mut resolved: Vec<Option<u32>> = Vec::with_capacity(config.algorithms.len());
    for a in &config.algorithms {
        let t = match a {
            AlgorithmSpec::AlaFp(params) if params.is_auto() => {
                let th = params.tau0_horizon.unwrap_or(horizon);
                let (t, var, tol) = auto_tau0(&p, &rewards, th, DEFAULT_TAU_PROBE, AUTO_TAU0_CAP, &SolverOptions::default())?;
                if var >= tol && var > 0.0 {
                    notes.push(format!("{}: automatic tau0 stopped at the cap {t} (variation {var:e} > {tol:e})", a.label()));
                }
                Some(t)
            }
            _ => None,
        };
        if let AlgorithmSpec::Ala(params) | AlgorithmSpec::AlaFp(params) = a {
            let cfg = params.to_config(Variant::Ala, 0, t)?;
            tau0s.insert(a.label(), cfg.tau0);
        }
        resolved.push(t);
    }

    let tasks: Vec<(usize, usize)> =
        (0..config.algorithms.len()).flat_map(|a| (0..config.replicates).map(move |r| (a, r))).collect();
    let instance_arc = Arc::new(instance.clone());
    let results: Vec<(u64, u64, Result<RunRecord>)> = pool(opts.workers)?.install(|| {
        tasks
            .par_iter()
            .map(|&(a, r)| {
                let env_seed = derive_seed(config.seed, &[0, r as u64]);
                let agent_seed = derive_seed(config.seed, &[1 + a as u64, r as u64]);
                let run = make_policy(&config.algorithms[a], &instance_arc, agent_seed, resolved[a])
                    .and_then(|mut pol| simulate(&instance_arc, pol.as_mut(), horizon, env_seed));
                (env_seed, agent_seed, run)
            })
            .collect()
    });

    let out_dir = config.output_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    let mut col = Collector { root: out_dir.clone(), files: Vec::new() };
    let mut entries = Vec::with_capacity(tasks.len());
    let mut runs: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    let mut failures = 0;
    for (&(a, r), (env_seed, agent_seed, res)) in tasks.iter().zip(results) {
        let label = config.algorithms[a].label();
        let mut e = RunEntry {
            algorithm: label.clone(),
            replicate: r,
            env_seed,
            agent_seed: None,
            status: RunStatus::Ok,
            error: None,
            file: None,
            decisions: None,
            total_reward: None,
        };
        match res {
            Ok(run) => {
                e.agent_seed = run.agent_seed.map(|_| agent_seed);
                let rel = format!("runs/{label}/rep{r:04}.csv");
                col.write(&rel, run.to_csv().as_bytes())?;
                e.file = Some(rel);
                if matches!(config.algorithms[a], AlgorithmSpec::Ala(_) | AlgorithmSpec::AlaFp(_)) {
                    let rel = format!("runs/{label}/rep{r:04}_decisions.csv");
                    col.write(&rel, decisions_csv(&run).as_bytes())?;
                    e.decisions = Some(rel);
                }
                e.total_reward = Some(run.total_reward);
                runs.entry(label).or_default().push(run);
            }
            Err(err) => {
                failures += 1;
                e.status = RunStatus::Failed;
                e.error = Some(err.to_string());
            }
        }
        entries.push(e);
    }

    let mut modes = match config.regret_mode {
        RegretSelection::Exact => vec![RegretMode::Exact],
        RegretSelection::Delta => vec![RegretMode::Delta],
        RegretSelection::Both => vec![RegretMode::Exact, RegretMode::Delta],
    };
    let mut table = None;
    if modes.contains(&RegretMode::Exact) {
        match oracle_table(&instance, &config.horizons) {
            Ok(t) => table = Some(t),
            Err(e @ (Error::OracleTooLarge { .. } | Error::GridTooLarge { .. })) => {
                notes.push(format!("exact regret unavailable ({e}); falling back to delta mode"));
                modes.retain(|m| *m != RegretMode::Exact);
                if !modes.contains(&RegretMode::Delta) {
                    modes.push(RegretMode::Delta);
                }
            }
            Err(e) => return Err(e),
        }
    }
    let solved = if modes.contains(&RegretMode::Delta) {
        let mut o = SolverOptions::default();
        o.allow_nonpositive = config.validation == crate::markov::ValidationMode::Diagnostic;
        match solve_instance(&p, &rewards, config.delta_tau0, &o) {
            Ok(s) => Some(s),
            Err(e) => {
                notes.push(format!("delta regret unavailable: {e}"));
                modes.retain(|m| *m != RegretMode::Delta);
                None
            }
        }
    } else {
        None
    };

    let mut regret = BTreeMap::new();
    let mut regret_entries = Vec::new();
    for a in &config.algorithms {
        let label = a.label();
        let Some(rs) = runs.get(&label) else {
            notes.push(format!("{label}: no successful runs, no regret curve"));
            continue;
        };
        for &mode in &modes {
            let rep = match mode {
                RegretMode::Exact => exact_regret(rs, table.as_ref().expect("computed above"), &config.horizons),
                RegretMode::Delta => delta_regret(rs, solved.as_ref().expect("computed above"), &config.horizons),
            };
            let rep = match rep {
                Ok(r) => r,
                Err(e) => {
                    notes.push(format!("{label}: {} regret failed: {e}", mode.as_str()));
                    continue;
                }
            };
            let rel = format!("regret/{label}_{}.csv", mode.as_str());
            col.write(&rel, rep.to_csv().as_bytes())?;
            let pts: Vec<(f64, f64)> = rep.points.iter().map(|p| (p.horizon as f64, p.regret)).collect();
            let (fit, fit_error) = match fit_log_curve(&pts) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            regret_entries.push(RegretEntry { algorithm: label.clone(), mode, file: rel, fit, fit_error });
            regret.insert((label.clone(), mode), rep);
        }
    }

    let mut manifest = ResultsManifest {
        schema_version: MANIFEST_SCHEMA,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        csv_schemas: [
            ("run".to_string(), RUN_CSV_HEADER.to_string()),
            ("regret".to_string(), REGRET_CSV_HEADER.to_string()),
            ("decisions".to_string(), DECISIONS_CSV_HEADER.to_string()),
        ]
        .into_iter()
        .collect(),
        tau0: tau0s,
        runs: entries,
        regret: regret_entries,
        files: Vec::new(),
        failures,
        notes,
        acceptance: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    if !regret.is_empty() {
        for (rel, content) in plot_files(&manifest, &regret)? {
            col.write(&rel, content.as_bytes())?;
        }
    }
    manifest.files = col.files;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save(&out_dir)?;
    Ok(ExperimentOutcome { manifest, output_dir: out_dir, instance, runs, regret })
}

fn plot_files(
    manifest: &ResultsManifest,
    regret: &BTreeMap<(String, RegretMode), RegretReport>,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for mode in [RegretMode::Exact, RegretMode::Delta] {
        let series: Vec<Series> = manifest
            .regret
            .iter()
            .filter(|e| e.mode == mode)
            .filter_map(|e| {
                regret.get(&(e.algorithm.clone(), mode)).map(|r| Series {
                    label: e.algorithm.clone(),
                    points: r.points.iter().map(|p| (p.horizon as f64, p.regret, p.stderr)).collect(),
                })
            })
            .collect();
        if series.is_empty() {
            continue;
        }
        let title = format!("{}: {} regret", manifest.config.name, mode.as_str());
        out.push((format!("plots/regret_{}_linear.svg", mode.as_str()), regret_svg(&title, &series, false)?));
        out.push((format!("plots/regret_{}_logx.svg", mode.as_str()), regret_svg(&title, &series, true)?));
    }
    Ok(out)
}

/// Parses a regret CSV written by `run_experiment`.
pub fn read_regret_csv(text: &str, policy: &str) -> Result<RegretReport> {
    let mut lines = text.lines();
    if lines.next() != Some(REGRET_CSV_HEADER) {
        return Err(Error::Io("regret CSV header mismatch".into()));
    }
    let mut points = Vec::new();
    let mut mode = None;
    for l in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Io(format!("bad regret row {l:?}")));
        }
        let bad = |_| Error::Io(format!("bad regret row {l:?}"));
        mode = Some(match f[2] {
            "exact" => RegretMode::Exact,
            "delta" => RegretMode::Delta,
            _ => return Err(Error::Io(format!("bad mode in {l:?}"))),
        });
        points.push(crate::sim::regret::RegretPoint {
            horizon: f[0].parse().map_err(|_| Error::Io(format!("bad regret row {l:?}")))?,
            regret: f[1].parse().map_err(bad)?,
            stderr: f[3].parse().map_err(bad)?,
            n_replicates: f[4].parse().map_err(|_| Error::Io(format!("bad regret row {l:?}")))?,
        });
    }
    let mode = mode.ok_or_else(|| Error::NoData("empty regret CSV".into()))?;
    Ok(RegretReport { policy: policy.to_string(), mode, points })
}

/// Re-renders the plots of a finished experiment from its regret CSVs.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut manifest = ResultsManifest::load(dir)?;
    if manifest.regret.is_empty() {
        return Err(Error::NoData("manifest lists no regret curves".into()));
    }
    let mut regret = BTreeMap::new();
    for e in &manifest.regret {
        let text = std::fs::read_to_string(dir.join(&e.file))?;
        regret.insert((e.algorithm.clone(), e.mode), read_regret_csv(&text, &e.algorithm)?);
    }
    let mut col = Collector { root: dir.to_path_buf(), files: manifest.files.clone() };
    let mut written = Vec::new();
    for (rel, content) in plot_files(&manifest, &regret)? {
        col.write(&rel, content.as_bytes())?;
        written.push(dir.join(rel));
    }
    manifest.files = col.files;
    manifest.save(dir)?;
    Ok(written)
}
