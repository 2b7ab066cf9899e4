use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rbandit::aroe::solver::{solve_instance, SolverOptions};
use rbandit::experiment::acceptance::run_acceptance_with;
use rbandit::experiment::export::{oracle_csv, solution_table};
use rbandit::experiment::runner::MANIFEST_FILE;
use rbandit::experiment::{emit_plots, run_experiment, ExperimentConfig, RunOptions};
use rbandit::markov::ValidationMode;
use rbandit::sim::regret::oracle_table;
use rbandit::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "rbandit", version, about = "Restless bandit learning experiments")]
struct Cli {
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config
    Validate { config: PathBuf },
    /// Solve the AROE for the config instance and write the solution table
    Solve {
        config: PathBuf,
        /// Partition threshold; defaults to the config's delta_tau0
        #[arg(long)]
        tau0: Option<u32>,
    },
    /// Exact oracle values from every initial information state
    Oracle { config: PathBuf },
    /// Run the experiment
    Run { config: PathBuf },
    /// Re-render plots from a manifest (file or directory)
    Plot { manifest: PathBuf },
    /// Run the acceptance suite
    Check { config: PathBuf },
}

enum Failure {
    Validation(Error),
    Runtime(Error),
    Acceptance(usize),
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut c = ExperimentConfig::load(path).map_err(Failure::Validation)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.output_dir = o.clone();
    }
    Ok(c)
}

fn write(dir: &Path, name: &str, content: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
    let p = dir.join(name);
    std::fs::write(&p, content).map_err(|e| Failure::Runtime(e.into()))?;
    Ok(p)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let rt = Failure::Runtime;
    match &cli.command {
        Command::Validate { config } => {
            let c = load(config, cli)?;
            let inst = c.instance.build(c.validation).map_err(Failure::Validation)?;
            println!(
                "ok: {} arms with sizes {:?}, {} algorithms, horizons {:?}, {} replicates, config hash {}",
                inst.k(),
                inst.sizes(),
                c.algorithms.len(),
                c.horizons,
                c.replicates,
                c.hash()
            );
        }
        Command::Solve { config, tau0 } => {
            let c = load(config, cli)?;
            let inst = c.instance.build(c.validation).map_err(Failure::Validation)?;
            let opts = SolverOptions { allow_nonpositive: c.validation == ValidationMode::Diagnostic, ..Default::default() };
            let s = solve_instance(&inst.transitions(), &inst.rewards(), tau0.unwrap_or(c.delta_tau0), &opts).map_err(rt)?;
            let p = write(&c.output_dir, "solution.csv", &solution_table(&s))?;
            println!(
                "gain {} after {} iterations (span residual {:e}); {} grid points written to {}",
                s.gain(),
                s.solution.iterations,
                s.solution.span_residual,
                s.grid().len(),
                p.display()
            );
        }
        Command::Oracle { config } => {
            let c = load(config, cli)?;
            let inst = c.instance.build(c.validation).map_err(Failure::Validation)?;
            let table = oracle_table(&inst, &c.horizons).map_err(rt)?;
            let p = write(&c.output_dir, "oracle.csv", &oracle_csv(&table))?;
            println!("{} states x {} horizons written to {}", table.queries.len(), table.horizons.len(), p.display());
        }
        Command::Run { config } => {
            let c = load(config, cli)?;
            let opts = RunOptions { workers: cli.workers, seed: None, output_dir: None };
            let out = run_experiment(&c, &opts).map_err(rt)?;
            for e in &out.manifest.regret {
                let fit = e.fit.map(|f| format!("R = {:.3} ln T + {:.3} (r2 {:.4})", f.slope, f.intercept, f.r2));
                println!("{} {}: {}", e.algorithm, e.mode.as_str(), fit.unwrap_or_else(|| e.fit_error.clone().unwrap_or_default()));
            }
            for n in &out.manifest.notes {
                println!("note: {n}");
            }
            println!(
                "{} runs ({} failed), manifest {}",
                out.manifest.runs.len(),
                out.manifest.failures,
                out.output_dir.join(MANIFEST_FILE).display()
            );
        }
        Command::Plot { manifest } => {
            let dir = if manifest.is_dir() { manifest.clone() } else { manifest.parent().map(Path::to_path_buf).unwrap_or_default() };
            for p in emit_plots(&dir).map_err(rt)? {
                println!("{}", p.display());
            }
        }
        Command::Check { config } => {
            let c = load(config, cli)?;
            let workdir = c.output_dir.join("acceptance");
            let all = run_acceptance_with(&c, &workdir, cli.workers, |o| println!("{}", o.line())).map_err(rt)?;
            let failed = all.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", all.len() - failed, all.len());
            if failed > 0 {
                return Err(Failure::Acceptance(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("invalid: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Acceptance(n)) => {
            eprintln!("{n} acceptance criteria failed");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
    }
}
