use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rbandit");

fn rbandit(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn small(dir: &Path) -> String {
    write_config(
        dir,
        &format!(
            r#"{{"name": "cli", "instance": {{"generator": "acceptance"}},
                "algorithms": [{{"kind": "ala", "schedule": 5, "tau0": 3}}, {{"kind": "random"}}],
                "horizons": [20, 40, 60, 80], "replicates": 3, "seed": 5,
                "regret_mode": "both", "output_dir": "{}"}}"#,
            dir.join("out").display()
        ),
    )
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_reports_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small(d.path());
    let ok = rbandit(&["validate", &cfg]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("ok: 2 arms"));

    let bad = write_config(d.path(), r#"{"instance": {"generator": "acceptance"}, "algorithms": [], "horizons": [5, 3]}"#);
    assert_eq!(rbandit(&["validate", &bad]).status.code(), Some(1));
    assert_eq!(rbandit(&["validate", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(rbandit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rbandit(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_then_plot() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small(d.path());
    let run = rbandit(&["--workers", "2", "run", &cfg]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let out = d.path().join("out");
    for f in ["manifest.json", "runs/ala/rep0002.csv", "runs/ala/rep0000_decisions.csv", "regret/random_delta.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let svg = out.join("plots/regret_exact_logx.svg");
    let before = std::fs::read(&svg).unwrap();
    std::fs::remove_file(&svg).unwrap();
    let plot = rbandit(&["plot", out.join("manifest.json").to_str().unwrap()]);
    assert_eq!(plot.status.code(), Some(0));
    assert_eq!(std::fs::read(&svg).unwrap(), before);

    let header = std::fs::read_to_string(out.join("runs/random/rep0000.csv")).unwrap();
    assert!(header.starts_with("t,arm,observation,reward,phase\n"));
    let regret = std::fs::read_to_string(out.join("regret/ala_exact.csv")).unwrap();
    assert_eq!(regret.lines().next(), Some("T,regret,mode,stderr,n_replicates"));
    assert_eq!(regret.lines().count(), 5);
}

#[test]
fn out_and_seed_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small(d.path());
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(rbandit(&["--out", a.to_str().unwrap(), "run", &cfg]).status.success());
    assert!(rbandit(&["--out", b.to_str().unwrap(), "--seed", "6", "run", &cfg]).status.success());
    let read = |p: &Path| std::fs::read(p.join("runs/random/rep0000.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert!(!d.path().join("out").exists());
}

#[test]
fn solve_and_oracle_tables() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small(d.path());
    assert!(rbandit(&["solve", &cfg, "--tau0", "3"]).status.success());
    let sol = std::fs::read_to_string(d.path().join("out/solution.csv")).unwrap();
    assert_eq!(sol.lines().next(), Some("point,state,g,h,delta_0,delta_1"));
    assert_eq!(sol.lines().count(), 1 + 4 * (2 * 3 - 1));
    assert!(rbandit(&["oracle", &cfg]).status.success());
    let orc = std::fs::read_to_string(d.path().join("out/oracle.csv")).unwrap();
    assert_eq!(orc.lines().next(), Some("s,tau,T,value"));
    assert_eq!(orc.lines().count(), 1 + 4 * 4);
}

#[test]
fn runtime_failure_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = small(d.path());
    let o = rbandit(&["--out", blocker.join("sub").to_str().unwrap(), "run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let missing = rbandit(&["plot", d.path().join("nothing").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}
