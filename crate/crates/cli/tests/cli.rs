use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CHAIN: &str = r#"
h = 0.01
train_steps = 600
test_steps = 600
rank = 2
coupling_rank = 2

[model]
kind = "chain"
masses = [1.0, 1.2, 0.8, 1.5, 1.1, 0.9]
springs = [30.0, 25.0, 40.0, 35.0, 20.0, 50.0]
boundary = [0]
gaps = [0.3]

[train]
amplitude = 40.0
frequency = 0.2
dofs = "interior"

[test]
amplitude = 40.0
frequency = 0.4
dofs = "interior"
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contact-rom"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("chain.toml");
    fs::write(&path, CHAIN).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");
    let res = run(&["pipeline", "--config", s(&cfg), "--out", s(&out), "--seed", "3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "config.resolved",
        "system/mass.mtx",
        "training/free.csv",
        "training/fixed.csv",
        "snapshots/q_b.csv",
        "fom/trajectory.csv",
        "fom/diagnostics.txt",
        "model/m_hat.mtx",
        "model/inference.txt",
        "rom/trajectory.csv",
        "rom/reduced.csv",
        "errors/boundary.csv",
        "errors/interior.csv",
        "errors/multiplier.csv",
        "errors/boundary_unsquared.csv",
        "errors/summary.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    // The resolved echo is itself a valid config.
    let again = tmp.path().join("again");
    let res = run(&["simulate-fom", "--config", s(&out.join("config.resolved")), "--out", s(&again)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn stages_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        for stage in ["simulate-fom", "infer", "simulate-rom"] {
            let res = run(&[stage, "--config", s(&cfg), "--out", s(dir), "--coupling", "full-lsq"]);
            assert!(res.status.success(), "{stage}: {}", String::from_utf8_lossy(&res.stderr));
        }
    }
    for f in ["fom/trajectory.csv", "rom/trajectory.csv", "model/m_hat.mtx", "errors/multiplier.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_model_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("files.toml");
    fs::write(
        &cfg,
        "out = \"run\"\n[model]\nkind = \"files\"\nmass = \"m.mtx\"\nstiffness = \"k.mtx\"\n\
         constraints = \"c.mtx\"\noffsets = \"g.txt\"\npartition = \"p.txt\"\n",
    )
    .unwrap();
    let res = run(&["simulate-fom", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("load_system"), "{stderr}");
    assert!(stderr.contains("m.mtx"), "{stderr}");
}

#[test]
fn bad_arguments_and_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "h = -0.1\n").unwrap();
    let res = run(&["pipeline", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&["infer", "--config", s(&cfg), "--coupling", "nonsense"]);
    assert!(!res.status.success());
    // Inference without snapshots fails on I/O.
    let good = write_config(tmp.path());
    let res = run(&["infer", "--config", s(&good), "--out", s(&tmp.path().join("empty"))]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn compare_tabulates_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let mut dirs = Vec::new();
    for method in ["static-modes", "reduced-lsq"] {
        let dir = tmp.path().join(method);
        let res = run(&["pipeline", "--config", s(&cfg), "--out", s(&dir), "--coupling", method]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        dirs.push(dir);
    }
    let table = tmp.path().join("cmp");
    let res = run(&["compare", s(&dirs[0]), s(&dirs[1]), "--out", s(&table)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(table.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv.contains("reduced-lsq"));
    assert!(table.join("comparison.txt").is_file());

    // A run on a different time grid cannot be compared.
    let coarse = tmp.path().join("coarse.toml");
    fs::write(&coarse, CHAIN.replace("h = 0.01", "h = 0.02")).unwrap();
    let other = tmp.path().join("other");
    assert!(run(&["pipeline", "--config", s(&coarse), "--out", s(&other)]).status.success());
    let res = run(&["compare", s(&dirs[0]), s(&other)]);
    assert_eq!(res.status.code(), Some(2));
}
