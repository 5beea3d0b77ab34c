//! End-to-end runs of the `otoc` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otoc"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn feasibility_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "feasibility"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("feasibility.tsv")).unwrap();
    assert!(table.starts_with("# table: feasibility\n"));
    assert!(table.contains("# column 1: "));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "feasibility");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["code_version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v == "feasibility.tsv"));
}

#[test]
fn config_errors_name_the_field_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\natoms = 10\nkind = \"kicked_top\"\nk = 3.0\np = 1.0\n[times]\nvalues = [0.0, -1.0]\n")
        .unwrap();
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "oto",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("times[1]"), "{}", text(&o.stderr));

    std::fs::write(&cfg, "[model]\natoms = 10\nkind = \"kicked_top\"\nk = 3.0\np = 1.0\ncolour = 1\n[times]\nvalues = [0.0]\n")
        .unwrap();
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "oto",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("colour"), "{}", text(&o.stderr));
}

#[test]
fn n_traj_override_needs_dissipation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("kicked_top.toml");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "oto",
        "--n-traj",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oto_reports_invariants_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("kicked_top.toml");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
            "oto",
            "--atoms",
            "60",
        ]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        let stdout = text(&o.stdout);
        assert!(stdout.contains("oracle_equivalence") && stdout.contains("commutator_identity"));
        outputs.push((
            std::fs::read(out.join("oto.tsv")).unwrap(),
            std::fs::read(out.join("manifest.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let table = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(table.contains("# atoms: 60"));
}

#[test]
fn dissipative_run_writes_trajectory_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("dissipative.toml");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
        "dissipative",
        "--n-traj",
        "12",
        "--atoms",
        "10",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let log = std::fs::read_to_string(dir.path().join("dissipative_trajectories.jsonl")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 12);
    for (i, line) in lines.iter().enumerate() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["trajectory"], i);
        assert_eq!(rec["master_seed"], 9);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["overflow"]["n_traj"], 12);
}

#[test]
fn lyapunov_rejects_twisting_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("twisting.toml");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "lyapunov",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wigner_snapshots_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("twisting.toml");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "wigner",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    for i in 0..3 {
        assert!(dir.path().join(format!("wigner_{i}.tsv")).exists());
    }
}
