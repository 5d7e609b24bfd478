use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fishschool::harness::output::{read_json, read_trajectory};
use fishschool::harness::{
    presets, ErrorRecord, ExperimentConfig, PatternReport, SimulationReport, SweepArtifact,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fishschool"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn error_record(out: &Output) -> ErrorRecord {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("bad error record {stderr:?}: {e}"))
}

#[test]
fn shipped_configs_match_presets() {
    for (name, preset) in presets::all() {
        let loaded = ExperimentConfig::load(&configs_dir().join(name))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(loaded, preset, "{name}");
    }
}

#[test]
fn config_round_trips_and_hash_is_stable() {
    for (name, cfg) in presets::all() {
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.hash(), cfg.hash());
    }
    let a = presets::pattern_run(2.0);
    let b = presets::pattern_run(3.0);
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn config_validation_names_the_field() {
    let mut value: serde_json::Value = serde_json::from_str(&presets::pattern_run(2.0).to_json()).unwrap();
    value["model"]["p_exp_typo"] = 2.0.into();
    let err = ExperimentConfig::from_json(&value.to_string()).unwrap_err();
    assert!(err.to_string().contains("p_exp_typo"), "{err}");

    let mut cfg = presets::cohesion_reference();
    cfg.obstacle = presets::pattern_run(2.0).obstacle;
    assert!(matches!(cfg.validate(), Err(fishschool::Error::Config { field, .. }) if field == "obstacle"));

    let mut cfg = presets::sweep_speed();
    cfg.obstacle = None;
    assert!(cfg.validate().is_err());

    let mut cfg = presets::pattern_run(2.0);
    cfg.model.q_exp = 1.5;
    assert!(matches!(cfg.validate(), Err(fishschool::Error::Config { field, .. }) if field == "model"));
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut value: serde_json::Value = serde_json::from_str(&presets::simulate_schooling().to_json()).unwrap();
    value["solver"]["dtt"] = 0.1.into();
    std::fs::write(&path, value.to_string()).unwrap();
    let out = bin().arg("simulate").arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let record = error_record(&out);
    assert_eq!(record.kind, "config");
    assert_eq!(record.field.as_deref(), Some("dtt"));

    let out = bin()
        .args(["simulate", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // Subcommand and config kind must agree.
    let cfg = write_config(dir.path(), "sim.json", &presets::simulate_schooling());
    let out = bin().arg("cohesion").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out).field.as_deref(), Some("kind"));
}

#[test]
fn simulate_writes_reproducible_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", &presets::simulate_schooling());
    let run = |out: &str| {
        let status = bin()
            .arg("simulate")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .arg("--csv")
            .status()
            .unwrap();
        assert!(status.success());
    };
    run("a");
    run("b");
    let summary: SimulationReport = read_json(&dir.path().join("a/summary.json")).unwrap();
    assert!(summary.schooling, "{summary:?}");
    let records = read_trajectory(&dir.path().join("a/trajectory.jsonl")).unwrap();
    assert_eq!(records.len(), summary.n_samples);
    assert!(records.iter().all(|r| r.config_hash == summary.config_hash));
    assert_eq!(records.last().unwrap().t, 35.0);

    for file in ["summary.json", "trajectory.jsonl", "trajectory.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between identical runs");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains(&summary.config_hash));
    assert_eq!(lines.next().unwrap(), "t,agent,x0,x1,v0,v1");
}

fn quick_pattern() -> ExperimentConfig {
    let mut cfg = presets::pattern_run(2.0);
    cfg.model.n_agents = 8;
    cfg.criteria.theta = 1e-4;
    cfg.solver.dt = 2e-3;
    if let Some(setup) = &mut cfg.encounter {
        setup.relax_t_max = 300.0;
    }
    cfg.solver.t_end = 10.0;
    cfg
}

#[test]
fn pattern_run_and_classify_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pattern.json", &quick_pattern());
    let out_dir = dir.path().join("run");
    let out = bin()
        .arg("classify")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: PatternReport = read_json(&out_dir.join("report.json")).unwrap();
    assert!(out_dir.join("bootstrap-cache").read_dir().unwrap().count() == 1);

    let out = bin()
        .arg("classify")
        .arg("--config")
        .arg(&cfg)
        .arg("--trajectory")
        .arg(out_dir.join("trajectory.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.trim(), format!("label: {}", report.label));
}

#[test]
fn sweep_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_pattern();
    cfg.kind = fishschool::harness::ExperimentKind::SweepSpeed;
    cfg.grid = Some(fishschool::harness::sweep::GridSpec::Values {
        values: vec![1.0, 4.0],
    });
    let path = write_config(dir.path(), "sweep.json", &cfg);
    let out_dir = dir.path().join("sweep");
    let out = bin()
        .args(["sweep", "speed", "--workers", "2", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let report: SweepArtifact = serde_json::from_str(&text).unwrap();
    assert_eq!(report.report.labels.len(), 2);
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
}

#[test]
fn sweep_with_every_point_failing_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_pattern();
    cfg.kind = fishschool::harness::ExperimentKind::SweepSpeed;
    cfg.grid = Some(fishschool::harness::sweep::GridSpec::Values {
        values: vec![1.0, 2.0],
    });
    // The school cannot be placed this close to the obstacle.
    cfg.encounter.as_mut().unwrap().gap = 1.3;
    let path = write_config(dir.path(), "sweep.json", &cfg);
    let out = bin()
        .args(["sweep", "speed", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out).kind, "numerical");
    let report: SweepArtifact = read_json(&dir.path().join("out/report.json")).unwrap();
    assert_eq!(report.report.failed_points(), 2);
}
