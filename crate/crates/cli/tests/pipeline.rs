use std::path::Path;

use jobswitch_cli::config::{CacheMode, Verbosity};
use jobswitch_cli::manifest::{StageStatus, MANIFEST_FILE};
use jobswitch_cli::{exit, run_pipeline, Method, RunConfig, RunManifest, RunRequest, Stage};

fn small(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.grid.n_x = 128;
    cfg.grid.n_tau = 128;
    cfg.mc.n_paths = 2000;
    cfg.mc.n_steps = 32;
    cfg.mc.budget_steps = 64;
    cfg.mc.merton_paths = 1000;
    cfg.output.dir = dir.to_path_buf();
    cfg.output.verbosity = Verbosity::Quiet;
    cfg
}

fn until(stage: Stage) -> RunRequest {
    RunRequest {
        verb: "test".into(),
        until: stage,
        method: Method::Both,
        tables: true,
    }
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn unit_risk_aversion_stops_at_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.model.gamma = 1.0;
    let out = run_pipeline(&cfg, &until(Stage::Verify)).unwrap();
    assert_eq!(out.exit_code, exit::VALIDATION);
    assert_eq!(listing(tmp.path()), vec![MANIFEST_FILE.to_string()]);
    let m = RunManifest::read(tmp.path()).unwrap();
    assert_eq!(m.stages[0].status, StageStatus::Failed);
    assert!(m.stages[1..].iter().all(|s| s.status == StageStatus::Blocked));
    assert!(m.files.is_empty());
}

#[test]
fn second_identical_run_hits_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let first = run_pipeline(&cfg, &until(Stage::Duality)).unwrap();
    let second = run_pipeline(&cfg, &until(Stage::Duality)).unwrap();
    assert!(first.manifest.stages.iter().all(|s| s.status != StageStatus::Failed));
    let status = |m: &RunManifest, name: &str| m.stages.iter().find(|s| s.name == name).unwrap().status;
    assert_eq!(status(&first.manifest, "solve"), StageStatus::Ok);
    assert_eq!(status(&second.manifest, "solve"), StageStatus::CacheHit);
    assert_eq!(status(&second.manifest, "duality"), StageStatus::CacheHit);
    assert_eq!(status(&second.manifest, "verify"), StageStatus::Skipped);
    assert_eq!(first.manifest.files, second.manifest.files);
}

#[test]
fn read_only_cache_never_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.output.cache = CacheMode::ReadOnly;
    run_pipeline(&cfg, &until(Stage::Solve)).unwrap();
    assert!(!cfg.output.cache_path().exists());
}

#[test]
fn manifest_checksums_match_and_detect_edits() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.output.cache = CacheMode::Off;
    let out = run_pipeline(&cfg, &until(Stage::Verify)).unwrap();
    let m = RunManifest::read(tmp.path()).unwrap();
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for f in [
        "diagnostics.json",
        "mc_report.json",
        "boundaries.csv",
        "value_surface.csv",
        "dual_values.csv",
    ] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    assert!(m.stale_files(tmp.path()).is_empty());
    assert_eq!(m.exit_code, out.exit_code);
    let order: Vec<&str> = m.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(order, ["validate", "solve", "boundaries", "duality", "verify"]);
    std::fs::write(tmp.path().join("boundaries.csv"), "t\n").unwrap();
    assert_eq!(m.stale_files(tmp.path()), vec!["boundaries.csv".to_string()]);
}

#[test]
fn upper_boundary_rows_stop_at_t1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let out = run_pipeline(&cfg, &until(Stage::Boundaries)).unwrap();
    let t1 = out.artifacts.derived.as_ref().unwrap().t1();
    let text = std::fs::read_to_string(tmp.path().join("boundaries.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,S0,S1,s0_valid,s1_valid"));
    let mut live = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let t: f64 = cols[0].parse().unwrap();
        if !cols[2].is_empty() {
            assert!(t < t1, "S1 at t = {t} >= t1 = {t1}");
            assert_eq!(cols[4], "1");
            live += 1;
        }
    }
    assert!(live > 0);
}

#[test]
fn verify_writes_only_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let req = RunRequest {
        tables: false,
        ..until(Stage::Verify)
    };
    run_pipeline(&cfg, &req).unwrap();
    let m = RunManifest::read(tmp.path()).unwrap();
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["diagnostics.json", "mc_report.json"]);
}
