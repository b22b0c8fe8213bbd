mod common;

use std::process::Command;

use ots_cli::commands::*;
use ots_cli::formats::{read_model, read_raster};
use ots_cli::CliError;
use ots_core::surrogate;

fn ots() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ots"))
}

#[test]
fn generate_and_train_are_byte_deterministic() {
    let t = common::trained();
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&t.cfg, 5, &dir.path().join("ds")).unwrap();
    let a = std::fs::read(t.dataset().join("manifest.json")).unwrap();
    let b = std::fs::read(dir.path().join("ds/manifest.json")).unwrap();
    assert_eq!(a, b);
    cmd_train(&dir.path().join("ds"), &t.cfg, 5, &dir.path().join("m.otsm")).unwrap();
    assert_eq!(std::fs::read(t.model_path()).unwrap(), std::fs::read(dir.path().join("m.otsm")).unwrap());
}

#[test]
fn other_seeds_change_the_dataset() {
    let t = common::trained();
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_generate(&t.cfg, 6, &dir.path().join("ds")).unwrap();
    assert_ne!(m.to_json(), std::fs::read_to_string(t.dataset().join("manifest.json")).unwrap());
}

#[test]
fn tampered_dataset_is_detected() {
    let t = common::trained();
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    cmd_generate(&t.cfg, 5, &ds).unwrap();
    let snap = ds.join("snapshots/g01_p003.otr");
    let mut bytes = std::fs::read(&snap).unwrap();
    let n = bytes.len();
    bytes[n - 100] ^= 1;
    std::fs::write(&snap, bytes).unwrap();
    assert!(matches!(load_dataset(&ds), Err(CliError::Format(_))));
}

#[test]
fn dataset_reloads_exactly() {
    let t = common::trained();
    let ds = load_dataset(&t.dataset()).unwrap();
    assert_eq!((ds.k(), ds.p()), (3, 8));
    let again = build_dataset(&t.cfg, 5).unwrap();
    assert_eq!(ds.params, again.params);
    for (a, b) in ds.snapshots.iter().flatten().zip(again.snapshots.iter().flatten()) {
        assert_eq!(a.values, b.values);
        assert_eq!(a.grid.mask, b.grid.mask);
    }
}

#[test]
fn infer_writes_the_inferred_raster() {
    let t = common::trained();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.otr");
    let target = Target::Weights(vec![0.3, 0.3, 0.4]);
    let (inf, wall) = cmd_infer(&t.model_path(), 0.7, 0.2, &target, &out).unwrap();
    assert!(wall >= 0.0);
    assert_eq!(read_raster(&out).unwrap().values, inf.field.values);
    let direct = infer(&t.model, 0.7, 0.2, &target).unwrap();
    assert_eq!(direct.field.values, inf.field.values);
}

#[test]
fn geometry_target_matches_fixed_geometry_inference() {
    let t = common::trained();
    for g in 0..3 {
        let a = infer(&t.model, 0.5, 0.3, &Target::Geometry(g)).unwrap();
        let b = surrogate::infer_fixed_geometry(&t.model, g, &[0.5, 0.3]).unwrap();
        assert_eq!(a.field.values, b.field.values);
    }
    assert!(matches!(infer(&t.model, 0.5, 0.3, &Target::Geometry(3)), Err(CliError::Usage(_))));
}

#[test]
fn solve_on_a_training_domain_reproduces_its_snapshot() {
    let t = common::trained();
    let ds = load_dataset(&t.dataset()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let [theta, lambda] = [ds.params[1][2][0], ds.params[1][2][1]];
    let (field, _) = cmd_solve(&t.model_path(), &t.cfg, theta, lambda, &Target::Geometry(1), &dir.path().join("s.otr")).unwrap();
    let reference = &ds.snapshots[1][2];
    let diff = field.values.iter().zip(&reference.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn bench_rows_follow_the_configured_counts() {
    let t = common::trained();
    let clouds = bench_clouds(&t.cfg, 1).unwrap();
    let rows = bench_sweep(&t.cfg, &clouds, 1).unwrap();
    assert_eq!(rows.iter().map(|r| r.total_snapshots).collect::<Vec<_>>(), vec![6, 12]);
    assert!(rows.iter().all(|r| r.wall_seconds > 0.0 && r.final_cost > 0.0));
    let csv = bench_csv(&rows);
    assert!(csv.starts_with("total_snapshots,wall_seconds,final_cost\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn report_uses_the_stage_table_layout() {
    let t = common::trained();
    let ds = load_dataset(&t.dataset()).unwrap();
    let (_, report) = train_dataset(&ds, &t.cfg.surrogate, 5).unwrap();
    let text = format_report(&report);
    for needle in ["SSM Offline Stage", "Particle Decomposition", "P-Dimensional Matching (P = 24)", "SSM Training", "SGM Offline Stage", "K-Dimensional Matching (K = 3)", "Total offline"] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }
}

#[test]
fn binary_reports_exit_codes() {
    let t = common::trained();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.otr");
    let model = t.model_path();
    let run = |args: &[&str]| ots().args(args).output().unwrap();

    let ok = run(&["infer", "--model", model.to_str().unwrap(), "--theta", "0.6", "--lambda", "0.3", "--weights", "0.2,0.3,0.5", "--out", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("wall time"));

    let bad = run(&["infer", "--model", model.to_str().unwrap(), "--theta", "0.6", "--lambda", "0.3", "--weights", "0.5,0.6,0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let neither = run(&["infer", "--model", model.to_str().unwrap(), "--theta", "0.6", "--lambda", "0.3", "--out", out.to_str().unwrap()]);
    assert_eq!(neither.status.code(), Some(2));
    let missing = run(&["infer", "--model", "/nonexistent/model.otsm", "--theta", "0.6", "--lambda", "0.3", "--geometry", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    let unknown = run(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn default_config_is_loadable() {
    let out = ots().arg("default-config").output().unwrap();
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    assert_eq!(ots_cli::RunConfig::load(&path).unwrap(), ots_cli::RunConfig::default());
    std::fs::write(&path, "[grid]\nnx = 1\n").unwrap();
    let bad = ots().args(["--config", path.to_str().unwrap(), "default-config"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn model_file_records_the_seed() {
    let t = common::trained();
    assert_eq!(read_model(&t.model_path()).unwrap().provenance.seed, 5);
}
