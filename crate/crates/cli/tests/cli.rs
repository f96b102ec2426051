use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mtfl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtfl"))
        .current_dir(root())
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_every_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mtfl(
        &["run", "--runs", "2", "--augment", "7", "--ablate", "ihr", "--trace"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "runs.json",
        "model_comparison.csv",
        "experiment_report.json",
        "global_importance.csv",
        "local_importance.csv",
        "local_importance.svg",
        "local_importance_ridge.svg",
        "selection_report.csv",
        "ablation.csv",
        "augmentation_manifest.json",
        "trace_fsgl.csv",
    ] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let cmp = read(&tmp.path().join("model_comparison.csv"));
    assert_eq!(cmp.lines().count(), 4);
    assert!(cmp.starts_with("model,rmse_mean,rmse_std"));
    let ablation = read(&tmp.path().join("ablation.csv"));
    assert_eq!(ablation.lines().count(), 3);
    assert!(read(&tmp.path().join("local_importance.svg")).starts_with("<svg"));
}

#[test]
fn ingest_and_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(mtfl(&["ingest"], tmp.path()).status.success());
    let ds = read(&tmp.path().join("dataset.csv"));
    assert_eq!(ds.lines().count(), 30);
    let header = ds.lines().next().unwrap();
    assert!(header.starts_with("region_id,"));
    assert!(header.ends_with("cfr_day_42"));

    assert!(mtfl(&["simulate"], tmp.path()).status.success());
    assert_eq!(read(&tmp.path().join("seir_trajectory.csv")).lines().count(), 44);
}

#[test]
fn staged_commands_match_the_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (full, staged) = (tmp.path().join("full"), tmp.path().join("staged"));
    assert!(mtfl(&["run", "--runs", "2", "--model", "lasso"], &full)
        .status
        .success());
    assert!(mtfl(&["experiment", "--runs", "2", "--model", "lasso"], &staged)
        .status
        .success());
    let input = staged.join("runs.json");
    assert!(mtfl(&["report", "--input", input.to_str().unwrap()], &staged)
        .status
        .success());
    for f in [
        "runs.json",
        "global_importance.csv",
        "local_importance.csv",
        "experiment_report.json",
    ] {
        assert_eq!(read(&full.join(f)), read(&staged.join(f)), "{f}");
    }
}

#[test]
fn missing_input_is_a_config_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mtfl(&["run", "--epidemic", "no/such/epidemic.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/epidemic.csv"));
}

#[test]
fn bad_config_values_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n_runz": 3}"#).unwrap();
    let out = mtfl(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = mtfl(&["run", "--window", "40"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_mode_reports_unconverged_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"models": ["fsgl"], "n_runs": 1, "strict": true, "experiment": {"solver": {"max_iter": 1}}}"#,
    )
    .unwrap();
    let out = mtfl(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("runs.json").is_file());
}

#[test]
fn data_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("epidemic.csv");
    std::fs::write(
        &bad,
        "region_id,day,confirmed_cases,confirmed_deaths\ncountry_01,0,abc,1\n",
    )
    .unwrap();
    let out = mtfl(&["ingest", "--epidemic", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
