use std::process::Command;

use central_lyapunov::experiment::{run_headline, run_suite, run_sweep, ExperimentConfig, SweepAxes, XiPolicy};
use central_lyapunov::Error;

fn small(out: Option<std::path::PathBuf>) -> ExperimentConfig {
    ExperimentConfig { r: vec![0.1], horizon: 1e4, orbits: 4, output: out, ..ExperimentConfig::default() }
}

#[test]
fn headline_has_control_row_and_is_self_consistent() {
    let res = run_headline(&small(None)).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.rows[0].label, "control");
    assert!(res.control_equal && res.rows[0].passed);
    assert_eq!(res.rows[0].sigma_c_y, res.rows[0].sigma_c_x);
    assert!(res.rows.iter().all(|r| r.consistent && r.conditions_ok));
    assert!(res.scaling.is_none());
    assert_eq!(res.stderr_multiplier, 3.0);
}

#[test]
fn violated_angle_aborts_with_the_failed_condition() {
    let mut cfg = small(None);
    cfg.epsilon = Some(1e-4);
    cfg.xi = XiPolicy::Fixed { value: 0.3 };
    match run_headline(&cfg) {
        Err(Error::ConditionFailed { name, .. }) => assert_eq!(name, "c1_distance"),
        other => panic!("expected a condition failure, got {:?}", other.map(|r| r.passed)),
    }
}

#[test]
fn unknown_suite_is_an_error() {
    assert!(matches!(run_suite("nope", &small(None)), Err(Error::UnknownSuite(_))));
}

#[test]
fn domination_suite_passes() {
    let rep = run_suite("domination", &small(None)).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn perturbation_suite_fails_far_beyond_the_bound() {
    let mut cfg = small(None);
    cfg.epsilon = Some(0.01);
    let bound = central_lyapunov::perturbation::xi_bound(&central_lyapunov::perturbation::BumpProfiles::standard(), 0.1, 0.01).unwrap();
    cfg.xi = XiPolicy::Fixed { value: 1000.0 * bound };
    let rep = run_suite("perturbation", &cfg).unwrap();
    assert!(!rep.passed);
    assert!(rep.checks.iter().any(|c| c.name == "c1_distance" && !c.passed));
    cfg.xi = XiPolicy::Auto;
    assert!(run_suite("perturbation", &cfg).unwrap().passed);
}

#[test]
fn sweep_cells_are_merged_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        r: vec![0.1, 0.05],
        sweep: SweepAxes { xi: vec![0.2], horizons: vec![1e3, 2e3] },
        ..small(Some(dir.path().to_path_buf()))
    };
    let res = run_sweep(&cfg).unwrap();
    assert_eq!(res.cells.len(), 4);
    assert!(res.cells.iter().enumerate().all(|(i, c)| c.index == i));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("# index:"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
    let again = tempfile::tempdir().unwrap();
    run_sweep(&ExperimentConfig { output: Some(again.path().to_path_buf()), ..cfg }).unwrap();
    assert_eq!(std::fs::read(dir.path().join("sweep.csv")).unwrap(), std::fs::read(again.path().join("sweep.csv")).unwrap());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_central-lyapunov"))
}

#[test]
fn cli_exit_codes() {
    let ok = cli().args(["suite", "domination"]).env("CENTRAL_LYAPUNOV_WORKERS", "1").output().unwrap();
    assert!(ok.status.success());
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["passed"], true);

    let unknown = cli().args(["suite", "nope"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown suite"));

    let bad = cli().args(["perturb", "--xi", "auto"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn cli_config_and_flowbox_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"r": [0.05], "horizon": 2000}"#).unwrap();
    let out = dir.path().join("out");
    let run = cli()
        .args(["flowbox-verify", "--samples", "200", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let (fx, rows) = central_lyapunov::flowbox::read_chart_fixture(&out.join("chart_fixture.json")).unwrap();
    assert_eq!((fx.samples, rows.len()), (200, 200));
    assert!(rows.iter().all(|r| (r[8] - 1.0).abs() < 1e-12));

    let spec = cli().args(["spectrum", "--seed", "3", "--config"]).arg(&cfg).output().unwrap();
    assert!(spec.status.success());
    let v: serde_json::Value = serde_json::from_slice(&spec.stdout).unwrap();
    assert!(v["volume_identity_error"].as_f64().unwrap() < 1e-9);
}
