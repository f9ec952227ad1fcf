use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mark0(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mark0"))
        .current_dir(dir)
        .env_remove("MARK0_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

const SMALL: [&str; 4] = ["--set", "parameters.n_firms=40", "--set", "run.equilibration_months=60"];

#[test]
fn version_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = mark0(dir.path(), &["--version"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), format!("mark0 {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn zero_horizon_writes_an_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--preset", "inactive", "--horizon", "0", "--out", "o"];
    args.extend(SMALL);
    let o = mark0(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("o/run-1.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("month,unemployment,"));
}

#[test]
fn unknown_override_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = mark0(dir.path(), &["run", "--preset", "inactive", "--set", "parameters.gama=0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parameters.gama"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists(), "nothing runs before validation");
}

#[test]
fn regime_inconsistency_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mark0(dir.path(), &["run", "--preset", "floating", "--set", "central_bank.taylor_strength=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("central_bank.taylor_strength"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_and_bad_usage_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mark0(dir.path(), &["run", "--preset", "hawkish"]).status.code(), Some(1));
    assert_eq!(mark0(dir.path(), &["fly"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let mut args = vec!["run", "--preset", "inactive", "--horizon", "2", "--out", "blocker/sub"];
    args.extend(SMALL);
    let o = mark0(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn out_dir_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--preset", "anchored", "--horizon", "3"];
    args.extend(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_mark0"))
        .current_dir(dir.path())
        .env("MARK0_OUT_DIR", "from-env")
        .args(&args)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from-env/run-1.csv").exists());
}

#[test]
fn config_file_and_document_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.toml"),
        "[central_bank]\nregime = \"floating_trust\"\ntarget = 0.002\ntaylor_strength = 2.0\nanchor = 0.95\n\
         trust_sensitivity = 0.4\n\n[interventions.easy_credit]\nenabled = true\n\n[run]\nhorizon_months = 24\nstride = 3\n",
    )
    .unwrap();
    let mut args = vec!["run", "--config", "s.toml", "--format", "doc", "--seeds", "4,5", "--out", "o"];
    args.extend(SMALL);
    let o = mark0(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/run-5.json")).unwrap()).unwrap();
    assert_eq!(doc["seed"], 5);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config"]["central_bank"]["taylor_strength"], 2.0);
    assert_eq!(doc["months"].as_array().unwrap().len(), 8);
    assert_eq!(doc["series"]["unemployment"].as_array().unwrap().len(), 8);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_accepts_ellipsis_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--preset",
        "floating",
        "--param",
        "interventions.helicopter.kappa_h",
        "--values",
        "0,0.2,...,0.6",
        "--set",
        "interventions.helicopter.enabled=true",
        "--seeds",
        "1..2",
        "--out",
        "o",
    ];
    args.extend(SMALL);
    let o = mark0(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap();
    let values: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(values, ["0", "0.2", "0.4", "0.6"]);
}

#[test]
fn calibrate_reads_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = repo_root().join("crates/core/tests/fixtures/pce.csv");
    let o = mark0(dir.path(), &["calibrate", "--input", input.to_str().unwrap(), "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((fit["magnitude"].as_f64().unwrap() - 0.15).abs() < 0.03);
    let missing = mark0(dir.path(), &["calibrate", "--input", "nope.csv"]);
    assert_ne!(missing.status.code(), Some(0));
}

/// Every `mark0 ...` line of the README cookbook, at 40 firms and two seeds.
#[test]
fn cookbook_runs_at_small_scale() {
    let readme = std::fs::read_to_string(repo_root().join("README.md")).unwrap();
    let section = readme.split("### Cookbook").nth(1).expect("cookbook section");
    let block = section.split("```sh").nth(1).unwrap().split("```").next().unwrap();
    let lines: Vec<&str> = block.lines().map(str::trim).filter(|l| l.starts_with("mark0 ")).collect();
    assert!(lines.len() >= 20, "cookbook has {} lines", lines.len());
    let dir = tempfile::tempdir().unwrap();
    let root = repo_root();
    for line in lines {
        let mut args: Vec<String> = line.split_whitespace().skip(1).map(|s| {
            if s.starts_with("crates/") {
                root.join(s).to_string_lossy().into_owned()
            } else {
                s.to_string()
            }
        }).collect();
        let verb = args[0].clone();
        if verb != "calibrate" {
            args.extend(SMALL.iter().map(|s| s.to_string()));
            if verb != "run" && !args.iter().any(|a| a == "--seeds") {
                args.extend(["--seeds".to_string(), "1..2".to_string()]);
            }
        }
        if verb == "phase" {
            args.extend(["--g".to_string(), "0.8,1.2".to_string()]);
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = mark0(dir.path(), &refs);
        assert!(o.status.success(), "`{line}` failed: {}", stderr(&o));
    }
}

#[test]
fn cli_and_library_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--preset", "anchored", "--seeds", "3", "--out", "o"];
    args.extend(SMALL);
    let o = mark0(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = std::fs::File::open(dir.path().join("o/run-3.csv")).unwrap();
    let from_cli = mark0_core::export::read_csv(file, "run-3.csv").unwrap();

    let mut config = mark0_core::ScenarioConfig::preset("anchored").unwrap();
    config.parameters.n_firms = 40;
    config.run.equilibration_months = 60;
    let direct = mark0_core::run_seed(&config, 3, None).unwrap();
    assert_eq!(from_cli, direct.records);
}

#[test]
fn readme_config_example_loads() {
    let readme = std::fs::read_to_string(repo_root().join("README.md")).unwrap();
    let example = readme.split("```toml").nth(1).unwrap().split("```").next().unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("example.toml"), example).unwrap();
    let mut args = vec!["run", "--config", "example.toml", "--horizon", "2", "--format", "doc", "--out", "o"];
    args.extend(SMALL);
    let o = mark0(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/run-1.json")).unwrap()).unwrap();
    assert_eq!(doc["config"]["central_bank"]["regime"], "floating_trust");
    assert_eq!(doc["config"]["interventions"]["easy_credit"]["enabled"], true);
}
