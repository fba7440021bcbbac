use std::path::Path;
use std::process::Command;

use ncmaxerg::matalg::{Mat, C64};
use ncmaxerg::report::{parse_report, to_fixed_json};
use ncmaxerg::scenario::{single_block, InputSpec, MapSpec, Scenario};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ncmaxerg"))
}

fn diag(v: &[f64]) -> Mat {
    Mat::from_fn(v.len(), v.len(), |i, j| C64::new(if i == j { v[i] } else { 0.0 }, 0.0))
}

fn write_scenario(dir: &Path, name: &str, scenario: &Scenario) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, to_fixed_json(scenario).unwrap()).unwrap();
    path
}

fn random_scenario() -> Scenario {
    let mut s = Scenario::identity_example(3, 1.0);
    let rho = diag(&[0.5, 0.3, 0.2]);
    s.state = Some(single_block(&rho));
    s.map = MapSpec::Random { seed: Some(11) };
    s.input = InputSpec::Random { seed: Some(5), trace: 2.0 };
    s.n_max = 4;
    s.horizon = 15;
    s
}

#[test]
fn identity_scenario_exits_zero_with_unit_projections() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "id.json", &Scenario::identity_example(2, 2.0));
    let out = dir.path().join("id.out.json");
    let status = bin().arg("verify").arg(&path).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let report = parse_report(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for p in &report.pointwise {
        assert_eq!(p.projection_rank, 2);
        let proj = p.projection.as_ref().unwrap().to_block_matrix().unwrap();
        assert_eq!(proj, ncmaxerg::matalg::BlockMatrix::identity(&[2]));
    }
}

#[test]
fn default_report_path_sits_next_to_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "case.json", &Scenario::identity_example(2, 2.0));
    let status = bin().arg("verify").arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("case.report.json").exists());
}

#[test]
fn singular_state_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::identity_example(2, 2.0);
    s.state = Some(single_block(&diag(&[1.0, 0.0])));
    let path = write_scenario(dir.path(), "bad.json", &s);
    let out = bin().arg("verify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not faithful"));
}

#[test]
fn malformed_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.json");
    std::fs::write(&path, "{\"schema\": 3}").unwrap();
    assert_eq!(bin().arg("verify").arg(&path).status().unwrap().code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "rand.json", &random_scenario());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(bin().arg("verify").arg(&path).arg("--out").arg(&a).status().unwrap().code(), Some(0));
    assert_eq!(bin().arg("verify").arg(&path).arg("--out").arg(&b).status().unwrap().code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn suite_with_zero_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let status =
        bin().args(["suite", "--seed", "1", "--count", "0", "--dims", "2", "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn small_suite_is_deterministic_and_exports_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let run = |out: &Path, extra: &[&str]| {
        bin()
            .args(["suite", "--seed", "7", "--count", "10", "--dims", "2", "--out"])
            .arg(out)
            .args(extra)
            .status()
            .unwrap()
    };
    assert_eq!(run(&a, &[]).code(), Some(0));
    assert_eq!(run(&b, &["--sequential"]).code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let csv = dir.path().join("a.csv");
    assert_eq!(bin().arg("export-csv").arg(&a).status().unwrap().code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("instance,kind,n,pass"));
    assert!(text.lines().count() > 10);
}

#[test]
fn export_csv_of_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "r.json", &random_scenario());
    let report = dir.path().join("r.report.json");
    assert_eq!(bin().arg("verify").arg(&path).status().unwrap().code(), Some(0));
    let csv = dir.path().join("rows.csv");
    assert_eq!(bin().arg("export-csv").arg(&report).arg("--out").arg(&csv).status().unwrap().code(), Some(0));
    // header, five pointwise rows, one uniform row
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);
}
