use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cpt_sense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpt-sense")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const HEADER: &str = "label,u0,b_sm,gamma_min,gamma_max,x_low,x_high";

#[test]
fn solve_reports_every_fixture() {
    let o = cpt_sense(&["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("label,gamma_star,f_star,mu_low,mu_high,active"));
    assert!(lines[5].starts_with("S5,7.92,"));
    assert!(lines[5].contains("upper_bound"));
}

#[test]
fn solve_json_round_trips() {
    let o = cpt_sense(&["solve", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
    assert_eq!(v[0]["optimum"]["active"], "interior");
}

#[test]
fn degenerate_box_is_rejected_by_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, format!("{HEADER}\nok,-6.8,-0.23,3.4,10.4,-7.5,6.9\nflat,-6.8,-0.23,5,5,-7.5,6.9\n")).unwrap();
    let path = path.to_str().unwrap();

    let o = cpt_sense(&["validate", "--scenarios", path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2 (`flat`)"), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 valid, 1 invalid"));

    let o = cpt_sense(&["solve", "--scenarios", path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("\nok,"), "valid rows are still solved");
}

#[test]
fn malformed_csv_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, format!("{HEADER}\nx,1,2,3\n")).unwrap();
    let o = cpt_sense(&["solve", "--scenarios", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(cpt_sense(&["solve", "--bogus"]).status.code(), Some(64));
    assert_eq!(cpt_sense(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(cpt_sense(&["solve", "--alpha=-1"]).status.code(), Some(64));
    assert_eq!(cpt_sense(&["sweep", "--steps", "1"]).status.code(), Some(64));
    assert_eq!(cpt_sense(&["mismatch", "--assume", "gamma=1"]).status.code(), Some(64));
    assert_eq!(cpt_sense(&["mismatch", "--assume", "p=1.5"]).status.code(), Some(64));
    assert_eq!(cpt_sense(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_worker_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_cpt-sense"))
        .arg("solve")
        .env("CPT_SENSE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(64));
}

fn sweep_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["sweep", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    cpt_sense(&args)
}

#[test]
fn sweep_writes_one_file_per_scenario_and_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = sweep_into(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csvs = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 20);

    let table = fs::read_to_string(dir.path().join("sweep_S1_alpha.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta_name,theta_value,gamma_star_numeric,f_star_numeric,gamma_star_taylor1,f_star_taylor1,\
         f_star_taylor2,mu_low,mu_high,active,mismatch_loss"
    );
    assert_eq!(lines.count(), 41);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let s1 = &summary["scenarios"][0];
    assert_eq!(s1["label"], "S1");
    let d = s1["differentials"]["dgamma_dalpha"].as_f64().unwrap();
    assert!((d + 2.8).abs() < 0.15 * 2.8, "{d}");
    assert_eq!(s1["continuation"]["beta"]["breakpoints"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_is_byte_identical_across_runs_and_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(sweep_into(a.path(), &["--scenarios", "random:6"]).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_cpt-sense"))
        .args(["sweep", "--scenarios", "random:6", "--out", b.path().to_str().unwrap()])
        .env("CPT_SENSE_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 25);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn sweep_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = sweep_into(dir.path(), &["--format", "json", "--param", "p"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep_S5_p.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 41);
    assert_eq!(rows[40]["theta_name"], "p");
}

#[test]
fn mismatch_without_overrides_costs_nothing() {
    let o = cpt_sense(&["mismatch"]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some("0"), "{line}");
    }
}

#[test]
fn mismatch_with_override_is_nonnegative() {
    let o = cpt_sense(&["mismatch", "--assume", "lambda=2.70"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in text.lines().skip(1) {
        let df: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(df >= 0.0, "{line}");
    }
}

#[test]
fn domain_lists_each_parameter() {
    let o = cpt_sense(&["domain"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 21);
    let s1_beta = text.lines().find(|l| l.starts_with("S1,beta,")).unwrap();
    let pct: f64 = s1_beta.split(',').nth(12).unwrap().parse().unwrap();
    assert!((pct - 8.7).abs() < 0.15 * 8.7, "{pct}");
}

#[test]
fn generated_scenarios_reload() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cpt_sense(&["gen-scenarios", "--count", "12", "--seed", "3", "--out", out]).status.code(), Some(0));
    let path = dir.path().join("scenarios.csv");
    let o = cpt_sense(&["validate", "--scenarios", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("12 valid, 0 invalid"));

    assert_eq!(
        cpt_sense(&["gen-scenarios", "--count", "4", "--format", "json", "--out", out]).status.code(),
        Some(0)
    );
    let o = cpt_sense(&["solve", "--scenarios", dir.path().join("scenarios.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 5);
}
