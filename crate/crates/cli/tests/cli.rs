//! End-to-end runs of the command-line driver.

use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "experiment,engine,metric,param_names,param_values,value,std_error,trials,seed";

const SMALL: &str = r#"name = "small"
engine = "analytic-approx"

[base]
k_max = 2

[[sweep]]
param = "snr_db"
values = [20, 40]
"#;

fn noma_harq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noma-harq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analytic_sweep_writes_one_row_per_point_and_metric() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let o = noma_harq(dir.path(), &["run", "small.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 1 + 2 * 4);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&first[..5], ["small", "analytic-approx", "ltat", "snr_db", "2.0000000000000000e1"]);
    // 17 significant digits; no Monte Carlo columns.
    let mantissa = first[5].split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    assert_eq!(&first[6..], ["", "", ""]);
}

#[test]
fn simulation_reruns_are_byte_identical_and_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let args = [
        "run", "small.toml", "--engine", "both", "--trials", "2000", "--seed", "9", "--out", "a.csv", "--json", "a.json",
    ];
    assert!(noma_harq(dir.path(), &args).status.success());
    let mut again = args;
    again[9] = "b.csv";
    again[11] = "b.json";
    assert!(noma_harq(dir.path(), &again).status.success());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.json"), read("b.json"));

    let csv = String::from_utf8(read("a.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let json: serde_json::Value = serde_json::from_slice(&read("a.json")).unwrap();
    let records = json.as_array().expect("array of records");
    assert_eq!(records.len(), rows.len());
    assert!(rows.iter().any(|r| r[1] == "monte-carlo" && r[7] == "2000" && r[8] == "9"));
    for (row, rec) in rows.iter().zip(records) {
        assert_eq!(rec["metric"].as_str().unwrap(), row[2]);
        let value: f64 = row[5].parse().unwrap();
        assert_eq!(rec["value"].as_f64().unwrap(), value);
    }
}

#[test]
fn command_line_settings_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let o = noma_harq(dir.path(), &["run", "small.toml", "sweep.snr_db=[30]", "metrics=[\"ltat\"]", "base.k_max=1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("small,analytic-approx,ltat,snr_db,3.0000000000000000e1,"));
}

#[test]
fn presets_resolve_and_accept_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = noma_harq(dir.path(), &["preset", "fig4a", "sweep.snr_db=[40]", "--print"]);
    assert!(o.status.success());
    let printed = stdout(&o);
    assert!(printed.contains("fig4a") && printed.contains("interference_mode"));

    let o = noma_harq(dir.path(), &["preset", "fig4a", "sweep.snr_db=[40]"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("interference_mode;snr_db,correlated;4.0000000000000000e1,"));
}

#[test]
fn invalid_input_exits_with_two_and_errors_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let code = |args: &[&str]| noma_harq(dir.path(), args).status.code();
    assert_eq!(code(&["run", "small.toml", "base.d2=1"]), Some(2));
    assert_eq!(code(&["run", "small.toml", "bogus=1"]), Some(2));
    assert_eq!(code(&["run", "small.toml", "sweep.snr_db=[]"]), Some(2));
    assert_eq!(code(&["run", "small.toml", "--engine", "guess"]), Some(2));
    assert_eq!(code(&["preset", "fig99"]), Some(2));
    assert_eq!(code(&["run", "missing.toml"]), Some(1));
    write(dir.path(), "broken.toml", "name = ");
    assert_eq!(code(&["run", "broken.toml"]), Some(2));
}

#[test]
fn worker_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_noma-harq"))
            .current_dir(dir.path())
            .env("NOMA_HARQ_WORKERS", workers)
            .args(["run", "small.toml", "--engine", "monte-carlo", "--trials", "3000"])
            .output()
            .unwrap()
    };
    let (one, three) = (run("1"), run("3"));
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn optimization_task_reports_its_argmax() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "opt.toml",
        r#"name = "opt"
task = "optimize-rates"

[base]
k_max = 1
snr_db = 40
eps = 0.1

[optimize]
grid = 8
refinements = 1
"#,
    );
    let o = noma_harq(dir.path(), &["run", "opt.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let metrics: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert!(metrics.contains(&"objective") && metrics.contains(&"feasible") && metrics.contains(&"r1"));
}

#[test]
fn self_check_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = noma_harq(dir.path(), &["validate", "--trials", "5000"]);
    assert!(o.status.success(), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().count() >= 3);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
