use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bornlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bornlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("BORNLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn scenario(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn shipped(name: &str) -> String {
    format!("{}/scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let o = bornlab(dir.path(), &["derive", "--scenario", &shipped("rational_two_to_one.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS trace_valid"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["metrics"]["born_exact"], serde_json::json!(["2/3", "1/3"]));
    assert!(report["wall_clock_seconds"].is_number());
}

#[test]
fn failed_check_exits_one() {
    let dir = TempDir::new().unwrap();
    let s = scenario(
        &dir,
        "tails.json",
        r#"{"schema_version":1,"kind":"lln","parameters":{"tails":[{"n":10,"delta":"1/10","p":"1/2","expect":"1/2"}]}}"#,
    );
    let o = bornlab(dir.path(), &["lln", "--scenario", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL tails[0].expected"));
    assert!(dir.path().join("tails.report.json").exists());
}

#[test]
fn inconclusive_check_exits_one() {
    let dir = TempDir::new().unwrap();
    // A zero-amplitude cell has no equal-mass partner, so its weight stays free.
    let s = scenario(
        &dir,
        "under.json",
        r#"{"schema_version":1,"kind":"solve-measure","parameters":{"psi":[1.0,0.0],"grainings":[{"unit_cells":2}]}}"#,
    );
    let o = bornlab(dir.path(), &["solve-measure", "--scenario", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("INCONCLUSIVE"));
}

#[test]
fn malformed_json_exits_two_without_report() {
    let dir = TempDir::new().unwrap();
    let s = scenario(&dir, "broken.json", r#"{"schema_version":1,"kind":"#);
    let o = bornlab(dir.path(), &["derive", "--scenario", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let left: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left.len(), 1, "{left:?}");
}

#[test]
fn unknown_kind_and_mismatched_subcommand_exit_two() {
    let dir = TempDir::new().unwrap();
    let s = scenario(&dir, "odd.json", r#"{"schema_version":1,"kind":"teleport","parameters":{}}"#);
    assert_eq!(bornlab(dir.path(), &["derive", "--scenario", s.to_str().unwrap()]).status.code(), Some(2));
    let o = bornlab(dir.path(), &["games", "--scenario", &shipped("rational_two_to_one.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(bornlab(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn csv_flag_outside_simulate_exits_two() {
    let dir = TempDir::new().unwrap();
    let o = bornlab(dir.path(), &["derive", "--scenario", &shipped("rational_two_to_one.json"), "--csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let s = scenario(
        &dir,
        "uneven.json",
        r#"{"schema_version":1,"kind":"derive","parameters":{"lemma":"equiprobable","psi":[0.6,0.8],"graining":{"unit_cells":2},"parts":[[0],[1]]}}"#,
    );
    let o = bornlab(dir.path(), &["derive", "--scenario", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("uneven.report.json").exists());
}

#[test]
fn out_dir_variable_redirects_reports() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("reports");
    let o = Command::new(env!("CARGO_BIN_EXE_bornlab"))
        .args(["derive", "--scenario", &shipped("equiprobable_pair.json")])
        .current_dir(dir.path())
        .env("BORNLAB_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("equiprobable_pair.report.json").exists());
}

#[test]
fn simulate_csv_has_state_and_weight_columns() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("small.report.json");
    let o = bornlab(dir.path(), &["simulate", "--scenario", &shipped("small_ensemble.json"), "--csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("csv: "));
    let csv = fs::read_to_string(dir.path().join("small.trajectories.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trajectory,seed,t,re_0,im_0,re_1,im_1,p_0,p_1"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r.len(), 9);
        let norm = r[3] * r[3] + r[4] * r[4] + r[5] * r[5] + r[6] * r[6];
        assert!((norm - 1.0).abs() < 1e-9);
        assert!((r[7] + r[8] - 1.0).abs() < 1e-9);
    }
    assert_eq!(rows.iter().map(|r| r[0] as usize).max(), Some(1));
}

#[test]
fn seed_override_changes_the_ensemble() {
    let dir = TempDir::new().unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = bornlab(
            dir.path(),
            &["simulate", "--scenario", &shipped("small_ensemble.json"), "--seed", seed, "--out", out.to_str().unwrap()],
        );
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        v["metrics"].clone()
    };
    assert_eq!(run("11", "a.json"), run("11", "b.json"));
    assert_ne!(run("11", "a.json"), run("12", "c.json"));
}
