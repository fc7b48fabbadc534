use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rcrs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcrs")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn generate_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcrs(&["generate", "--family", "complete_bipartite", "--n", "3", "-o", "k33.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let graph: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("k33.json")).unwrap()).unwrap();
    assert_eq!(graph["vertex_count"], 6);
    assert_eq!(graph["edges"].as_array().unwrap().len(), 9);

    let o = rcrs(&["validate", "k33.json"], dir.path());
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["odd_girth"], "inf");
}

#[test]
fn validate_flags_overloaded_vertex() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"vertex_count":3,"edges":[[0,1,0.7],[1,2,0.7]]}"#).unwrap();
    assert_eq!(code(&rcrs(&["validate", "bad.json"], dir.path())), 1);
}

#[test]
fn simulate_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcrs(
        &["simulate", "--family", "star", "--k", "4", "--x", "0.25", "--scheme", "rank1-closed", "--trials", "2000", "--name", "s"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("s.edges.csv")).unwrap();
    assert!(csv.starts_with("# rcrs edges v1\n"));
    assert_eq!(csv.lines().count(), 2 + 4);
}

#[test]
fn empty_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("suite.json"), r#"{"experiments":[]}"#).unwrap();
    assert_eq!(code(&rcrs(&["suite", "suite.json"], dir.path())), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("reports/suite.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let suite = r#"{"experiments":[{"task":"simulate","name":"strict","instance":{"family":"single_edge","x":1.0},
        "scheme":"rank1-closed","trials":500,"seed":3,"output":"sub","checks":[{"check":"min_ratio","at_least":0.99}]}]}"#;
    fs::write(dir.path().join("suite.json"), suite).unwrap();
    let o = rcrs(&["suite", "suite.json"], dir.path());
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("reports/sub/strict.edges.csv").exists());
}

#[test]
fn switch_time_on_rank1_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let suite = r#"{"experiments":[{"task":"simulate","instance":{"family":"path","edges":2},
        "scheme":"rank1-closed","t":0.5,"trials":10,"seed":1}]}"#;
    fs::write(dir.path().join("suite.json"), suite).unwrap();
    let o = rcrs(&["suite", "suite.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`t`"));
}

#[test]
fn selection_table_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcrs(&["selection", "--g", "3,inf", "--points", "11", "-o", "sel.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("sel.csv")).unwrap();
    assert!(csv.starts_with("# rcrs selection v1\n"));
}
