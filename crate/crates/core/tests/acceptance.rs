//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line to the
//! process's stderr (bypassing output capture) and then asserts.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::json;

use rcrs::arrival::{ArrivalSampler, Coins, VertexArrivals};
use rcrs::exec::{fold_trials, Exec};
use rcrs::harness::suite::run_suite_config;
use rcrs::harness::{CheckOutcome, SuiteConfig, Task};
use rcrs::rng::StreamKey;
use rcrs::selection::{alpha_closed_form, alpha_numeric, verify_selection_conditions, SelectionFunction};
use rcrs::two_phase::{find_t0, guarantee_poly, survival_prob, t0_polynomial, PruneParams, TwoPhase};
use rcrs::{Family, OddGirth};

const E2: f64 = 7.389_056_098_930_65;
const ALPHA_INF: f64 = 0.567_667_641_618_306_3;
const ALPHA_5: f64 = 0.563_375_853_082_684_7;
const GUARANTEE_AT_T0: f64 = 0.535_156_098_317_364_1;
const GUARANTEE_AT_PEAK: f64 = 0.540_192_378_864_668_4;
const HARDNESS_LIMIT: f64 = 0.567_667_641_618_306_3;

struct Clause {
    text: String,
    ok: bool,
}

fn clause(ok: bool, text: impl Into<String>) -> Clause {
    Clause { text: text.into(), ok }
}

fn within(elapsed: Duration, limit_secs: f64) -> Clause {
    let s = elapsed.as_secs_f64();
    clause(s < limit_secs, format!("runtime {s:.1}s < {limit_secs}s"))
}

fn from_checks(task: &str, checks: &[CheckOutcome]) -> Vec<Clause> {
    checks.iter().map(|c| clause(c.passed, format!("{task} {}: {}", c.check, c.detail))).collect()
}

/// Prints the criterion's line, then fails the test if any clause failed.
fn verdict(n: u32, title: &str, clauses: Vec<Clause>) {
    let ok = clauses.iter().all(|c| c.ok);
    let body: Vec<String> = clauses.iter().map(|c| format!("[{}] {}", if c.ok { "ok" } else { "FAIL" }, c.text)).collect();
    let line = format!("{} criterion {n} ({title}): {}", if ok { "PASS" } else { "FAIL" }, body.join("; "));
    let mut err = std::io::stderr().lock();
    writeln!(err, "{line}").unwrap();
    err.flush().unwrap();
    assert!(ok, "{line}");
}

fn tasks(value: serde_json::Value) -> Vec<Task> {
    serde_json::from_value(value).expect("acceptance tasks parse")
}

fn run_tasks(experiments: Vec<Task>, out: &Path) -> Vec<Clause> {
    let cfg = SuiteConfig { output_dir: None, experiments };
    let outcome = run_suite_config(&cfg, Path::new("."), out).expect("suite runs");
    outcome.tasks.iter().flat_map(|t| from_checks(&t.name, &t.checks)).collect()
}

/// Scales trial counts for the reduced determinism re-runs.
fn n(full: u64, scale: u64) -> u64 {
    (full / scale).max(1)
}

fn rank1_tasks(scale: u64) -> Vec<Task> {
    tasks(json!([{
        "task": "simulate", "name": "c3_rank1_star4",
        "instance": {"family": "star", "k": 4, "x": 0.25},
        "scheme": "rank1-closed", "trials": n(1_000_000, scale), "seed": 3,
        "checks": [
            {"check": "ratio_within", "target": 1.0 - (-1.0f64).exp(), "tol": 0.005},
            {"check": "bins_in_band", "sigmas": 3.0},
            {"check": "safety_in_band", "sigmas": 3.0}
        ]
    }]))
}

fn edge_tasks(scale: u64) -> Vec<Task> {
    let (phases, q) = if scale == 1 { (10_000, 1000) } else { (200, 100) };
    tasks(json!([
        {
            "task": "simulate", "name": "c4_tree15",
            "instance": {"family": "random_tree", "edges": 15, "seed": 1},
            "scheme": "recursive-edge", "edge_function": "tree",
            "T": phases, "delta": 0.0, "Q": q, "trials": n(1_000_000, scale), "seed": 4,
            "checks": [{"check": "ratio_within", "target": 0.5, "tol": 0.01}]
        },
        {
            "task": "simulate", "name": "c4_double_star8",
            "instance": {"family": "double_star", "n": 8},
            "scheme": "recursive-edge", "edge_function": "general",
            "T": phases, "delta": 0.0, "Q": q, "trials": n(1_000_000, scale), "seed": 4,
            "checks": [{"check": "ratio_within", "target": (1.0 - 1.0 / E2) / 2.0, "tol": 0.02, "edges": [0]}]
        }
    ]))
}

fn recursive_vertex_tasks(scale: u64) -> Vec<Task> {
    let mut t = tasks(json!([
        {
            "task": "simulate", "name": "c5_k66",
            "instance": {"family": "complete_bipartite", "n": 6},
            "scheme": "recursive-vertex", "T": 20, "delta": 0.05, "trials": n(1_000_000, scale), "seed": 5,
            "checks": [
                {"check": "min_ratio", "at_least": 0.95 * 0.95 * ALPHA_INF, "sigmas": 3.0},
                {"check": "bins_in_band", "sigmas": 3.0}
            ]
        },
        {
            "task": "simulate", "name": "c5_c5",
            "instance": {"family": "odd_cycle", "g": 5},
            "scheme": "recursive-vertex", "T": 20, "delta": 0.05, "trials": n(1_000_000, scale), "seed": 5,
            "checks": [
                {"check": "min_ratio", "at_least": 0.95 * 0.95 * ALPHA_5, "sigmas": 3.0},
                {"check": "bins_in_band", "sigmas": 3.0}
            ]
        }
    ]));
    // Full scale takes `Q` from the sample-complexity bound.
    if scale > 1 {
        for task in &mut t {
            if let Task::Simulate(c) = task {
                c.samples = Some(200);
            }
        }
    }
    t
}

fn two_phase_tasks(scale: u64) -> Vec<Task> {
    tasks(json!([
        {
            "task": "simulate", "name": "c6_k31_t0",
            "instance": {"family": "complete", "n": 31},
            "scheme": "two-phase", "t": "t0", "trials": n(100_000, scale), "seed": 6,
            "checks": [{"check": "min_ratio", "at_least": 0.535, "sigmas": 3.0}]
        },
        {
            "task": "simulate", "name": "c6_k88_t1",
            "instance": {"family": "complete_bipartite", "n": 8},
            "scheme": "two-phase", "t": 1.0, "trials": n(1_000_000, scale), "seed": 6,
            "checks": [{"check": "ratio_within", "target": 0.5, "tol": 0.01}]
        },
        {
            "task": "simulate", "name": "c6_k31_t_zero",
            "instance": {"family": "complete", "n": 31},
            "scheme": "two-phase", "t": 0.0, "trials": n(100_000, scale), "seed": 6,
            "checks": [{"check": "min_ratio", "at_least": 8.0 / 15.0, "sigmas": 3.0}]
        },
        {
            "task": "simulate", "name": "c6_k61_peak",
            "instance": {"family": "complete", "n": 61},
            "scheme": "two-phase", "t": "peak", "trials": n(100_000, scale), "seed": 6,
            "checks": [{"check": "pooled_ratio_at_least", "at_least": 0.530}]
        }
    ]))
}

fn coupling_tasks(scale: u64) -> Vec<Task> {
    let checks = json!([
        {"check": "no_indicator_violations"},
        {"check": "at_most_one_potential_path"},
        {"check": "gap_within_bound", "sigmas": 3.0}
    ]);
    let q = if scale == 1 { 2000 } else { 100 };
    tasks(json!([
        {
            "task": "gap", "name": "c8_c5",
            "instance": {"family": "odd_cycle", "g": 5},
            "u": 0, "v": 1, "horizons": [0.25, 0.5, 0.9], "T": 20, "Q": q,
            "trials": n(100_000, scale), "seed": 8, "checks": checks
        },
        {
            "task": "gap", "name": "c8_k33",
            "instance": {"family": "complete_bipartite", "n": 3},
            "u": 0, "v": 3, "horizons": [0.25, 0.5, 0.9], "T": 20, "Q": q,
            "trials": n(100_000, scale), "seed": 8, "checks": checks
        }
    ]))
}

fn hardness_tasks(scale: u64) -> Vec<Task> {
    let size = if scale == 1 { 500 } else { 100 };
    tasks(json!([{
        "task": "hardness", "name": "c9_greedy_k500",
        "n": size, "trials": n(50, scale), "seed": 9,
        "checks": [
            {"check": "final_within", "target": HARDNESS_LIMIT, "tol": 0.01},
            {"check": "sup_distance_at_most", "value": 0.02},
            {"check": "balance_holds", "through": 1.9, "at_least": 0.99},
            {"check": "drift_within_bound", "sigmas": 3.0, "assert": false}
        ]
    }]))
}

#[test]
fn criterion_01_alpha_identities() {
    let start = Instant::now();
    let exact = [
        (OddGirth::Finite(3), 5.0 / 12.0 + 1.0 / (4.0 * E2)),
        (OddGirth::Finite(5), 121.0 / 240.0 + 7.0 / (16.0 * E2)),
        (OddGirth::Finite(7), 10121.0 / 20160.0 + 31.0 / (64.0 * E2)),
        (OddGirth::Infinite, (1.0 + 1.0 / E2) / 2.0),
    ];
    let mut clauses = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut increasing = true;
    for (g, want) in exact {
        let closed = alpha_closed_form(g).unwrap();
        let numeric = alpha_numeric(g, 1e-12).unwrap();
        clauses.push(clause((closed - want).abs() <= 1e-12, format!("alpha_{g} closed {closed:.15} vs {want:.15}")));
        clauses.push(clause((numeric - closed).abs() <= 1e-9, format!("alpha_{g} numeric differs by {:.1e}", (numeric - closed).abs())));
        increasing &= closed > prev;
        prev = closed;
    }
    clauses.push(clause(increasing, "strictly increasing in g"));
    clauses.push(within(start.elapsed(), 1.0));
    verdict(1, "alpha identities", clauses);
}

#[test]
fn criterion_02_selection_certificate() {
    let start = Instant::now();
    let mut clauses = Vec::new();
    for g in [OddGirth::Finite(3), OddGirth::Finite(5), OddGirth::Finite(7), OddGirth::Infinite] {
        let c = SelectionFunction::vertex(g).unwrap();
        let r = verify_selection_conditions(&c, g, 1000).unwrap();
        clauses.push(clause(
            r.passed() && r.max_abs_slack <= 1e-8,
            format!("g={g}: {} violations, max |slack| {:.1e}", r.monotone_violations.len() + r.floor_violations.len() + r.inequality_violations.len(), r.max_abs_slack),
        ));
    }
    clauses.push(within(start.elapsed(), 10.0));
    verdict(2, "selection-function certificate", clauses);
}

#[test]
fn criterion_03_rank1() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut clauses = run_tasks(rank1_tasks(1), dir.path());
    clauses.push(within(start.elapsed(), 60.0));
    verdict(3, "rank-1 closed form", clauses);
}

#[test]
fn criterion_04_edge_arrivals() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut clauses = run_tasks(edge_tasks(1), dir.path());
    clauses.push(within(start.elapsed(), 300.0));
    verdict(4, "edge-arrival framework", clauses);
}

#[test]
fn criterion_05_recursive_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut clauses = run_tasks(recursive_vertex_tasks(1), dir.path());
    clauses.push(within(start.elapsed(), 1800.0));
    verdict(5, "recursive vertex scheme", clauses);
}

#[test]
fn criterion_06_two_phase() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let t0 = find_t0();
    let peak = (3f64.sqrt() - 1.0) / 2.0;
    let mut clauses = vec![
        clause(t0 > 0.118 && t0 < 0.120, format!("t0 = {t0:.12}")),
        clause(t0_polynomial(t0).abs() <= 1e-12, format!("residual {:.1e}", t0_polynomial(t0).abs())),
        clause((guarantee_poly(0.0) - 8.0 / 15.0).abs() <= 1e-12, "guarantee at 0 is 8/15"),
        clause((guarantee_poly(t0) - GUARANTEE_AT_T0).abs() <= 1e-12, format!("guarantee at t0 {:.15}", guarantee_poly(t0))),
        clause((guarantee_poly(peak) - GUARANTEE_AT_PEAK).abs() <= 1e-12, format!("guarantee at peak {:.15}", guarantee_poly(peak))),
    ];
    clauses.extend(run_tasks(two_phase_tasks(1), dir.path()));
    clauses.push(within(start.elapsed(), 900.0));
    verdict(6, "two-phase scheme", clauses);
}

/// Pinned arrival times for vertices `1..6` of `K_6`; vertex 0 arrives at
/// `Y0` and vertex 1 always arrives before it.
const Y0: f64 = 0.5;
const SWITCH: f64 = 0.6;
const PINNED: [[f64; 5]; 3] = [[0.10, 0.20, 0.30, 0.40, 0.45], [0.30, 0.05, 0.70, 0.90, 0.35], [0.45, 0.80, 0.85, 0.90, 0.95]];

/// Number of trials in which vertex 0 selects the edge to vertex 1.
fn pinned_selections(pinned: &[f64; 5], trials: u64, seed: u64, exec: Exec) -> u64 {
    let g = Family::Complete { n: 6 }.generate().unwrap();
    let scheme = TwoPhase::new(&g, PruneParams::new(SWITCH).unwrap()).unwrap();
    let sampler = ArrivalSampler::new(&g).unwrap();
    let edge = g.edge_between(0, 1).unwrap();
    let key = StreamKey::new(seed);
    let mut time = vec![Y0];
    time.extend_from_slice(pinned);
    fold_trials(
        exec,
        trials,
        || 0u64,
        |acc, trial| {
            let mut rng = key.child(trial).stream();
            let choice = (0..6).map(|v| sampler.draw_choice(v, &mut rng)).collect();
            let coins = Coins::draw(6, &mut rng);
            let s = VertexArrivals { choice, time: time.clone() };
            let m = scheme.run(&s, &coins);
            *acc += u64::from(m.accepted.iter().any(|a| a.edge == edge && a.proposer == Some(0)));
        },
        |a, b| a + b,
    )
}

#[test]
fn criterion_07_ocrs_exactness() {
    let start = Instant::now();
    let trials = 400_000u64;
    let p = survival_prob(0.2, SWITCH) / 2.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let mut clauses = Vec::new();
    for (i, pinned) in PINNED.iter().enumerate() {
        let hits = pinned_selections(pinned, trials, 70 + i as u64, Exec::Auto);
        let f = hits as f64 / trials as f64;
        clauses.push(clause((f - p).abs() <= 3.0 * sigma, format!("configuration {i}: {f:.5} vs f_t(x)/2 = {p:.5} (3 sigma {:.5})", 3.0 * sigma)));
    }
    clauses.push(within(start.elapsed(), 300.0));
    verdict(7, "OCRS exactness", clauses);
}

#[test]
fn criterion_08_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut clauses = run_tasks(coupling_tasks(1), dir.path());
    clauses.push(within(start.elapsed(), 600.0));
    verdict(8, "coupling diagnostics", clauses);
}

#[test]
fn criterion_09_hardness() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut clauses: Vec<Clause> = run_tasks(hardness_tasks(1), dir.path());
    // The drift comparison is reported for context only.
    clauses.retain(|c| !c.text.contains("drift_within_bound"));
    clauses.push(within(start.elapsed(), 300.0));
    verdict(9, "greedy hardness trajectory", clauses);
}

fn read_reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".timing.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn with_exec(mut t: Vec<Task>, exec: Exec) -> Vec<Task> {
    for task in &mut t {
        match task {
            Task::Simulate(c) => c.exec = exec,
            Task::Gap(c) => c.exec = exec,
            Task::Hardness(c) => c.exec = exec,
        }
    }
    t
}

type Suite = fn(u64) -> Vec<Task>;

#[test]
fn criterion_10_determinism() {
    const REDUCED: u64 = 20;
    let suites: [(&str, Suite); 6] = [
        ("rank1", rank1_tasks),
        ("edge", edge_tasks),
        ("recursive-vertex", recursive_vertex_tasks),
        ("two-phase", two_phase_tasks),
        ("coupling", coupling_tasks),
        ("hardness", hardness_tasks),
    ];
    let csv = |r: &[(String, Vec<u8>)]| r.iter().filter(|f| f.0.ends_with(".csv")).cloned().collect::<Vec<_>>();
    let mut clauses = Vec::new();
    for (name, build) in suites {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_tasks(build(1), a.path());
        run_tasks(build(1), b.path());
        let (ra, rb) = (read_reports(a.path()), read_reports(b.path()));
        clauses.push(clause(!ra.is_empty() && ra == rb, format!("{name}: {} report files identical on re-run", ra.len())));
        let (c, d) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_tasks(build(REDUCED), c.path());
        run_tasks(with_exec(build(REDUCED), Exec::Sequential), d.path());
        let (rc, rd) = (read_reports(c.path()), read_reports(d.path()));
        clauses.push(clause(!rc.is_empty() && csv(&rc) == csv(&rd), format!("{name}: CSV identical under the sequential executor (reduced scale)")));
    }
    let p: Vec<u64> = (0..2).map(|_| pinned_selections(&PINNED[0], 400_000, 70, Exec::Auto)).collect();
    let s = pinned_selections(&PINNED[0], 20_000, 70, Exec::Sequential);
    let r = pinned_selections(&PINNED[0], 20_000, 70, Exec::Auto);
    clauses.push(clause(p[0] == p[1] && r == s, "pinned-configuration counts identical"));
    let alphas = || [OddGirth::Finite(3), OddGirth::Infinite].map(|g| alpha_numeric(g, 1e-12).unwrap());
    clauses.push(clause(alphas() == alphas(), "analytic values identical"));
    verdict(10, "determinism", clauses);
}
