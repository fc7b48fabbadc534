//! Coupling and trajectory tasks, and suites mixing all task kinds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{correlation_gap, hardness_curve, hardness_trajectory, GapEstimate, TrajectoryReport};
use crate::error::{Error, Result};
use crate::graph::OddGirth;
use crate::recursive::{RecursiveParams, RecursiveVertex};
use crate::rng::{Purpose, StreamKey};
use crate::selection::SelectionFunction;

use super::config::{CheckKind, GapConfig, HardnessConfig, SuiteConfig, Task, DEFAULT_PHASES};
use super::experiment::{run_experiment, Timing};
use super::report::{num, write_csv_file, write_experiment, write_json_file, DRIFT_HEADER, GAP_HEADER, TRAJECTORY_HEADER};
use super::CheckOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub config: GapConfig,
    pub odd_girth: OddGirth,
    pub estimates: Vec<GapEstimate>,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessReport {
    pub config: HardnessConfig,
    /// `m(2)`.
    pub limit: f64,
    pub trajectory: TrajectoryReport,
    pub checks: Vec<CheckOutcome>,
}

fn outcome(check: &CheckKind, assert: bool, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { check: check.name().to_string(), assert, passed, detail }
}

/// Coupled executions of the idealized recursive vertex scheme on `G` and
/// `G \ {v}` at every configured horizon.
pub fn run_gap(cfg: &GapConfig, base: Option<&Path>) -> Result<(GapReport, Timing)> {
    cfg.validate()?;
    let start = Instant::now();
    let g = cfg.instance.load(base)?;
    let girth = g.odd_girth();
    let params = RecursiveParams { phases: cfg.phases.unwrap_or(DEFAULT_PHASES), delta: 0.0, samples: cfg.samples };
    let scheme = RecursiveVertex::new(&g, SelectionFunction::vertex(girth)?, params)?;
    let master = StreamKey::new(cfg.seed);
    let table = scheme.build_table(master.purpose(Purpose::Estimates), cfg.exec)?;
    let table_seconds = start.elapsed().as_secs_f64();
    let key = master.purpose(Purpose::Diagnostics);
    let estimates = cfg
        .horizons
        .iter()
        .enumerate()
        .map(|(k, &t_k)| correlation_gap(&scheme, &table, cfg.u, cfg.v, t_k, cfg.trials, key.child(k as u64), cfg.exec))
        .collect::<Result<Vec<_>>>()?;
    let checks = cfg
        .checks
        .iter()
        .map(|c| {
            let (passed, detail) = match &c.kind {
                CheckKind::NoIndicatorViolations => {
                    let n: u64 = estimates.iter().map(|e| e.indicator_violations + e.selection_violations).sum();
                    (n == 0, format!("{n} violations"))
                }
                CheckKind::AtMostOnePotentialPath => {
                    let m = estimates.iter().map(|e| e.max_potential_paths).max().unwrap_or(0);
                    (m <= 1, format!("at most {m} potential paths per sample"))
                }
                CheckKind::GapWithinBound { sigmas } => {
                    let bad: Vec<String> = estimates
                        .iter()
                        .filter(|e| !e.within_bound(*sigmas))
                        .map(|e| format!("t_k={} gap {:.5} (se {:.5}) > bound {:.5}", e.t_k, e.gap, e.std_error, e.bound))
                        .collect();
                    (bad.is_empty(), if bad.is_empty() { format!("{} horizons within bound", estimates.len()) } else { bad.join("; ") })
                }
                other => (false, format!("check `{}` does not apply to gap tasks", other.name())),
            };
            outcome(&c.kind, c.assert, passed, detail)
        })
        .collect();
    let total = start.elapsed().as_secs_f64();
    let timing = Timing { name: cfg.name.clone(), table_seconds, trial_seconds: total - table_seconds, total_seconds: total, parallel: cfg.exec.is_parallel() };
    Ok((GapReport { config: cfg.clone(), odd_girth: girth, estimates, checks }, timing))
}

/// Matching-size trajectory on `K_{n,n}` against `m(t/n)`.
pub fn run_hardness(cfg: &HardnessConfig) -> Result<(HardnessReport, Timing)> {
    cfg.validate()?;
    let start = Instant::now();
    let key = StreamKey::new(cfg.seed).purpose(Purpose::Hardness);
    let tr = hardness_trajectory(cfg.n, cfg.algorithm, cfg.trials, key, cfg.exec)?;
    let limit = hardness_curve(2.0);
    let checks = cfg
        .checks
        .iter()
        .map(|c| {
            let (passed, detail) = match &c.kind {
                CheckKind::FinalWithin { target, tol } => {
                    let target = target.unwrap_or(limit);
                    let d = (tr.final_mean - target).abs();
                    (d <= *tol, format!("final mean {:.5}, target {target:.5}, deviation {d:.5}, tolerance {tol}", tr.final_mean))
                }
                CheckKind::SupDistanceAtMost { value } => {
                    let d = tr.max_deviation();
                    (d <= *value, format!("sup distance {d:.5}, limit {value}"))
                }
                CheckKind::BalanceHolds { through, at_least } => {
                    let t = (through * cfg.n as f64).floor() as usize;
                    let f = tr.q_holds_through(t);
                    (f >= *at_least, format!("Q_s holds for all s <= {t} in {f:.4} of trials, need {at_least}"))
                }
                CheckKind::DriftWithinBound { sigmas } => {
                    let bad: Vec<String> = tr.drift.iter().filter(|b| !b.within_bound(*sigmas)).map(|b| format!("[{}, {})", b.t_start, b.t_end)).collect();
                    (bad.is_empty(), if bad.is_empty() { format!("{} buckets within bound", tr.drift.len()) } else { format!("buckets above bound: {}", bad.join(", ")) })
                }
                other => (false, format!("check `{}` does not apply to hardness tasks", other.name())),
            };
            outcome(&c.kind, c.assert, passed, detail)
        })
        .collect();
    let total = start.elapsed().as_secs_f64();
    let timing = Timing { name: cfg.name.clone(), table_seconds: 0.0, trial_seconds: total, total_seconds: total, parallel: cfg.exec.is_parallel() };
    Ok((HardnessReport { config: cfg.clone(), limit, trajectory: tr, checks }, timing))
}

pub fn write_gap(dir: &Path, stem: &str, r: &GapReport, timing: Option<&Timing>) -> Result<Vec<PathBuf>> {
    let csv = dir.join(format!("{stem}.gap.csv"));
    let cols = [
        "t_k", "trials", "gap", "std_error", "bound", "indicator_violations", "selection_violations", "flipping", "potential",
        "badly_ordered_potential", "max_potential_paths",
    ];
    let rows = r.estimates.iter().map(|e| {
        vec![
            num(e.t_k),
            e.trials.to_string(),
            num(e.gap),
            num(e.std_error),
            num(e.bound),
            e.indicator_violations.to_string(),
            e.selection_violations.to_string(),
            e.flipping.to_string(),
            e.potential.to_string(),
            e.badly_ordered_potential.to_string(),
            e.max_potential_paths.to_string(),
        ]
    });
    write_csv_file(&csv, GAP_HEADER, &cols, rows)?;
    finish(dir, stem, r, timing, vec![csv])
}

pub fn write_hardness(dir: &Path, stem: &str, r: &HardnessReport, timing: Option<&Timing>) -> Result<Vec<PathBuf>> {
    let traj = dir.join(format!("{stem}.trajectory.csv"));
    let rows = r.trajectory.points.iter().map(|p| vec![p.t.to_string(), num(p.mean_matched), num(p.curve), num(p.q_frequency)]);
    write_csv_file(&traj, TRAJECTORY_HEADER, &["t", "mean_matched", "curve", "q_frequency"], rows)?;
    let drift = dir.join(format!("{stem}.drift.csv"));
    let rows = r.trajectory.drift.iter().map(|b| {
        vec![b.t_start.to_string(), b.t_end.to_string(), b.samples.to_string(), num(b.mean_step), num(b.mean_bound), num(b.std_error)]
    });
    write_csv_file(&drift, DRIFT_HEADER, &["t_start", "t_end", "samples", "mean_step", "mean_bound", "std_error"], rows)?;
    finish(dir, stem, r, timing, vec![traj, drift])
}

fn finish<T: Serialize>(dir: &Path, stem: &str, r: &T, timing: Option<&Timing>, mut written: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
    let p = dir.join(format!("{stem}.json"));
    write_json_file(&p, r)?;
    written.push(p);
    if let Some(t) = timing {
        let p = dir.join(format!("{stem}.timing.json"));
        write_json_file(&p, t)?;
        written.push(p);
    }
    Ok(written)
}

/// Summary line for one suite entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub name: String,
    pub task: String,
    pub checks: Vec<CheckOutcome>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub output_dir: PathBuf,
    pub tasks: Vec<TaskSummary>,
}

impl SuiteOutcome {
    /// No asserted check failed.
    pub fn passed(&self) -> bool {
        self.tasks.iter().flat_map(|t| &t.checks).all(|c| c.passed || !c.assert)
    }
}

/// Reads a suite file, runs every task and writes reports plus
/// `suite.json` into the output directory.
pub fn run_suite(path: &Path) -> Result<SuiteOutcome> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let cfg = SuiteConfig::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match &cfg.output_dir {
        Some(d) if d.is_relative() => base.join(d),
        Some(d) => d.clone(),
        None => base.join("reports"),
    };
    run_suite_config(&cfg, &base, &out)
}

pub fn run_suite_config(cfg: &SuiteConfig, base: &Path, out: &Path) -> Result<SuiteOutcome> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let mut tasks = Vec::new();
    for (i, task) in cfg.experiments.iter().enumerate() {
        let stem = if task.name().is_empty() { format!("task{i}") } else { task.name().to_string() };
        log::info!("running {stem}");
        let dir = task.output().map_or_else(|| out.to_path_buf(), |d| out.join(d));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let dir = dir.as_path();
        let (kind, checks, files) = match task {
            Task::Simulate(c) => {
                let (r, t) = run_experiment(c, Some(base))?;
                ("simulate", r.checks.clone(), write_experiment(dir, &stem, &r, Some(&t))?)
            }
            Task::Gap(c) => {
                let (r, t) = run_gap(c, Some(base))?;
                ("gap", r.checks.clone(), write_gap(dir, &stem, &r, Some(&t))?)
            }
            Task::Hardness(c) => {
                let (r, t) = run_hardness(c)?;
                ("hardness", r.checks.clone(), write_hardness(dir, &stem, &r, Some(&t))?)
            }
        };
        for c in &checks {
            log::info!("{stem} {}: {} ({})", c.check, if c.passed { "pass" } else { "fail" }, c.detail);
        }
        let files = files.iter().map(|f| f.strip_prefix(out).map(Path::to_path_buf).unwrap_or_else(|_| f.clone())).collect();
        tasks.push(TaskSummary { name: stem, task: kind.to_string(), checks, files });
    }
    let outcome = SuiteOutcome { output_dir: out.to_path_buf(), tasks };
    #[derive(Serialize)]
    struct SuiteFile<'a> {
        passed: bool,
        tasks: &'a [TaskSummary],
    }
    write_json_file(&out.join("suite.json"), &SuiteFile { passed: outcome.passed(), tasks: &outcome.tasks })?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_passes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("suite.json");
        std::fs::write(&p, r#"{"output_dir": "out", "experiments": []}"#).unwrap();
        let o = run_suite(&p).unwrap();
        assert!(o.passed());
        assert!(o.tasks.is_empty());
        assert!(dir.path().join("out/suite.json").exists());
    }

    #[test]
    fn hardness_small_checks() {
        let cfg: HardnessConfig = serde_json::from_value(serde_json::json!({
            "n": 20, "trials": 20, "seed": 3,
            "checks": [{"check": "final_within", "tol": 0.2}, {"check": "sup_distance_at_most", "value": 0.0, "assert": false}]
        }))
        .unwrap();
        let (r, _) = run_hardness(&cfg).unwrap();
        assert!(r.checks[0].passed, "{:?}", r.checks[0]);
        assert!(!r.checks[1].passed);
    }

    #[test]
    fn gap_on_single_edge_pair() {
        let cfg: GapConfig = serde_json::from_value(serde_json::json!({
            "instance": {"family": "odd_cycle", "g": 5},
            "u": 0, "v": 1, "horizons": [0.5], "T": 4, "Q": 30, "trials": 300, "seed": 1,
            "checks": [{"check": "no_indicator_violations"}, {"check": "at_most_one_potential_path"}]
        }))
        .unwrap();
        let (r, _) = run_gap(&cfg, None).unwrap();
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
    }
}
