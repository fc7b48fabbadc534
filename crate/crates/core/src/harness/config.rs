//! Experiment and suite configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::HardnessAlgorithm;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{Family, Graph, OddGirth};
use crate::selection::EdgeKind;
use crate::two_phase::find_t0;

/// Graph source: a generated family or a graph JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    File { file: PathBuf },
    Family(Family),
}

impl InstanceSpec {
    /// Relative file paths are resolved against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<Graph> {
        match self {
            InstanceSpec::Family(f) => f.generate(),
            InstanceSpec::File { file } => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Graph::from_json(&text)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    RecursiveVertex,
    RecursiveEdge,
    Rank1Closed,
    TwoPhase,
    Greedy,
}

impl SchemeName {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::RecursiveVertex => "recursive-vertex",
            SchemeName::RecursiveEdge => "recursive-edge",
            SchemeName::Rank1Closed => "rank1-closed",
            SchemeName::TwoPhase => "two-phase",
            SchemeName::Greedy => "greedy",
        }
    }

    /// Schemes that target an exact conditional acceptance curve.
    pub fn is_exact(self) -> bool {
        matches!(self, SchemeName::RecursiveVertex | SchemeName::RecursiveEdge | SchemeName::Rank1Closed)
    }

    pub fn is_edge_mode(self) -> bool {
        matches!(self, SchemeName::RecursiveEdge | SchemeName::Rank1Closed)
    }
}

impl std::str::FromStr for SchemeName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// Named switch times of the two-phase scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTime {
    /// Root of the threshold polynomial, about 0.119.
    T0,
    /// `(sqrt 3 - 1)/2`, the maximizer of the guarantee polynomial.
    Peak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SwitchTime {
    Value(f64),
    Named(NamedTime),
}

impl SwitchTime {
    pub fn value(self) -> f64 {
        match self {
            SwitchTime::Value(t) => t,
            SwitchTime::Named(NamedTime::T0) => find_t0(),
            SwitchTime::Named(NamedTime::Peak) => (3f64.sqrt() - 1.0) / 2.0,
        }
    }
}

impl std::str::FromStr for SwitchTime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t0" => Ok(SwitchTime::Named(NamedTime::T0)),
            "peak" => Ok(SwitchTime::Named(NamedTime::Peak)),
            other => other.parse().map(SwitchTime::Value).map_err(|_| Error::Config(format!("switch time `{s}`"))),
        }
    }
}

fn default_bins() -> usize {
    20
}

fn default_sigmas() -> f64 {
    3.0
}

fn default_true() -> bool {
    true
}

/// A pass/fail check evaluated on a finished experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    /// Every edge: `ratio + sigmas * se >= at_least`.
    MinRatio {
        at_least: f64,
        #[serde(default)]
        sigmas: f64,
    },
    /// Every listed edge (all if omitted): `|ratio - target| <= tol`.
    RatioWithin {
        target: f64,
        tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<usize>>,
    },
    /// `sum accepted / (trials sum x)` within `tol` of `target`.
    PooledRatioWithin { target: f64, tol: f64 },
    /// `pooled ratio + sigmas * se >= at_least`.
    PooledRatioAtLeast {
        at_least: f64,
        #[serde(default)]
        sigmas: f64,
    },
    /// Every adequately powered bin lies in the scheme's band widened by
    /// `sigmas` standard errors.
    BinsInBand {
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
    /// Rank-1 safety curve `exp(-y(1 - x))` per element and bin.
    SafetyInBand {
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
    /// Coupled runs: no sample breaks the bad-event inequality.
    NoIndicatorViolations,
    /// Coupled runs: at most one path with potential per sample.
    AtMostOnePotentialPath,
    /// Coupled runs: `gap <= bound + sigmas * se` at every horizon.
    GapWithinBound {
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
    /// Trajectory: final mean within `tol` of `target` (default `m(2)`).
    FinalWithin {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<f64>,
        tol: f64,
    },
    /// Trajectory: `sup_t |mean M(t)/n - m(t/n)| <= value`.
    SupDistanceAtMost { value: f64 },
    /// Trajectory: fraction of trials with `Q_s` for all `s <= through n`.
    BalanceHolds { through: f64, at_least: f64 },
    /// Trajectory: every drift bucket within the bound plus `sigmas` se.
    DriftWithinBound {
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::MinRatio { .. } => "min_ratio",
            CheckKind::RatioWithin { .. } => "ratio_within",
            CheckKind::PooledRatioWithin { .. } => "pooled_ratio_within",
            CheckKind::PooledRatioAtLeast { .. } => "pooled_ratio_at_least",
            CheckKind::BinsInBand { .. } => "bins_in_band",
            CheckKind::SafetyInBand { .. } => "safety_in_band",
            CheckKind::NoIndicatorViolations => "no_indicator_violations",
            CheckKind::AtMostOnePotentialPath => "at_most_one_potential_path",
            CheckKind::GapWithinBound { .. } => "gap_within_bound",
            CheckKind::FinalWithin { .. } => "final_within",
            CheckKind::SupDistanceAtMost { .. } => "sup_distance_at_most",
            CheckKind::BalanceHolds { .. } => "balance_holds",
            CheckKind::DriftWithinBound { .. } => "drift_within_bound",
        }
    }

    fn task(&self) -> &'static str {
        match self {
            CheckKind::MinRatio { .. }
            | CheckKind::RatioWithin { .. }
            | CheckKind::PooledRatioWithin { .. }
            | CheckKind::PooledRatioAtLeast { .. }
            | CheckKind::BinsInBand { .. }
            | CheckKind::SafetyInBand { .. } => "simulate",
            CheckKind::NoIndicatorViolations | CheckKind::AtMostOnePotentialPath | CheckKind::GapWithinBound { .. } => "gap",
            _ => "hardness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    #[serde(flatten)]
    pub kind: CheckKind,
    /// A failing asserted check makes the suite exit nonzero.
    #[serde(default = "default_true")]
    pub assert: bool,
}

fn validate_checks(task: &str, checks: &[Check]) -> Result<()> {
    for c in checks {
        if c.kind.task() != task {
            return Err(Error::Config(format!("check `{}` does not apply to a {task} task", c.kind.name())));
        }
    }
    Ok(())
}

/// One Monte-Carlo selectability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub instance: InstanceSpec,
    pub scheme: SchemeName,
    /// Odd girth used to pick the vertex selection function; defaults to
    /// the instance's odd girth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<OddGirth>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Samples per estimate; defaults to the sample-complexity bound.
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<SwitchTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_function: Option<EdgeKind>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub exec: Exec,
    #[serde(default)]
    pub checks: Vec<Check>,
}

pub const DEFAULT_PHASES: usize = 20;
pub const DEFAULT_DELTA: f64 = 0.05;

impl ExperimentConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(instance: InstanceSpec, scheme: SchemeName, trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            name: String::new(),
            instance,
            scheme,
            g: None,
            phases: None,
            delta: None,
            samples: None,
            t: None,
            edge_function: None,
            trials,
            seed,
            bins: default_bins(),
            output: None,
            exec: Exec::Auto,
            checks: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let only = |field: &str, present: bool, allowed: &[SchemeName]| -> Result<()> {
            if present && !allowed.contains(&self.scheme) {
                let names: Vec<&str> = allowed.iter().map(|s| s.as_str()).collect();
                return Err(Error::Config(format!(
                    "field `{field}` is not valid for scheme {}; it applies to {}",
                    self.scheme.as_str(),
                    names.join(" and ")
                )));
            }
            Ok(())
        };
        use SchemeName::*;
        only("g", self.g.is_some(), &[RecursiveVertex])?;
        only("T", self.phases.is_some(), &[RecursiveVertex, RecursiveEdge])?;
        only("delta", self.delta.is_some(), &[RecursiveVertex, RecursiveEdge])?;
        only("Q", self.samples.is_some(), &[RecursiveVertex, RecursiveEdge])?;
        only("t", self.t.is_some(), &[TwoPhase])?;
        only("edge_function", self.edge_function.is_some(), &[RecursiveEdge])?;
        if self.trials == 0 {
            return Err(Error::Config("field `trials` must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::Config("field `bins` must be at least 1".into()));
        }
        if self.phases == Some(0) {
            return Err(Error::Config("field `T` must be at least 1".into()));
        }
        if self.samples == Some(0) {
            return Err(Error::Config("field `Q` must be at least 1".into()));
        }
        if let Some(d) = self.delta {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("field `delta` must lie in [0, 1), got {d}")));
            }
            if d == 0.0 && self.samples.is_none() {
                return Err(Error::Config("field `Q` is required when `delta` is 0".into()));
            }
        }
        match self.scheme {
            TwoPhase => match self.t {
                None => return Err(Error::Config("field `t` is required for scheme two-phase".into())),
                Some(t) if !(0.0..=1.0).contains(&t.value()) => {
                    return Err(Error::Config(format!("field `t` must lie in [0, 1], got {}", t.value())))
                }
                _ => {}
            },
            RecursiveEdge if self.edge_function.is_none() => {
                return Err(Error::Config("field `edge_function` is required for scheme recursive-edge".into()))
            }
            _ => {}
        }
        validate_checks("simulate", &self.checks)?;
        for c in &self.checks {
            if matches!(c.kind, CheckKind::BinsInBand { .. }) && !self.scheme.is_exact() {
                return Err(Error::Config(format!("check `bins_in_band` needs an exact-selection scheme, not {}", self.scheme.as_str())));
            }
            if matches!(c.kind, CheckKind::SafetyInBand { .. }) && self.scheme != Rank1Closed {
                return Err(Error::Config("check `safety_in_band` applies to scheme rank1-closed only".into()));
            }
        }
        Ok(())
    }

    pub fn phases(&self) -> usize {
        self.phases.unwrap_or(DEFAULT_PHASES)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(DEFAULT_DELTA)
    }
}

/// Coupled-execution gap experiment for the recursive vertex scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    #[serde(default)]
    pub name: String,
    pub instance: InstanceSpec,
    pub u: usize,
    pub v: usize,
    pub horizons: Vec<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<usize>,
    /// Samples per estimate for the (idealized, `delta = 0`) tables.
    #[serde(rename = "Q")]
    pub samples: usize,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub exec: Exec,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl GapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("field `trials` must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("field `Q` must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
            return Err(Error::Config("field `horizons` must be non-empty values in (0, 1]".into()));
        }
        if self.u == self.v {
            return Err(Error::Config("fields `u` and `v` must differ".into()));
        }
        validate_checks("gap", &self.checks)
    }
}

/// Trajectory experiment on `K_{n,n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardnessConfig {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub algorithm: HardnessAlgorithm,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub exec: Exec,
    #[serde(default)]
    pub checks: Vec<Check>,
}

impl HardnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("field `n` must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("field `trials` must be at least 1".into()));
        }
        validate_checks("hardness", &self.checks)
    }
}

/// One entry of a suite file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    Simulate(ExperimentConfig),
    Gap(GapConfig),
    Hardness(HardnessConfig),
}

impl Task {
    pub fn name(&self) -> &str {
        match self {
            Task::Simulate(c) => &c.name,
            Task::Gap(c) => &c.name,
            Task::Hardness(c) => &c.name,
        }
    }

    /// Report directory override, relative to the suite's output directory.
    pub fn output(&self) -> Option<&Path> {
        match self {
            Task::Simulate(c) => c.output.as_deref(),
            Task::Gap(c) => c.output.as_deref(),
            Task::Hardness(c) => c.output.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Task::Simulate(c) => c.validate(),
            Task::Gap(c) => c.validate(),
            Task::Hardness(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Directory for reports; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub experiments: Vec<Task>,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut names = std::collections::BTreeSet::new();
        for (i, task) in cfg.experiments.iter().enumerate() {
            task.validate().map_err(|e| Error::Config(format!("experiment {i}: {e}")))?;
            if !task.name().is_empty() && !names.insert(task.name().to_string()) {
                return Err(Error::Config(format!("experiment {i}: duplicate name `{}`", task.name())));
            }
        }
        Ok(cfg)
    }
}
