//! Experiment orchestration: configuration, Monte-Carlo runs, report files
//! and suites.

pub mod config;
pub mod experiment;
pub mod report;
pub mod stats;
pub mod suite;

use serde::{Deserialize, Serialize};

pub use config::{Check, CheckKind, ExperimentConfig, GapConfig, HardnessConfig, InstanceSpec, SchemeName, SuiteConfig, SwitchTime, Task};
pub use experiment::{estimate_selectability, exact_selection_profile, run_experiment, ExperimentReport, Timing};
pub use suite::{run_gap, run_hardness, run_suite, SuiteOutcome};

/// Result of one configured check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub assert: bool,
    pub passed: bool,
    pub detail: String,
}
