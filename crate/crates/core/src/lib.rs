//! Simulation laboratory for random-order contention resolution schemes on
//! graph matchings.

pub mod arrival;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod graph;
pub mod harness;
pub mod numeric;
pub mod recursive;
pub mod rng;
pub mod selection;
pub mod two_phase;

pub use error::{Error, Result};
pub use graph::{Family, Graph, OddGirth};
