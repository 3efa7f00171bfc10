//! Experiment front-end for the structured-matrix solvers: channel draws,
//! scenario assembly, Monte-Carlo sweeps, runtime benchmarks, result files
//! and the acceptance suite.

pub mod acceptance;
pub mod bench;
pub mod channels;
pub mod config;
pub mod error;
pub mod instance;
pub mod output;
pub mod sweep;

pub use config::{ExperimentConfig, ScenarioKind, SolverId};
pub use error::{Result, SimError};
pub use sweep::{run_sweep, SweepResult, SweepRow};
