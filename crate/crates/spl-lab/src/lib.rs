//! Scenario loading, experiment orchestration, and metrics emission for
//! the SPL simulation laboratory.

pub mod jsonfmt;
pub mod report;
pub mod runner;
pub mod scenario;

pub use report::MetricsReport;
pub use runner::{run_experiment, RunError};
pub use scenario::{load_scenario, LoadedScenario, Scenario, ScenarioError};
