//! Scenario execution and summarization for the qpipe simulator binary.

pub mod scenario;
pub mod summary;

pub use scenario::{load_scenario, run_scenario, RunOutcome, Scenario};
pub use summary::{summarize_run, Summary};
