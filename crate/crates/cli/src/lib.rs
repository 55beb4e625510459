//! Library side of the `rtlsmith` command: settings, suite runs and the
//! ablation report.

use std::path::PathBuf;

use rtlsmith_agents::AgentError;
use rtlsmith_llm::LlmError;
use rtlsmith_sim::SimError;

mod settings;
mod suite;

pub use settings::{parse_planner, Backends, Overrides, Settings, Toggle};
pub use suite::{load_problems, run_ablation, run_suite, AblationReport, Arm, CategoryRate, SuiteReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fixture(#[from] rtlsmith_fixtures::FixtureError),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}
