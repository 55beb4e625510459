//! The agents that turn a module specification into verified Verilog, and
//! the pipeline that runs them for one problem.

mod code;
mod config;
mod debug;
mod extraction;
mod pipeline;
mod planner;
mod problem;
mod retrieval;
mod trace_log;
mod workbench;

use std::path::{Path, PathBuf};

use rtlsmith_llm::{ChatMessage, LlmError, ReactTrace};
use rtlsmith_sim::SimError;
use serde::{Deserialize, Serialize};

pub use code::run_code_agent;
pub use config::{AgentConfig, Budgets, Prompts};
pub use debug::{run_debug_agent, DebugOptions};
pub use extraction::run_extraction;
pub use pipeline::{
    recheck, run_problem, PipelineEnv, PipelineOptions, PlannerMode, ProblemResult, ProblemStop, RecheckSummary,
    ARTIFACT_FINAL, ARTIFACT_PLAN, ARTIFACT_RESULT, ARTIFACT_TCRG, ARTIFACT_TRACE,
};
pub use planner::run_high_level_planner;
pub use problem::{
    problem_dirs, Category, ProblemMeta, ProblemSpec, META_FILE, REFERENCE_FILE, SPEC_FILE, TESTBENCH_FILE,
};
pub use retrieval::run_retrieval;
pub use trace_log::{read_trace, AgentLog, NullLog, Tally, TraceLog};
pub use workbench::Workbench;

/// Agent names as they appear in traces and scripted transcripts.
pub mod roles {
    pub const PLANNER: &str = "planner";
    pub const PLAN_CRITIC: &str = "plan_critic";
    pub const EXTRACTOR: &str = "extractor";
    pub const RETRIEVER: &str = "retriever";
    pub const ENGINEER: &str = "engineer";
    pub const CODE_VERIFIER: &str = "code_verifier";
    pub const DEBUGGER: &str = "debugger";
}

/// Tool names offered to the agents.
pub mod tools {
    pub const KHOP: &str = "khop";
    pub const CHECK_SYNTAX: &str = "check_syntax";
    pub const SIMULATE: &str = "simulate";
    pub const AST_WT_TRACE: &str = "ast_wt_trace";
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid plan: {0}")]
    PlanValidation(String),
    #[error("extraction still invalid after a retry: {0}")]
    ExtractionInvalid(String),
    #[error(transparent)]
    Graph(#[from] rtlsmith_core::TcrgError),
    #[error(transparent)]
    Dag(#[from] rtlsmith_core::DagError),
    #[error("problem: {0}")]
    Problem(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AgentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AgentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Errors that must stop a whole run rather than fail one problem.
    pub fn is_fatal(&self) -> bool {
        match self {
            AgentError::Llm(e) => matches!(
                e,
                LlmError::BackendUnavailable { .. } | LlmError::BackendRejected { .. } | LlmError::Config(_)
            ),
            AgentError::Sim(e) => e.is_fatal(),
            AgentError::Io { .. } => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub speaker: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTrace {
    pub label: String,
    pub trace: ReactTrace,
}

/// Generator/critic turns plus any tool loops the agent ran.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub turns: Vec<DialogueTurn>,
    pub loops: Vec<LabeledTrace>,
}

impl AgentTrace {
    pub(crate) fn say(&mut self, speaker: &str, content: &str) {
        self.turns.push(DialogueTurn {
            speaker: speaker.to_string(),
            content: content.to_string(),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub agent: String,
    pub ok: bool,
    /// Plan JSON, extraction JSON, enriched plan JSON or Verilog source.
    pub artifact: String,
    pub trace: AgentTrace,
    pub rounds: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AgentOutcome {
    /// Log, then hand back.
    pub(crate) fn logged(self, log: &dyn AgentLog) -> Self {
        log.outcome(&self);
        self
    }
}

/// Send `[system, user]` to the backend as `agent` and log the turn.
pub(crate) fn ask(
    backend: &dyn rtlsmith_llm::ChatBackend,
    log: &dyn AgentLog,
    agent: &str,
    system: &str,
    query: String,
) -> Result<String, LlmError> {
    let messages = [ChatMessage::system(system), ChatMessage::user(query)];
    let reply = rtlsmith_llm::chat(backend, agent, &messages)?;
    log.chat_turn(agent, &messages, &reply);
    Ok(reply.message.content)
}

/// The last fenced block holding a complete module, or the bare text when
/// it is itself a module.
pub fn extract_module(text: &str) -> Option<String> {
    let mut found = None;
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(nl) = after.find('\n') else { break };
        let body = &after[nl + 1..];
        let Some(end) = body.find("```") else { break };
        let block = &body[..end];
        if is_module(block) {
            found = Some(block.trim().to_string() + "\n");
        }
        rest = &body[end + 3..];
    }
    found.or_else(|| is_module(text).then(|| text.trim().to_string() + "\n"))
}

fn is_module(text: &str) -> bool {
    let t = text.trim();
    t.contains("module") && t.ends_with("endmodule")
}

/// A review approves when its first non-empty line starts with APPROVE.
pub fn approves(review: &str) -> bool {
    review
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.to_ascii_uppercase().starts_with("APPROVE"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_extraction() {
        let reply = "Here:\n```verilog\nmodule A; endmodule\n```\nand better:\n```verilog\nmodule TopModule(input a, output b);\n  assign b = a;\nendmodule\n```\n";
        assert_eq!(
            extract_module(reply).unwrap(),
            "module TopModule(input a, output b);\n  assign b = a;\nendmodule\n"
        );
        assert_eq!(extract_module("module m; endmodule").unwrap(), "module m; endmodule\n");
        assert_eq!(extract_module("```verilog\nassign x = 1;\n```"), None);
        assert_eq!(extract_module("no code"), None);
    }

    #[test]
    fn approval() {
        assert!(approves("\n APPROVE\nlooks fine"));
        assert!(approves("Approved."));
        assert!(!approves("Please APPROVE after fixing"));
        assert!(!approves(""));
    }
}
