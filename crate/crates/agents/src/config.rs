use rtlsmith_llm::ReactLimits;
use serde::{Deserialize, Serialize};

/// Role prompts. They are configuration; the defaults only fix each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Prompts {
    pub planner: String,
    pub plan_critic: String,
    pub extractor: String,
    pub retriever: String,
    pub engineer: String,
    pub code_verifier: String,
    pub debugger: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Prompts {
            planner: "You are a hardware design planner. Split the module specification into small, ordered \
                      sub-tasks that together implement the module. Answer with a JSON list of objects with keys \
                      id, type (\"write\" or \"verify\"), description and depends_on (list of ids). Mention every \
                      signal a sub-task touches by its exact name."
                .into(),
            plan_critic: "You review a sub-task plan against the module specification. Check that the sub-tasks \
                          are consistent with each other and cover every signal, state transition and example. \
                          Reply APPROVE on the first line if the plan is complete; otherwise list concrete \
                          suggestions."
                .into(),
            extractor: "You extract circuit details from a module specification. Answer with one JSON object: \
                        {\"signals\": [{\"name\", \"description\"}], \"transitions\": [{\"label\", \
                        \"description\", \"signals\"}], \"examples\": [{\"description\", \"signals\"}]}. Every \
                        name in a signals list must appear in the top-level signals."
                .into(),
            retriever: "You collect the circuit details a Verilog sub-task needs. Call khop with a hop count to \
                        read the task's neighbourhood in the circuit relation graph; increase it if something is \
                        missing. Finish with only the relevant details, copied verbatim."
                .into(),
            engineer: "You are a Verilog engineer. Extend the current module so it also does the given sub-task, \
                       keeping earlier work. Reply with the complete module, named TopModule, in one ```verilog \
                       block."
                .into(),
            code_verifier: "You check a Verilog draft for one sub-task. Run check_syntax on it, review it against \
                            the sub-task, and finish with APPROVE on the first line or with concrete fixes."
                .into(),
            debugger: "You debug a Verilog module against its testbench. Use simulate to run it; simulate with a \
                       complete replacement module as input to try a fix. When outputs mismatch, ast_wt_trace \
                       (if available) shows the driving code and the waveform around the first mismatch. Finish \
                       once the simulation passes."
                .into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub planner_rounds: u32,
    pub code_rounds: u32,
    pub retrieval: ReactLimits,
    pub code_verifier: ReactLimits,
    pub debug: ReactLimits,
    /// Replies allowed across all agents of one problem.
    pub global_reply_cap: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        let small = ReactLimits {
            max_steps: 6,
            ..ReactLimits::default()
        };
        Budgets {
            planner_rounds: 8,
            code_rounds: 8,
            retrieval: small,
            code_verifier: small,
            debug: ReactLimits::default(),
            global_reply_cap: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub prompts: Prompts,
    pub budgets: Budgets,
}
