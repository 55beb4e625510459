use std::cell::RefCell;
use std::collections::BTreeSet;

use rtlsmith_core::ast_wt::TraceOptions;
use rtlsmith_core::verilog::format_diagnostics;
use rtlsmith_core::{parse_module, parse_vcd, SubTask, TaskKind, TraceRequest};
use rtlsmith_llm::{react_loop, ChatBackend, ReactRun, ToolFailure, ToolRegistry};
use rtlsmith_sim::{SimError, SimReport};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::roles::DEBUGGER;
use crate::tools::{AST_WT_TRACE, SIMULATE};
use crate::{extract_module, AgentConfig, AgentError, AgentLog, AgentOutcome, AgentTrace, LabeledTrace, Workbench};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugOptions {
    /// Offer `ast_wt_trace` to the agent.
    pub ast_wt: bool,
    pub clock: String,
    pub scope: Option<String>,
}

impl Default for DebugOptions {
    fn default() -> Self {
        DebugOptions {
            ast_wt: true,
            clock: "clk".into(),
            scope: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceInput {
    #[serde(default)]
    signals: Vec<String>,
    level: Option<usize>,
    time: Option<u64>,
}

struct State {
    source: String,
    /// Last simulated source and its result.
    last: Option<(String, SimReport)>,
}

fn sim_failure(e: SimError) -> ToolFailure {
    if e.is_fatal() {
        ToolFailure::Fatal(e.to_string())
    } else {
        ToolFailure::Recoverable(e.to_string())
    }
}

fn trace_last(state: &State, input: &str, options: &DebugOptions) -> Result<String, ToolFailure> {
    let rec = |m: String| ToolFailure::Recoverable(m);
    let req: TraceInput = if input.trim().is_empty() {
        TraceInput::default()
    } else {
        serde_json::from_str(input.trim()).map_err(|e| {
            rec(format!(
                "expected {{\"signals\": [...], \"level\": n, \"time\": t}}: {e}"
            ))
        })?
    };
    let Some((source, report)) = &state.last else {
        return Err(rec("no simulation yet; call simulate first".into()));
    };
    if report.passed() {
        return Err(rec("the last simulation passed; nothing to trace".into()));
    }
    let signals: BTreeSet<String> = if req.signals.is_empty() {
        report.mismatched_signals.iter().map(|s| s.signal.clone()).collect()
    } else {
        req.signals.into_iter().collect()
    };
    if signals.is_empty() {
        return Err(rec("no mismatched signals known; name them in \"signals\"".into()));
    }
    let time = req
        .time
        .or(report.first_mismatch_time)
        .ok_or_else(|| rec("no mismatch time known; give \"time\"".into()))?;
    let vcd = report
        .vcd_path
        .as_ref()
        .ok_or_else(|| rec("the simulation produced no waveform dump".into()))?;
    let bytes = std::fs::read(vcd).map_err(|e| rec(format!("{}: {e}", vcd.display())))?;
    let db = parse_vcd(&bytes).map_err(|e| rec(e.to_string()))?;
    let module = parse_module(source).map_err(|d| {
        rec(format!(
            "cannot analyse the module:\n{}",
            format_diagnostics(&d).trim_end()
        ))
    })?;
    let opts = TraceOptions {
        scope: options.scope.clone(),
        ..TraceOptions::default()
    };
    let request = TraceRequest {
        mismatched_signals: signals,
        level: req.level.unwrap_or(1),
        mismatch_time: time,
    };
    rtlsmith_core::ast_wt::trace_with(&module, &db, &request, &options.clock, &opts)
        .map(|r| r.render())
        .map_err(|e| rec(e.to_string()))
}

/// Simulate, trace and edit until the testbench passes or the budget runs
/// out. Success is judged on the final source, not on the agent's word.
#[allow(clippy::too_many_arguments)]
pub fn run_debug_agent(
    subtask: &SubTask,
    spec: &str,
    module_source: &str,
    testbench: &str,
    backend: &dyn ChatBackend,
    bench: &Workbench<'_>,
    options: &DebugOptions,
    config: &AgentConfig,
    log: &dyn AgentLog,
) -> Result<AgentOutcome, AgentError> {
    if subtask.kind != TaskKind::Verify {
        return Err(AgentError::PlanValidation(format!(
            "sub-task '{}' is not a verify task",
            subtask.id
        )));
    }
    if testbench.trim().is_empty() {
        return Err(AgentError::Problem("no testbench to debug against".into()));
    }
    let state = RefCell::new(State {
        source: module_source.to_string(),
        last: None,
    });

    let react = {
        let mut tools = ToolRegistry::new();
        tools.register(
            SIMULATE,
            "input: empty to simulate the current module, or a complete replacement module. Returns the mismatch summary.",
            |input| {
                let mut st = state.borrow_mut();
                if let Some(code) = extract_module(input) {
                    st.source = code;
                }
                let source = st.source.clone();
                match bench.simulate(&source, testbench) {
                    Ok(report) => {
                        let summary = report.summary();
                        st.last = Some((source, report));
                        Ok(summary)
                    }
                    Err(e @ SimError::Timeout { .. }) => {
                        st.last = None;
                        Ok(format!("simulation did not finish: {e}"))
                    }
                    Err(e) => Err(sim_failure(e)),
                }
            },
        )?;
        if options.ast_wt {
            tools.register(
                AST_WT_TRACE,
                "input: {\"signals\": [names], \"level\": hops, \"time\": t}, all optional. Shows the code driving the signals and their waveform around the mismatch.",
                |input| trace_last(&state.borrow(), input, options),
            )?;
        }
        let source = module_source.trim_end();
        let query = format!(
            "Module specification:\n{spec}\n\nCurrent module:\n```verilog\n{source}\n```\n\nSub-task {}: {}\nSimulate the module against the testbench and fix it until the simulation passes.",
            subtask.id, subtask.description
        );
        react_loop(
            ReactRun {
                agent: DEBUGGER,
                system_prompt: &config.prompts.debugger,
                query: &query,
                backend,
                limits: config.budgets.debug,
                sink: log,
            },
            &mut tools,
        )?
    };

    let mut st = state.into_inner();
    if let Some(code) = react.final_answer.as_deref().and_then(extract_module) {
        st.source = code;
    }
    let passed = match &st.last {
        Some((src, report)) if *src == st.source => report.passed(),
        _ => {
            let report = bench.simulate(&st.source, testbench)?;
            log.event(DEBUGGER, "final_check", json!({ "summary": report.summary() }));
            report.passed()
        }
    };
    let rounds = react.calls_to(SIMULATE) as u32;
    let mut notes = Vec::new();
    if !passed {
        notes.push(format!(
            "testbench still fails after the debug loop ({:?})",
            react.stop_reason
        ));
    }
    let mut trace = AgentTrace::default();
    trace.loops.push(LabeledTrace {
        label: subtask.id.clone(),
        trace: react,
    });
    Ok(AgentOutcome {
        agent: DEBUGGER.into(),
        ok: passed,
        artifact: st.source,
        trace,
        rounds,
        notes,
    }
    .logged(log))
}
