use std::cell::RefCell;

use rtlsmith_core::{SubTask, TaskKind};
use rtlsmith_llm::{react_loop, ChatBackend, ReactRun, ToolFailure, ToolRegistry};
use rtlsmith_sim::CompileReport;

use crate::roles::{CODE_VERIFIER, ENGINEER};
use crate::tools::CHECK_SYNTAX;
use crate::{
    approves, ask, extract_module, AgentConfig, AgentError, AgentLog, AgentOutcome, AgentTrace, LabeledTrace, Workbench,
};

fn engineer_query(spec: &str, task: &SubTask, current: &str, feedback: Option<&str>) -> String {
    let current = if current.trim().is_empty() {
        "(empty)"
    } else {
        current.trim_end()
    };
    let context = if task.context.trim().is_empty() {
        "(none)"
    } else {
        task.context.trim_end()
    };
    let mut q = format!(
        "Module specification:\n{spec}\n\nCurrent module:\n```verilog\n{current}\n```\n\nSub-task {}: {}\nContext:\n{context}\n",
        task.id, task.description
    );
    if let Some(fb) = feedback {
        q.push_str(&format!("\nReviewer feedback on your last draft:\n{fb}\n"));
    }
    q.push_str("\nReply with the complete updated module in one ```verilog block.");
    q
}

/// Engineer drafts the cumulative module; a verifier loop with
/// `check_syntax` reviews it. Done when the draft compiles and is approved.
pub fn run_code_agent(
    subtask: &SubTask,
    spec: &str,
    current_source: &str,
    backend: &dyn ChatBackend,
    bench: &Workbench<'_>,
    config: &AgentConfig,
    log: &dyn AgentLog,
) -> Result<AgentOutcome, AgentError> {
    if subtask.description.trim().is_empty() {
        return Err(AgentError::PlanValidation(format!(
            "sub-task '{}' has no description",
            subtask.id
        )));
    }
    if subtask.kind != TaskKind::Write {
        return Err(AgentError::PlanValidation(format!(
            "sub-task '{}' is not a write task",
            subtask.id
        )));
    }
    let mut trace = AgentTrace::default();
    let mut feedback: Option<String> = None;
    let mut last_draft = current_source.to_string();
    let budget = config.budgets.code_rounds.max(1);

    for round in 1..=budget {
        let reply = ask(
            backend,
            log,
            ENGINEER,
            &config.prompts.engineer,
            engineer_query(spec, subtask, current_source, feedback.as_deref()),
        )?;
        trace.say(ENGINEER, &reply);
        let Some(draft) = extract_module(&reply) else {
            feedback = Some("No complete module (from `module` to `endmodule`) in a ```verilog block.".into());
            continue;
        };
        last_draft = draft.clone();

        let checked: RefCell<Option<CompileReport>> = RefCell::new(None);
        let review = {
            let mut tools = ToolRegistry::new();
            tools.register(
                CHECK_SYNTAX,
                "input: empty to check the draft, or a complete module to check instead. Returns compiler diagnostics.",
                |input| {
                    let target = extract_module(input).unwrap_or_else(|| draft.clone());
                    let report = bench.check_syntax(&target).map_err(|e| {
                        if e.is_fatal() {
                            ToolFailure::Fatal(e.to_string())
                        } else {
                            ToolFailure::Recoverable(e.to_string())
                        }
                    })?;
                    let summary = report.summary();
                    if target == draft {
                        *checked.borrow_mut() = Some(report);
                    }
                    Ok(summary)
                },
            )?;
            let query = format!(
                "Sub-task {}: {}\n\nDraft module:\n```verilog\n{}\n```\n\nRun check_syntax on the draft, then answer FINAL with APPROVE or with suggestions.",
                subtask.id,
                subtask.description,
                draft.trim_end()
            );
            react_loop(
                ReactRun {
                    agent: CODE_VERIFIER,
                    system_prompt: &config.prompts.code_verifier,
                    query: &query,
                    backend,
                    limits: config.budgets.code_verifier,
                    sink: log,
                },
                &mut tools,
            )?
        };
        let verdict = review.final_answer.clone().unwrap_or_default();
        trace.say(CODE_VERIFIER, &verdict);
        trace.loops.push(LabeledTrace {
            label: format!("{} round {round}", subtask.id),
            trace: review,
        });

        // the verifier may skip the tool; the compile check is not optional
        let report = match checked.into_inner() {
            Some(r) => r,
            None => {
                let r = bench.check_syntax(&draft)?;
                log.tool_call(CODE_VERIFIER, CHECK_SYNTAX, "", &r.summary());
                r
            }
        };
        if report.ok && approves(&verdict) {
            return Ok(AgentOutcome {
                agent: ENGINEER.into(),
                ok: true,
                artifact: draft,
                trace,
                rounds: round,
                notes: Vec::new(),
            }
            .logged(log));
        }
        feedback = Some(if report.ok {
            if verdict.trim().is_empty() {
                "The reviewer did not approve the draft.".to_string()
            } else {
                verdict
            }
        } else {
            format!("check_syntax reported:\n{}", report.summary())
        });
    }
    Ok(AgentOutcome {
        agent: ENGINEER.into(),
        ok: false,
        artifact: last_draft,
        trace,
        rounds: budget,
        notes: vec![format!("sub-task {} not approved after {budget} round(s)", subtask.id)],
    }
    .logged(log))
}
