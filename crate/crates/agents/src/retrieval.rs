use rtlsmith_core::tcrg::task_node_id;
use rtlsmith_core::{khop, TaskKind, TaskPlan, Tcrg};
use rtlsmith_llm::{react_loop, ChatBackend, ReactRun, StopReason, ToolFailure, ToolRegistry};
use serde_json::Value;

use crate::roles::RETRIEVER;
use crate::tools::KHOP;
use crate::{AgentConfig, AgentError, AgentLog, AgentOutcome, AgentTrace, LabeledTrace};

const MAX_K: usize = 16;

/// `2`, `k=2` or `{"k": 2}`.
fn parse_k(input: &str) -> Option<usize> {
    let t = input.trim();
    let k = match serde_json::from_str::<Value>(t) {
        Ok(Value::Number(n)) => n.as_u64(),
        Ok(Value::Object(o)) => o.get("k").and_then(Value::as_u64),
        _ => t
            .trim_start_matches("k")
            .trim_start_matches(['=', ':', ' '])
            .parse()
            .ok(),
    }?;
    usize::try_from(k).ok()
}

/// For every write sub-task, a tool loop over `khop` whose final answer
/// becomes the sub-task's context.
pub fn run_retrieval(
    plan: &TaskPlan,
    graph: &Tcrg,
    backend: &dyn ChatBackend,
    config: &AgentConfig,
    log: &dyn AgentLog,
) -> Result<AgentOutcome, AgentError> {
    for t in &plan.subtasks {
        if graph.node(&task_node_id(&t.id)).is_none() {
            return Err(AgentError::PlanValidation(format!(
                "sub-task '{}' has no graph node",
                t.id
            )));
        }
    }
    let mut enriched = plan.clone();
    let mut trace = AgentTrace::default();
    let mut notes = Vec::new();
    for task in plan.subtasks.iter().filter(|t| t.kind == TaskKind::Write) {
        let mut tools = ToolRegistry::new();
        tools.register(
            KHOP,
            "input: hop count k. Lists the signals, transitions and examples within k hops of this sub-task.",
            |input| {
                let k = parse_k(input)
                    .ok_or_else(|| ToolFailure::Recoverable(format!("expected a hop count, got '{input}'")))?;
                let k = k.min(MAX_K);
                khop(graph, &task.id, k)
                    .map(|r| r.render())
                    .map_err(|e| ToolFailure::Recoverable(e.to_string()))
            },
        )?;
        let query = format!(
            "Sub-task {}: {}\n\nCall khop with a hop count to collect the circuit details for this sub-task, then give the relevant details as the FINAL answer.",
            task.id, task.description
        );
        let t = react_loop(
            ReactRun {
                agent: RETRIEVER,
                system_prompt: &config.prompts.retriever,
                query: &query,
                backend,
                limits: config.budgets.retrieval,
                sink: log,
            },
            &mut tools,
        )?;
        let context = match (&t.stop_reason, &t.final_answer) {
            (StopReason::Final, Some(answer)) => answer.trim().to_string(),
            _ => {
                notes.push(format!(
                    "{}: retrieval stopped ({:?}), context left empty",
                    task.id, t.stop_reason
                ));
                String::new()
            }
        };
        if let Some(st) = enriched.get_mut(&task.id) {
            st.context = context;
        }
        trace.loops.push(LabeledTrace {
            label: task.id.clone(),
            trace: t,
        });
    }
    let rounds = trace.loops.len() as u32;
    Ok(AgentOutcome {
        agent: RETRIEVER.into(),
        ok: true,
        artifact: enriched.to_json(),
        trace,
        rounds,
        notes,
    }
    .logged(log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hop_counts() {
        assert_eq!(parse_k("2"), Some(2));
        assert_eq!(parse_k(" k=3 "), Some(3));
        assert_eq!(parse_k(r#"{"k": 1}"#), Some(1));
        assert_eq!(parse_k("k: 4"), Some(4));
        assert_eq!(parse_k("many"), None);
        assert_eq!(parse_k("-1"), None);
    }
}
