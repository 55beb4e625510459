use rtlsmith_core::parse_plan;
use rtlsmith_llm::ChatBackend;

use crate::roles::{PLANNER, PLAN_CRITIC};
use crate::{approves, ask, AgentConfig, AgentError, AgentLog, AgentOutcome, AgentTrace};

/// Planner drafts, critic approves or suggests, until approval or the round
/// budget. Invalid drafts go back to the planner without a review.
pub fn run_high_level_planner(
    spec: &str,
    backend: &dyn ChatBackend,
    config: &AgentConfig,
    log: &dyn AgentLog,
) -> Result<AgentOutcome, AgentError> {
    if spec.trim().is_empty() {
        return Err(AgentError::Problem("empty module specification".into()));
    }
    let prompts = &config.prompts;
    let mut trace = AgentTrace::default();
    let mut best: Option<String> = None;
    let mut feedback: Option<String> = None;
    let mut last_reply = String::new();
    let budget = config.budgets.planner_rounds.max(1);

    for round in 1..=budget {
        let query = match (&feedback, &best) {
            (None, _) => format!("Module specification:\n{spec}\n\nWrite the sub-task plan as a JSON list."),
            (Some(fb), Some(plan)) => format!(
                "Module specification:\n{spec}\n\nPrevious plan:\n{plan}\n\nReviewer suggestions:\n{fb}\n\nWrite the revised sub-task plan as a JSON list."
            ),
            (Some(fb), None) => format!(
                "Module specification:\n{spec}\n\nYour previous reply was not a usable plan: {fb}\n\nWrite the sub-task plan as a JSON list."
            ),
        };
        last_reply = ask(backend, log, PLANNER, &prompts.planner, query)?;
        trace.say(PLANNER, &last_reply);
        let plan = match parse_plan(&last_reply) {
            Ok(p) => p,
            Err(e) => {
                feedback = Some(e.to_string());
                best = None;
                continue;
            }
        };
        let plan_json = plan.to_json();
        let review = ask(
            backend,
            log,
            PLAN_CRITIC,
            &prompts.plan_critic,
            format!(
                "Module specification:\n{spec}\n\nProposed plan:\n{plan_json}\n\nReply APPROVE or list suggestions."
            ),
        )?;
        trace.say(PLAN_CRITIC, &review);
        best = Some(plan_json.clone());
        if approves(&review) {
            return Ok(AgentOutcome {
                agent: PLANNER.into(),
                ok: true,
                artifact: plan_json,
                trace,
                rounds: round,
                notes: Vec::new(),
            }
            .logged(log));
        }
        feedback = Some(review);
    }
    Ok(AgentOutcome {
        agent: PLANNER.into(),
        ok: false,
        artifact: best.unwrap_or(last_reply),
        trace,
        rounds: budget,
        notes: vec![format!("no approved plan after {budget} round(s)")],
    }
    .logged(log))
}
