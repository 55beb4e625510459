//! Planner, extraction and retrieval against scripted replies.

use rtlsmith_agents::roles::{EXTRACTOR, PLANNER, PLAN_CRITIC, RETRIEVER};
use rtlsmith_agents::{run_extraction, run_high_level_planner, run_retrieval, AgentConfig, AgentError, NullLog};
use rtlsmith_core::{build_graph, parse_plan, ExtractionDoc, TaskKind, TaskPlan};
use rtlsmith_llm::{format_action, ScriptRule, ScriptedBackend, FINAL};

const SPEC: &str = "A Moore machine with states A and B and input w. State A to State B when w = 1.";

const PLAN: &str = r#"[
  {"id": "t1", "type": "write", "description": "Declare the ports clk, w and z."},
  {"id": "t2", "type": "write", "description": "Write the transitions on w."}
]"#;

fn rule(agent: &str, contains: &str, reply: impl Into<String>) -> ScriptRule {
    ScriptRule::new(contains, reply).for_agent(agent)
}

#[test]
fn planner_approved_in_round_one() {
    let b = ScriptedBackend::new(vec![rule(PLANNER, "", PLAN), rule(PLAN_CRITIC, "", "APPROVE")]);
    let out = run_high_level_planner(SPEC, &b, &AgentConfig::default(), &NullLog).unwrap();
    assert!(out.ok);
    assert_eq!(out.rounds, 1);
    let plan = parse_plan(&out.artifact).unwrap();
    // two write tasks plus the appended verify task
    assert_eq!(plan.subtasks.len(), 3);
    assert_eq!(plan.subtasks[2].kind, TaskKind::Verify);
    assert_eq!(plan.subtasks[1].depends_on, vec!["t1"]);
}

#[test]
fn planner_revises_after_suggestions() {
    let revised = PLAN.replace("Write the transitions on w.", "Write the transitions on w and drive z.");
    let b = ScriptedBackend::new(vec![
        rule(PLANNER, "Reviewer suggestions", revised),
        rule(PLANNER, "", PLAN),
        rule(PLAN_CRITIC, "drive z", "APPROVE"),
        rule(PLAN_CRITIC, "", "The plan never drives output z."),
    ]);
    let out = run_high_level_planner(SPEC, &b, &AgentConfig::default(), &NullLog).unwrap();
    assert!(out.ok);
    assert_eq!(out.rounds, 2);
    assert!(out.artifact.contains("drive z"));
    let said: Vec<&str> = out.trace.turns.iter().map(|t| t.speaker.as_str()).collect();
    assert_eq!(said, [PLANNER, PLAN_CRITIC, PLANNER, PLAN_CRITIC]);
}

#[test]
fn planner_invalid_json_goes_back_without_review() {
    let b = ScriptedBackend::new(vec![
        rule(PLANNER, "not a usable plan", PLAN),
        rule(PLANNER, "", "Sure! First declare the ports, then the logic."),
        rule(PLAN_CRITIC, "", "APPROVE"),
    ]);
    let out = run_high_level_planner(SPEC, &b, &AgentConfig::default(), &NullLog).unwrap();
    assert!(out.ok);
    assert_eq!(out.rounds, 2);
    assert_eq!(b.usage(), vec![1, 1, 1]);
}

#[test]
fn planner_budget_runs_out() {
    let b = ScriptedBackend::new(vec![rule(PLANNER, "", PLAN), rule(PLAN_CRITIC, "", "Split t2.")]);
    let mut cfg = AgentConfig::default();
    cfg.budgets.planner_rounds = 3;
    let out = run_high_level_planner(SPEC, &b, &cfg, &NullLog).unwrap();
    assert!(!out.ok);
    assert_eq!(out.rounds, 3);
    assert!(parse_plan(&out.artifact).is_ok());
}

const FSM_DOC: &str = r#"```json
{
  "signals": [
    {"name": "w", "description": "input examined by the FSM in state B"},
    {"name": "z", "description": "output"}
  ],
  "transitions": [
    {"label": "A->B", "description": "moves to B when w = 1", "signals": ["w"]}
  ],
  "examples": [
    {"description": "w = 1, 1, 0 gives z = 0, 1, 0", "signals": ["w", "z"]}
  ]
}
```"#;

#[test]
fn extraction_of_an_fsm() {
    let b = ScriptedBackend::new(vec![rule(EXTRACTOR, "", FSM_DOC)]);
    let out = run_extraction(SPEC, &b, &AgentConfig::default(), &NullLog).unwrap();
    let doc = ExtractionDoc::from_json(&out.artifact).unwrap();
    assert_eq!(
        (doc.signals.len(), doc.transitions.len(), doc.examples.len()),
        (2, 1, 1)
    );
    assert_eq!(out.rounds, 1);
}

#[test]
fn extraction_of_combinational_logic_has_no_transitions() {
    let b = ScriptedBackend::new(vec![rule(
        EXTRACTOR,
        "",
        r#"{"signals": [{"name": "a", "description": "in"}, {"name": "y", "description": "out"}]}"#,
    )]);
    let out = run_extraction("y = ~a", &b, &AgentConfig::default(), &NullLog).unwrap();
    let doc = ExtractionDoc::from_json(&out.artifact).unwrap();
    assert!(doc.transitions.is_empty() && doc.examples.is_empty());
}

#[test]
fn extraction_gets_one_retry() {
    let bad = r#"{"signals": [], "transitions": [{"label": "x", "description": "", "signals": ["ghost"]}]}"#;
    let b = ScriptedBackend::new(vec![
        rule(EXTRACTOR, "could not be used", FSM_DOC),
        rule(EXTRACTOR, "", bad),
    ]);
    let out = run_extraction(SPEC, &b, &AgentConfig::default(), &NullLog).unwrap();
    assert_eq!(out.rounds, 2);

    let b = ScriptedBackend::new(vec![rule(EXTRACTOR, "", bad)]);
    let err = run_extraction(SPEC, &b, &AgentConfig::default(), &NullLog).unwrap_err();
    assert!(
        matches!(err, AgentError::ExtractionInvalid(ref m) if m.contains("ghost")),
        "{err}"
    );
}

fn fsm_graph() -> (TaskPlan, rtlsmith_core::Tcrg) {
    let plan = parse_plan(
        r#"[
      {"id": "t1", "type": "write", "description": "Write the transition on w."},
      {"id": "t2", "type": "write", "description": "Add a comment header."}
    ]"#,
    )
    .unwrap();
    let doc = ExtractionDoc::from_json(FSM_DOC).unwrap();
    let g = build_graph(&plan, &doc).unwrap();
    (plan, g)
}

#[test]
fn retrieval_with_one_hop_fills_context() {
    let (plan, g) = fsm_graph();
    let b = ScriptedBackend::new(vec![
        rule(RETRIEVER, "Call khop", format_action("", "khop", "1")),
        rule(
            RETRIEVER,
            "no circuit details",
            format_action("", FINAL, "nothing linked"),
        ),
        rule(RETRIEVER, "", format_action("", FINAL, "{{prompt}}")),
    ]);
    let out = run_retrieval(&plan, &g, &b, &AgentConfig::default(), &NullLog).unwrap();
    let enriched = parse_plan(&out.artifact).unwrap();
    let t1 = &enriched.get("t1").unwrap().context;
    assert!(t1.contains("w: input examined by the FSM in state B (hop 1)"), "{t1}");
    assert!(t1.contains("transitions: none"));
    // t2 mentions no signal
    assert_eq!(enriched.get("t2").unwrap().context, "nothing linked");
    // verify task untouched
    assert_eq!(out.trace.loops.len(), 2);
}

#[test]
fn retrieval_escalates_to_two_hops() {
    let (plan, g) = fsm_graph();
    let b = ScriptedBackend::new(vec![
        rule(RETRIEVER, "Call khop", format_action("", "khop", "k=1")),
        rule(
            RETRIEVER,
            "transitions: none",
            format_action("need the transitions", "khop", r#"{"k": 2}"#),
        ),
        rule(RETRIEVER, "", format_action("", FINAL, "{{prompt}}")),
    ]);
    let out = run_retrieval(&plan, &g, &b, &AgentConfig::default(), &NullLog).unwrap();
    let enriched = parse_plan(&out.artifact).unwrap();
    let t1 = &enriched.get("t1").unwrap().context;
    assert!(t1.contains("A->B: moves to B when w = 1 (hop 2)"), "{t1}");
    assert!(t1.contains("w = 1, 1, 0 gives z = 0, 1, 0 (hop 2)"));
    assert_eq!(out.trace.loops[0].trace.actions(), vec!["khop", "khop"]);
}

#[test]
fn retrieval_without_final_leaves_context_empty() {
    let (plan, g) = fsm_graph();
    let b = ScriptedBackend::new(vec![rule(RETRIEVER, "", format_action("", "khop", "1"))]);
    let out = run_retrieval(&plan, &g, &b, &AgentConfig::default(), &NullLog).unwrap();
    let enriched = parse_plan(&out.artifact).unwrap();
    assert!(enriched.subtasks.iter().all(|t| t.context.is_empty()));
    assert_eq!(out.notes.len(), 2);
}
