use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rtlsmith_core::{build_dag, build_graph, parse_plan, ExtractionDoc, TaskKind, TaskPlan};
use rtlsmith_llm::{CappedBackend, ChatBackend, LlmError};
use rtlsmith_sim::{MismatchRules, SimError, SimReport, Simulator};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::tools::SIMULATE;
use crate::{
    run_code_agent, run_debug_agent, run_extraction, run_high_level_planner, run_retrieval, AgentConfig, AgentError,
    AgentLog, Category, DebugOptions, ProblemSpec, TraceLog, Workbench,
};

pub const ARTIFACT_FINAL: &str = "final.v";
pub const ARTIFACT_PLAN: &str = "plan.json";
pub const ARTIFACT_TCRG: &str = "tcrg.json";
pub const ARTIFACT_TRACE: &str = "trace.jsonl";
pub const ARTIFACT_RESULT: &str = "result.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerMode {
    /// Planner and engineer only: no extraction, graph or retrieval.
    Simple,
    #[default]
    Tcrg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub planner: PlannerMode,
    pub ast_wt: bool,
    /// Put full requests into the trace log.
    pub verbose: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            planner: PlannerMode::Tcrg,
            ast_wt: true,
            verbose: false,
        }
    }
}

pub struct PipelineEnv<'a> {
    pub backend: &'a dyn ChatBackend,
    pub sim: &'a Simulator,
    pub rules: &'a MismatchRules,
    pub config: &'a AgentConfig,
    pub options: PipelineOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemStop {
    Passed,
    PlannerFailed,
    ExtractionInvalid,
    CodeFailed,
    DebugFailed,
    ReplyCap,
    AgentError,
    NoSource,
    /// Agents finished but the independent re-simulation failed.
    RecheckFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecheckSummary {
    pub compiled: bool,
    pub mismatch_count: Option<u64>,
    pub total_samples: Option<u64>,
    pub first_mismatch_time: Option<u64>,
}

impl From<&SimReport> for RecheckSummary {
    fn from(r: &SimReport) -> Self {
        RecheckSummary {
            compiled: r.compiled,
            mismatch_count: r.mismatch_count,
            total_samples: r.total_samples,
            first_mismatch_time: r.first_mismatch_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemResult {
    pub id: String,
    pub category: Category,
    pub passed: bool,
    pub stop: ProblemStop,
    pub detail: String,
    pub tool_calls: BTreeMap<String, u32>,
    pub replies: u32,
    pub planner_rounds: u32,
    /// Tool calls of the debug agent, in order.
    pub debug_actions: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub recheck: Option<RecheckSummary>,
    pub wall_ms: u64,
}

#[derive(Default)]
struct Progress {
    source: String,
    planner_rounds: u32,
    debug_actions: Vec<String>,
    artifacts: Vec<PathBuf>,
}

impl Progress {
    fn write(&mut self, dir: &Path, name: &str, text: &str) -> Result<(), AgentError> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| AgentError::io(&path, e))?;
        if !self.artifacts.contains(&path) {
            self.artifacts.push(path);
        }
        Ok(())
    }
}

/// Compile and simulate `source` from scratch in an emptied `dir`.
pub fn recheck(
    source: &str,
    testbench: &str,
    sim: &Simulator,
    rules: &MismatchRules,
    dir: &Path,
) -> Result<SimReport, SimError> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| SimError::Workdir {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    sim.simulate(source, testbench, dir, rules)
}

fn plan_from(artifact: &str) -> Result<TaskPlan, AgentError> {
    parse_plan(artifact).map_err(|e| AgentError::PlanValidation(e.to_string()))
}

/// The agent part of a run; returns where it stopped and why.
fn drive(
    problem: &ProblemSpec,
    env: &PipelineEnv<'_>,
    backend: &dyn ChatBackend,
    log: &TraceLog,
    dir: &Path,
    progress: &mut Progress,
) -> Result<(ProblemStop, String), AgentError> {
    let cfg = env.config;
    let spec = &problem.spec_text;
    let planned = run_high_level_planner(spec, backend, cfg, log)?;
    progress.planner_rounds = planned.rounds;
    if !planned.ok {
        progress.write(dir, ARTIFACT_PLAN, &planned.artifact)?;
        return Ok((ProblemStop::PlannerFailed, planned.notes.join("; ")));
    }
    let mut plan = plan_from(&planned.artifact)?;
    progress.write(dir, ARTIFACT_PLAN, &plan.to_json())?;

    if env.options.planner == PlannerMode::Tcrg {
        let extracted = match run_extraction(spec, backend, cfg, log) {
            Ok(o) => o,
            Err(AgentError::ExtractionInvalid(e)) => return Ok((ProblemStop::ExtractionInvalid, e)),
            Err(e) => return Err(e),
        };
        let doc = ExtractionDoc::from_json(&extracted.artifact)?;
        let graph = build_graph(&plan, &doc)?;
        progress.write(dir, ARTIFACT_TCRG, &graph.to_json())?;
        let retrieved = run_retrieval(&plan, &graph, backend, cfg, log)?;
        plan = plan_from(&retrieved.artifact)?;
        progress.write(dir, ARTIFACT_PLAN, &plan.to_json())?;
    }

    let bench = Workbench {
        sim: env.sim,
        rules: env.rules,
        workdir: dir.join("work"),
    };
    let debug_opts = DebugOptions {
        ast_wt: env.options.ast_wt,
        clock: problem.meta.clock.clone(),
        scope: problem.meta.dut_scope.clone(),
    };
    let mut dag = build_dag(&plan)?;
    loop {
        let ready = dag.next_ready();
        if ready.is_empty() {
            break;
        }
        for id in ready {
            let task = dag.task(&id).cloned().expect("ready task exists");
            dag.start(&id)?;
            log.event("pipeline", "task_start", json!({ "task": id, "type": task.kind }));
            let (outcome, stop) = match task.kind {
                TaskKind::Write => (
                    run_code_agent(&task, spec, &progress.source, backend, &bench, cfg, log)?,
                    ProblemStop::CodeFailed,
                ),
                TaskKind::Verify => {
                    let o = run_debug_agent(
                        &task,
                        spec,
                        &progress.source,
                        &problem.testbench,
                        backend,
                        &bench,
                        &debug_opts,
                        cfg,
                        log,
                    )?;
                    progress.debug_actions = o
                        .trace
                        .loops
                        .iter()
                        .flat_map(|l| l.trace.actions())
                        .map(str::to_string)
                        .collect();
                    (o, ProblemStop::DebugFailed)
                }
            };
            progress.source = outcome.artifact.clone();
            if outcome.ok {
                dag.complete(&id)?;
            } else {
                dag.fail(&id)?;
                return Ok((stop, format!("{id}: {}", outcome.notes.join("; "))));
            }
        }
    }
    Ok((ProblemStop::Passed, String::new()))
}

/// Plan, extract, retrieve, write and debug one problem, then re-simulate
/// the final module independently. Artifacts go to `out_root/<id>/`.
pub fn run_problem(problem: &ProblemSpec, env: &PipelineEnv<'_>, out_root: &Path) -> Result<ProblemResult, AgentError> {
    problem.validate()?;
    let started = Instant::now();
    let dir = out_root.join(&problem.id);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| AgentError::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| AgentError::io(&dir, e))?;
    let log = TraceLog::create(&dir.join(ARTIFACT_TRACE), &problem.id, env.options.verbose)?;
    log.event(
        "pipeline",
        "start",
        json!({ "planner": env.options.planner, "ast_wt": env.options.ast_wt, "backend": env.backend.describe() }),
    );
    let backend = CappedBackend::new(env.backend, env.config.budgets.global_reply_cap);
    let mut progress = Progress {
        artifacts: vec![log.path().to_path_buf()],
        ..Progress::default()
    };

    let (mut stop, mut detail) = match drive(problem, env, &backend, &log, &dir, &mut progress) {
        Ok(done) => done,
        Err(e) if e.is_fatal() => {
            log.event("pipeline", "fatal", json!({ "error": e.to_string() }));
            return Err(e);
        }
        Err(AgentError::Llm(LlmError::ReplyCap(n))) => (ProblemStop::ReplyCap, format!("reply cap of {n} reached")),
        Err(e) => (ProblemStop::AgentError, e.to_string()),
    };

    let mut summary = None;
    let mut passed = false;
    if progress.source.trim().is_empty() {
        if stop == ProblemStop::Passed {
            stop = ProblemStop::NoSource;
        }
    } else {
        progress.write(&dir, ARTIFACT_FINAL, &progress.source.clone())?;
        let report = recheck(
            &progress.source,
            &problem.testbench,
            env.sim,
            env.rules,
            &dir.join("recheck"),
        )?;
        log.event("pipeline", "recheck", json!({ "summary": report.summary() }));
        passed = report.passed();
        summary = Some(RecheckSummary::from(&report));
        if passed {
            stop = ProblemStop::Passed;
        } else if stop == ProblemStop::Passed {
            stop = ProblemStop::RecheckFailed;
            detail = report.summary();
        }
    }

    let tally = log.tally();
    let mut result = ProblemResult {
        id: problem.id.clone(),
        category: problem.meta.category,
        passed,
        stop,
        detail,
        tool_calls: tally.tool_calls,
        replies: tally.replies,
        planner_rounds: progress.planner_rounds,
        debug_actions: progress.debug_actions,
        artifacts: progress.artifacts,
        recheck: summary,
        wall_ms: 0,
    };
    let result_path = dir.join(ARTIFACT_RESULT);
    result.artifacts.push(result_path.clone());
    result.wall_ms = started.elapsed().as_millis() as u64;
    let text = serde_json::to_string_pretty(&result).expect("result serializes");
    std::fs::write(&result_path, text).map_err(|e| AgentError::io(&result_path, e))?;
    log.event("pipeline", "done", json!({ "passed": passed, "stop": stop }));
    log::info!(
        "{}: {:?} ({} simulate calls)",
        problem.id,
        stop,
        result.tool_calls.get(SIMULATE).unwrap_or(&0)
    );
    Ok(result)
}
