//! Sub-task plans and the dependency DAG that schedules them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Write part of the module.
    Write,
    /// Verify and debug the module against the testbench.
    Verify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTask {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: TaskKind,
    pub description: String,
    #[serde(default)]
    pub context: String,
    #[serde(default)]
    pub depends_on: Vec<String>,
}

/// Validated plan. Serializes to the plan wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskPlan {
    pub subtasks: Vec<SubTask>,
}

impl TaskPlan {
    pub fn get(&self, id: &str) -> Option<&SubTask> {
        self.subtasks.iter().find(|t| t.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut SubTask> {
        self.subtasks.iter_mut().find(|t| t.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan is not valid JSON: {0}")]
    Format(String),
    #[error("invalid plan: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DagError {
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("no task '{0}'")]
    UnknownTask(String),
    #[error("task '{id}' cannot go from {from} to {to}")]
    InvalidTransition {
        id: String,
        from: TaskStatus,
        to: TaskStatus,
    },
}

/// Wire form: `depends_on` and `context` may be omitted.
#[derive(Deserialize)]
struct RawTask {
    id: String,
    #[serde(rename = "type")]
    kind: TaskKind,
    description: String,
    #[serde(default)]
    context: Option<String>,
    #[serde(default)]
    depends_on: Option<Vec<String>>,
}

/// Strip a surrounding Markdown code fence, if any.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Parse and normalise a plan.
///
/// A task without `depends_on` depends on the task before it. When the last
/// task is not a verify task, one is appended that depends on every task
/// nothing else depends on.
pub fn parse_plan(text: &str) -> Result<TaskPlan, PlanError> {
    let raw: Vec<RawTask> = serde_json::from_str(unfence(text)).map_err(|e| PlanError::Format(e.to_string()))?;
    if raw.is_empty() {
        return Err(PlanError::Validation("plan has no tasks".into()));
    }
    let mut subtasks: Vec<SubTask> = Vec::with_capacity(raw.len() + 1);
    let mut seen = BTreeSet::new();
    for (i, t) in raw.into_iter().enumerate() {
        if t.id.trim().is_empty() {
            return Err(PlanError::Validation(format!("task #{} has an empty id", i + 1)));
        }
        if !seen.insert(t.id.clone()) {
            return Err(PlanError::Validation(format!("duplicate task id '{}'", t.id)));
        }
        let depends_on = match t.depends_on {
            Some(d) => d,
            None => subtasks.last().map(|p| vec![p.id.clone()]).unwrap_or_default(),
        };
        subtasks.push(SubTask {
            id: t.id,
            kind: t.kind,
            description: t.description,
            context: t.context.unwrap_or_default(),
            depends_on,
        });
    }
    for t in &subtasks {
        for d in &t.depends_on {
            if !seen.contains(d) {
                return Err(PlanError::Validation(format!(
                    "task '{}' depends on unknown task '{d}'",
                    t.id
                )));
            }
            if d == &t.id {
                return Err(PlanError::Validation(format!("task '{d}' depends on itself")));
            }
        }
    }
    if subtasks.last().map(|t| t.kind) != Some(TaskKind::Verify) {
        let used: BTreeSet<&String> = subtasks.iter().flat_map(|t| &t.depends_on).collect();
        let sinks: Vec<String> = subtasks
            .iter()
            .filter(|t| !used.contains(&t.id))
            .map(|t| t.id.clone())
            .collect();
        let mut id = "verify".to_string();
        let mut n = 2;
        while seen.contains(&id) {
            id = format!("verify_{n}");
            n += 1;
        }
        subtasks.push(SubTask {
            id,
            kind: TaskKind::Verify,
            description: "Verify the complete module against the testbench and debug any mismatches.".into(),
            context: String::new(),
            depends_on: sinks,
        });
    }
    Ok(TaskPlan { subtasks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskStatus::Pending => "pending",
            TaskStatus::Running => "running",
            TaskStatus::Done => "done",
            TaskStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDag {
    /// Plan order.
    order: Vec<String>,
    nodes: BTreeMap<String, SubTask>,
    parents: BTreeMap<String, BTreeSet<String>>,
    status: BTreeMap<String, TaskStatus>,
}

pub fn build_dag(plan: &TaskPlan) -> Result<TaskDag, DagError> {
    let nodes: BTreeMap<String, SubTask> = plan.subtasks.iter().map(|t| (t.id.clone(), t.clone())).collect();
    let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in &plan.subtasks {
        let mut ps = BTreeSet::new();
        for d in &t.depends_on {
            if !nodes.contains_key(d) {
                return Err(DagError::UnknownTask(d.clone()));
            }
            ps.insert(d.clone());
        }
        parents.insert(t.id.clone(), ps);
    }
    if let Some(cycle) = find_cycle(&plan.subtasks, &parents) {
        return Err(DagError::Cycle(cycle));
    }
    Ok(TaskDag {
        order: plan.subtasks.iter().map(|t| t.id.clone()).collect(),
        status: nodes.keys().map(|k| (k.clone(), TaskStatus::Pending)).collect(),
        nodes,
        parents,
    })
}

/// One cycle as a closed walk `a -> b -> ... -> a`, following dependencies.
fn find_cycle(tasks: &[SubTask], parents: &BTreeMap<String, BTreeSet<String>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Closed,
    }
    let mut mark: BTreeMap<&str, Mark> = tasks.iter().map(|t| (t.id.as_str(), Mark::New)).collect();
    for start in tasks {
        if mark[start.id.as_str()] != Mark::New {
            continue;
        }
        // iterative DFS keeping the current path
        let mut path: Vec<&str> = vec![start.id.as_str()];
        let mut iters: Vec<std::collections::btree_set::Iter<'_, String>> = vec![parents[&start.id].iter()];
        mark.insert(start.id.as_str(), Mark::Open);
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some(p) => match mark[p.as_str()] {
                    Mark::New => {
                        mark.insert(p.as_str(), Mark::Open);
                        path.push(p.as_str());
                        iters.push(parents[p].iter());
                    }
                    Mark::Open => {
                        let from = path.iter().position(|n| *n == p.as_str()).expect("on path");
                        let mut cycle: Vec<String> = path[from..].iter().map(|s| s.to_string()).collect();
                        cycle.push(p.clone());
                        return Some(cycle);
                    }
                    Mark::Closed => {}
                },
                None => {
                    let done = path.pop().expect("path tracks iters");
                    mark.insert(done, Mark::Closed);
                    iters.pop();
                }
            }
        }
    }
    None
}

impl TaskDag {
    pub fn task(&self, id: &str) -> Option<&SubTask> {
        self.nodes.get(id)
    }

    pub fn task_mut(&mut self, id: &str) -> Option<&mut SubTask> {
        self.nodes.get_mut(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.order
    }

    pub fn parents(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.parents.get(id)
    }

    pub fn status(&self, id: &str) -> Option<TaskStatus> {
        self.status.get(id).copied()
    }

    pub fn is_halted(&self) -> bool {
        self.status.values().any(|s| *s == TaskStatus::Failed)
    }

    pub fn is_complete(&self) -> bool {
        self.status.values().all(|s| *s == TaskStatus::Done)
    }

    /// Pending tasks whose parents are all done, in plan order. Empty once
    /// any task has failed.
    pub fn next_ready(&self) -> Vec<String> {
        if self.is_halted() {
            return Vec::new();
        }
        self.order
            .iter()
            .filter(|id| self.status[*id] == TaskStatus::Pending)
            .filter(|id| self.parents[*id].iter().all(|p| self.status[p] == TaskStatus::Done))
            .cloned()
            .collect()
    }

    fn transition(&mut self, id: &str, from: TaskStatus, to: TaskStatus) -> Result<(), DagError> {
        let current = self
            .status
            .get(id)
            .copied()
            .ok_or_else(|| DagError::UnknownTask(id.to_string()))?;
        let blocked = to == TaskStatus::Running && !self.next_ready().iter().any(|r| r == id);
        if current != from || blocked {
            return Err(DagError::InvalidTransition {
                id: id.to_string(),
                from: current,
                to,
            });
        }
        self.status.insert(id.to_string(), to);
        Ok(())
    }

    pub fn start(&mut self, id: &str) -> Result<(), DagError> {
        self.transition(id, TaskStatus::Pending, TaskStatus::Running)
    }

    pub fn complete(&mut self, id: &str) -> Result<(), DagError> {
        self.transition(id, TaskStatus::Running, TaskStatus::Done)
    }

    pub fn fail(&mut self, id: &str) -> Result<(), DagError> {
        self.transition(id, TaskStatus::Running, TaskStatus::Failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    const LINEAR: &str = r#"[
        {"id": "t1", "type": "write", "description": "Declare the ports."},
        {"id": "t2", "type": "write", "description": "Implement out."},
        {"id": "t3", "type": "verify", "description": "Check the module."}
    ]"#;

    #[test]
    fn well_formed_linear_plan() {
        let plan = parse_plan(LINEAR).unwrap();
        assert_eq!(plan.subtasks.len(), 3);
        assert_eq!(plan.subtasks[0].depends_on, Vec::<String>::new());
        assert_eq!(plan.subtasks[1].depends_on, ids(&["t1"]));
        assert_eq!(plan.subtasks[2].depends_on, ids(&["t2"]));
        assert_eq!(parse_plan(&plan.to_json()).unwrap(), plan);
    }

    #[test]
    fn fenced_plans_are_accepted() {
        let plan = parse_plan(&format!("```json\n{LINEAR}\n```")).unwrap();
        assert_eq!(plan.subtasks.len(), 3);
    }

    #[test]
    fn trailing_write_gets_a_verify_task_on_all_sinks() {
        let text = r#"[
            {"id": "a", "type": "write", "description": "x", "depends_on": []},
            {"id": "b", "type": "write", "description": "y", "depends_on": ["a"]},
            {"id": "c", "type": "write", "description": "z", "depends_on": ["a"]}
        ]"#;
        let plan = parse_plan(text).unwrap();
        let last = plan.subtasks.last().unwrap();
        assert_eq!(last.kind, TaskKind::Verify);
        assert_eq!(last.id, "verify");
        assert_eq!(last.depends_on, ids(&["b", "c"]));
    }

    #[test]
    fn validation_errors() {
        let dangling = r#"[{"id": "a", "type": "verify", "description": "x", "depends_on": ["missing"]}]"#;
        assert!(matches!(parse_plan(dangling), Err(PlanError::Validation(m)) if m.contains("missing")));
        let dup =
            r#"[{"id": "a", "type": "write", "description": "x"}, {"id": "a", "type": "verify", "description": "y"}]"#;
        assert!(matches!(parse_plan(dup), Err(PlanError::Validation(_))));
        assert!(matches!(parse_plan("[]"), Err(PlanError::Validation(_))));
        assert!(matches!(parse_plan("not json"), Err(PlanError::Format(_))));
        let bad_type = r#"[{"id": "a", "type": "build", "description": "x"}]"#;
        assert!(matches!(parse_plan(bad_type), Err(PlanError::Format(_))));
    }

    #[test]
    fn chain_dag_and_scheduling() {
        let mut dag = build_dag(&parse_plan(LINEAR).unwrap()).unwrap();
        assert_eq!(dag.next_ready(), ids(&["t1"]));
        assert!(dag.start("t2").is_err());
        dag.start("t1").unwrap();
        assert!(dag.next_ready().is_empty());
        dag.complete("t1").unwrap();
        assert_eq!(dag.next_ready(), ids(&["t2"]));
        assert!(dag.complete("t2").is_err());
    }

    #[test]
    fn two_cycle_names_both_ids() {
        let text = r#"[
            {"id": "a", "type": "write", "description": "x", "depends_on": ["b"]},
            {"id": "b", "type": "verify", "description": "y", "depends_on": ["a"]}
        ]"#;
        match build_dag(&parse_plan(text).unwrap()) {
            Err(DagError::Cycle(c)) => {
                assert!(c.contains(&"a".to_string()) && c.contains(&"b".to_string()));
                assert_eq!(c.first(), c.last());
            }
            other => panic!("{other:?}"),
        }
    }

    fn diamond() -> TaskDag {
        let text = r#"[
            {"id": "A", "type": "write", "description": "a"},
            {"id": "B", "type": "write", "description": "b", "depends_on": ["A"]},
            {"id": "C", "type": "write", "description": "c", "depends_on": ["A"]},
            {"id": "D", "type": "verify", "description": "d", "depends_on": ["B", "C"]}
        ]"#;
        build_dag(&parse_plan(text).unwrap()).unwrap()
    }

    #[test]
    fn diamond_readiness() {
        let mut dag = diamond();
        assert_eq!(dag.parents("D").unwrap().len(), 2);
        dag.start("A").unwrap();
        dag.complete("A").unwrap();
        assert_eq!(dag.next_ready(), ids(&["B", "C"]));
        dag.start("C").unwrap();
        dag.complete("C").unwrap();
        assert_eq!(dag.next_ready(), ids(&["B"]));
    }

    #[test]
    fn failure_halts_everything() {
        let mut dag = diamond();
        dag.start("A").unwrap();
        dag.complete("A").unwrap();
        dag.start("B").unwrap();
        dag.fail("B").unwrap();
        assert!(dag.is_halted());
        assert!(dag.next_ready().is_empty());
        assert!(dag.start("C").is_err());
        assert!(dag.fail("B").is_err());
    }
}
