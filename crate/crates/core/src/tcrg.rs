//! Task and circuit relation graph: links plan sub-tasks to the signals they
//! implement, and signals to their transitions and worked examples.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::task_graph::TaskPlan;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TcrgError {
    #[error("{kind} '{item}' references unlisted signal '{signal}'")]
    DanglingReference {
        kind: &'static str,
        item: String,
        signal: String,
    },
    #[error("invalid document: {0}")]
    Schema(String),
    #[error("no node '{0}'")]
    UnknownNode(String),
    #[error("node '{0}' is not a task")]
    NotATaskNode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalDoc {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub label: String,
    pub description: String,
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExampleDoc {
    pub description: String,
    pub signals: Vec<String>,
}

/// What the extraction step reports about a specification.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionDoc {
    #[serde(default)]
    pub signals: Vec<SignalDoc>,
    #[serde(default)]
    pub transitions: Vec<TransitionDoc>,
    #[serde(default)]
    pub examples: Vec<ExampleDoc>,
}

impl ExtractionDoc {
    /// Parse and validate. A surrounding Markdown fence is tolerated.
    pub fn from_json(text: &str) -> Result<Self, TcrgError> {
        let body = strip_fence(text);
        let doc: ExtractionDoc = serde_json::from_str(body).map_err(|e| TcrgError::Schema(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), TcrgError> {
        let mut names = BTreeSet::new();
        for s in &self.signals {
            if s.name.trim().is_empty() {
                return Err(TcrgError::Schema("signal with empty name".into()));
            }
            if !names.insert(s.name.as_str()) {
                return Err(TcrgError::Schema(format!("signal '{}' listed twice", s.name)));
            }
        }
        let check = |kind: &'static str, item: &str, refs: &[String]| {
            for r in refs {
                if !names.contains(r.as_str()) {
                    return Err(TcrgError::DanglingReference {
                        kind,
                        item: item.to_string(),
                        signal: r.clone(),
                    });
                }
            }
            Ok(())
        };
        for t in &self.transitions {
            check("transition", &t.label, &t.signals)?;
        }
        for e in &self.examples {
            check("example", &e.description, &e.signals)?;
        }
        Ok(())
    }
}

fn strip_fence(text: &str) -> &str {
    let t = text.trim();
    match t.strip_prefix("```") {
        Some(rest) => {
            let body = rest.split_once('\n').map_or("", |(_, b)| b);
            body.trim_end().strip_suffix("```").unwrap_or(body).trim()
        }
        None => t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Task,
    Signal,
    Transition,
    Example,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "IMPLEMENTS")]
    Implements,
    #[serde(rename = "SIGNALTRANSITION")]
    SignalTransition,
    #[serde(rename = "EXAMPLES")]
    Examples,
}

impl Relation {
    fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            Relation::Implements => (NodeKind::Task, NodeKind::Signal),
            Relation::SignalTransition => (NodeKind::Signal, NodeKind::Transition),
            Relation::Examples => (NodeKind::Signal, NodeKind::Example),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub rel: Relation,
}

/// Immutable typed graph. Serializes as `{"nodes": [...], "edges": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TcrgWire", into = "TcrgWire")]
pub struct Tcrg {
    nodes: BTreeMap<String, Node>,
    edges: BTreeSet<Edge>,
    #[serde(skip)]
    out: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct TcrgWire {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl TryFrom<TcrgWire> for Tcrg {
    type Error = TcrgError;

    fn try_from(w: TcrgWire) -> Result<Self, TcrgError> {
        Tcrg::from_parts(w.nodes, w.edges)
    }
}

impl From<Tcrg> for TcrgWire {
    fn from(g: Tcrg) -> Self {
        TcrgWire {
            nodes: g.nodes.into_values().collect(),
            edges: g.edges.into_iter().collect(),
        }
    }
}

pub fn task_node_id(task: &str) -> String {
    format!("task:{task}")
}

pub fn signal_node_id(name: &str) -> String {
    format!("signal:{name}")
}

impl Tcrg {
    /// Assemble a graph, checking id uniqueness, endpoint existence, edge
    /// typing and duplicate edges.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, TcrgError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if map.contains_key(&n.id) {
                return Err(TcrgError::Schema(format!("duplicate node id '{}'", n.id)));
            }
            map.insert(n.id.clone(), n);
        }
        let mut set = BTreeSet::new();
        for e in edges {
            let (want_from, want_to) = e.rel.endpoints();
            let kind = |id: &str| {
                map.get(id)
                    .map(|n: &Node| n.kind)
                    .ok_or_else(|| TcrgError::UnknownNode(id.to_string()))
            };
            if kind(&e.from)? != want_from || kind(&e.to)? != want_to {
                return Err(TcrgError::Schema(format!(
                    "{:?} edge {} -> {} joins the wrong node kinds",
                    e.rel, e.from, e.to
                )));
            }
            if !set.insert(e.clone()) {
                return Err(TcrgError::Schema(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
        }
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in &set {
            out.entry(e.from.clone()).or_default().push(e.to.clone());
        }
        Ok(Tcrg {
            nodes: map,
            edges: set,
            out,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn successors(&self, id: &str) -> &[String] {
        self.out.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TcrgError> {
        let wire: TcrgWire = serde_json::from_str(text).map_err(|e| TcrgError::Schema(e.to_string()))?;
        Tcrg::try_from(wire)
    }
}

/// True when `name` appears in `text` delimited by non-identifier characters.
fn mentions(text: &str, name: &str) -> bool {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '$'))
        .any(|tok| tok == name)
}

pub fn build_graph(plan: &TaskPlan, doc: &ExtractionDoc) -> Result<Tcrg, TcrgError> {
    if plan.subtasks.is_empty() {
        return Err(TcrgError::Schema("plan has no tasks".into()));
    }
    doc.validate()?;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for t in &plan.subtasks {
        nodes.push(Node {
            id: task_node_id(&t.id),
            kind: NodeKind::Task,
            text: t.description.clone(),
        });
    }
    let mut signals = doc.signals.clone();
    signals.sort();
    for s in &signals {
        let id = signal_node_id(&s.name);
        nodes.push(Node {
            id: id.clone(),
            kind: NodeKind::Signal,
            text: format!("{}: {}", s.name, s.description),
        });
        for t in &plan.subtasks {
            if mentions(&t.description, &s.name) {
                edges.push(Edge {
                    from: task_node_id(&t.id),
                    to: id.clone(),
                    rel: Relation::Implements,
                });
            }
        }
    }
    // canonical order makes numbering independent of document order
    let mut transitions: Vec<TransitionDoc> = doc
        .transitions
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.signals.sort();
            t.signals.dedup();
            t
        })
        .collect();
    transitions.sort();
    transitions.dedup();
    for (i, t) in transitions.iter().enumerate() {
        let id = format!("transition:{}", i + 1);
        nodes.push(Node {
            id: id.clone(),
            kind: NodeKind::Transition,
            text: format!("{}: {}", t.label, t.description),
        });
        for s in &t.signals {
            edges.push(Edge {
                from: signal_node_id(s),
                to: id.clone(),
                rel: Relation::SignalTransition,
            });
        }
    }
    let mut examples: Vec<ExampleDoc> = doc
        .examples
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.signals.sort();
            e.signals.dedup();
            e
        })
        .collect();
    examples.sort();
    examples.dedup();
    for (i, e) in examples.iter().enumerate() {
        let id = format!("example:{}", i + 1);
        nodes.push(Node {
            id: id.clone(),
            kind: NodeKind::Example,
            text: e.description.clone(),
        });
        for s in &e.signals {
            edges.push(Edge {
                from: signal_node_id(s),
                to: id.clone(),
                rel: Relation::Examples,
            });
        }
    }
    Tcrg::from_parts(nodes, edges)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retrieved {
    pub id: String,
    pub text: String,
    pub hop: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub task_id: String,
    pub k: usize,
    pub signals: Vec<Retrieved>,
    pub transitions: Vec<Retrieved>,
    pub examples: Vec<Retrieved>,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.signals.is_empty() && self.transitions.is_empty() && self.examples.is_empty()
    }

    pub fn node_ids(&self) -> BTreeSet<String> {
        self.signals
            .iter()
            .chain(&self.transitions)
            .chain(&self.examples)
            .map(|r| r.id.clone())
            .collect()
    }

    /// Bulleted text for an agent observation.
    pub fn render(&self) -> String {
        if self.is_empty() {
            return format!(
                "no circuit details found within {} hop(s) of {}\n",
                self.k, self.task_id
            );
        }
        let mut out = String::new();
        for (title, items) in [
            ("signals", &self.signals),
            ("transitions", &self.transitions),
            ("examples", &self.examples),
        ] {
            if items.is_empty() {
                let _ = writeln!(out, "{title}: none");
                continue;
            }
            let _ = writeln!(out, "{title}:");
            for r in items {
                let _ = writeln!(out, "- {} (hop {})", r.text, r.hop);
            }
        }
        out
    }
}

/// Breadth-first neighbourhood of a task node along edge directions.
/// `task_id` may be a node id (`task:t1`) or a bare sub-task id.
pub fn khop(graph: &Tcrg, task_id: &str, k: usize) -> Result<RetrievalResult, TcrgError> {
    let id = if graph.nodes.contains_key(task_id) {
        task_id.to_string()
    } else {
        let prefixed = task_node_id(task_id);
        if !graph.nodes.contains_key(&prefixed) {
            return Err(TcrgError::UnknownNode(task_id.to_string()));
        }
        prefixed
    };
    if graph.nodes[&id].kind != NodeKind::Task {
        return Err(TcrgError::NotATaskNode(id));
    }
    let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(id.as_str(), 0)]);
    let mut queue = VecDeque::from([id.as_str()]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n];
        if d == k {
            continue;
        }
        for m in graph.successors(n) {
            if !dist.contains_key(m.as_str()) {
                dist.insert(m.as_str(), d + 1);
                queue.push_back(m.as_str());
            }
        }
    }
    let mut result = RetrievalResult {
        task_id: id.clone(),
        k,
        signals: Vec::new(),
        transitions: Vec::new(),
        examples: Vec::new(),
    };
    let mut found: Vec<(usize, &str)> = dist.iter().filter(|(n, _)| **n != id).map(|(n, d)| (*d, *n)).collect();
    found.sort();
    for (hop, n) in found {
        let node = &graph.nodes[n];
        let r = Retrieved {
            id: node.id.clone(),
            text: node.text.clone(),
            hop,
        };
        match node.kind {
            NodeKind::Signal => result.signals.push(r),
            NodeKind::Transition => result.transitions.push(r),
            NodeKind::Example => result.examples.push(r),
            NodeKind::Task => {}
        }
    }
    Ok(result)
}
