use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::{Diagnostic, DiagnosticKind};

/// One statement that assigns a traced signal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DriverSite {
    /// The assignment statement (or whole `assign ...;` item).
    pub span: Span,
    pub kind: AssignmentKind,
    /// Enclosing headers, outermost first: `always @(...)`, `if (...)`,
    /// `case (...)` and the matching arm labels.
    pub context: Vec<Span>,
    /// Positions in `context` of `if` headers whose else branch holds the
    /// statement.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub else_of: Vec<usize>,
}

/// Signals read by the statements that assign `target`, including the
/// guards and event expressions those statements sit under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverSet {
    pub target: String,
    pub drivers: BTreeSet<String>,
    pub sites: Vec<DriverSite>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraceEdge {
    pub from: String,
    pub to: String,
}

/// Breadth-first closure of the driver relation from a set of roots.
///
/// `sites` holds the driving statements of every signal that was expanded,
/// i.e. every signal whose level is below the requested depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGraph {
    pub roots: BTreeSet<String>,
    pub edges: BTreeSet<TraceEdge>,
    pub level_of: BTreeMap<String, usize>,
    pub sites: BTreeMap<String, Vec<DriverSite>>,
}

impl TraceGraph {
    pub fn signals(&self) -> BTreeSet<String> {
        self.level_of.keys().cloned().collect()
    }

    /// Signals ordered by hop distance, then name.
    pub fn signals_by_level(&self) -> Vec<(String, usize)> {
        let mut v: Vec<_> = self.level_of.iter().map(|(s, l)| (s.clone(), *l)).collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

fn unknown(signal: &str) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::UnknownSignal,
        line: 0,
        column: 0,
        message: format!("'{signal}' is not a port, net or variable of this module"),
    }
}

/// Guard and event identifiers plus header spans on the path to a statement.
#[derive(Clone, Default)]
struct Guards {
    idents: BTreeSet<String>,
    context: Vec<Span>,
    else_of: Vec<usize>,
}

pub fn direct_drivers(module: &AstModule, signal: &str) -> Result<DriverSet, Diagnostic> {
    if !module.is_signal(signal) {
        return Err(unknown(signal));
    }
    let mut reads = BTreeSet::new();
    let mut sites = Vec::new();

    for decl in &module.decls {
        if decl.name == signal && decl.kind == DeclKind::Wire {
            if let Some(init) = &decl.init {
                init.identifiers(&mut reads);
                sites.push(DriverSite {
                    span: decl.span,
                    kind: AssignmentKind::Continuous,
                    context: Vec::new(),
                    else_of: Vec::new(),
                });
            }
        }
    }

    for item in &module.items {
        match item {
            Item::Assign(assign) => {
                let mut hit = false;
                for asg in &assign.assignments {
                    let mut targets = BTreeSet::new();
                    asg.lhs.lvalue_targets(&mut targets);
                    if targets.contains(signal) {
                        hit = true;
                        asg.rhs.identifiers(&mut reads);
                        asg.lhs.lvalue_index_reads(&mut reads);
                    }
                }
                if hit {
                    sites.push(DriverSite {
                        span: assign.span,
                        kind: AssignmentKind::Continuous,
                        context: Vec::new(),
                        else_of: Vec::new(),
                    });
                }
            }
            Item::Always(block) => {
                let mut guards = Guards::default();
                if let Sensitivity::List(events) = &block.sensitivity {
                    events.iter().for_each(|e| e.expr.identifiers(&mut guards.idents));
                }
                guards.context.push(block.header_span);
                walk(&block.body, signal, &guards, &mut reads, &mut sites);
            }
        }
    }

    let drivers = reads.into_iter().filter(|n| module.is_signal(n)).collect();
    Ok(DriverSet {
        target: signal.to_string(),
        drivers,
        sites,
    })
}

fn walk(stmt: &Stmt, signal: &str, guards: &Guards, reads: &mut BTreeSet<String>, sites: &mut Vec<DriverSite>) {
    match &stmt.kind {
        StmtKind::Block { stmts, .. } => {
            for s in stmts {
                walk(s, signal, guards, reads, sites);
            }
        }
        StmtKind::If {
            cond,
            cond_span,
            then_branch,
            else_branch,
        } => {
            let mut inner = guards.clone();
            cond.identifiers(&mut inner.idents);
            inner.context.push(*cond_span);
            walk(then_branch, signal, &inner, reads, sites);
            if let Some(e) = else_branch {
                let mut other = inner.clone();
                other.else_of.push(inner.context.len() - 1);
                walk(e, signal, &other, reads, sites);
            }
        }
        StmtKind::Case {
            expr, expr_span, arms, ..
        } => {
            let mut inner = guards.clone();
            expr.identifiers(&mut inner.idents);
            inner.context.push(*expr_span);
            for arm in arms {
                let mut arm_guards = inner.clone();
                arm.labels.iter().for_each(|l| l.identifiers(&mut arm_guards.idents));
                arm_guards.context.push(arm.label_span);
                walk(&arm.body, signal, &arm_guards, reads, sites);
            }
        }
        StmtKind::Assign { kind, lhs, rhs } => {
            let mut targets = BTreeSet::new();
            lhs.lvalue_targets(&mut targets);
            if targets.contains(signal) {
                rhs.identifiers(reads);
                lhs.lvalue_index_reads(reads);
                reads.extend(guards.idents.iter().cloned());
                sites.push(DriverSite {
                    span: stmt.span,
                    kind: *kind,
                    context: guards.context.clone(),
                    else_of: guards.else_of.clone(),
                });
            }
        }
        StmtKind::Null => {}
    }
}

/// Signals assigned anywhere inside a statement.
pub(crate) fn stmt_targets(stmt: &Stmt, out: &mut BTreeSet<String>) {
    match &stmt.kind {
        StmtKind::Block { stmts, .. } => stmts.iter().for_each(|s| stmt_targets(s, out)),
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => {
            stmt_targets(then_branch, out);
            if let Some(e) = else_branch {
                stmt_targets(e, out);
            }
        }
        StmtKind::Case { arms, .. } => arms.iter().for_each(|a| stmt_targets(&a.body, out)),
        StmtKind::Assign { lhs, .. } => lhs.lvalue_targets(out),
        StmtKind::Null => {}
    }
}

/// Expand [`direct_drivers`] breadth-first from `roots` for at most `level`
/// hops. Already visited signals are not expanded again.
pub fn backtrace(module: &AstModule, roots: &BTreeSet<String>, level: usize) -> Result<TraceGraph, Diagnostic> {
    if let Some(bad) = roots.iter().find(|r| !module.is_signal(r)) {
        return Err(unknown(bad));
    }
    let mut graph = TraceGraph {
        roots: roots.clone(),
        edges: BTreeSet::new(),
        level_of: roots.iter().map(|r| (r.clone(), 0)).collect(),
        sites: BTreeMap::new(),
    };
    let mut queue: VecDeque<String> = roots.iter().cloned().collect();
    while let Some(signal) = queue.pop_front() {
        let depth = graph.level_of[&signal];
        if depth >= level {
            continue;
        }
        let set = direct_drivers(module, &signal)?;
        for driver in &set.drivers {
            graph.edges.insert(TraceEdge {
                from: signal.clone(),
                to: driver.clone(),
            });
            if !graph.level_of.contains_key(driver) {
                graph.level_of.insert(driver.clone(), depth + 1);
                queue.push_back(driver.clone());
            }
        }
        graph.sites.insert(signal, set.sites);
    }
    Ok(graph)
}
