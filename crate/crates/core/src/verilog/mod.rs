//! Parser for a synthesizable Verilog subset and signal-driver extraction.
//!
//! The subset covers what small benchmark designs use: ANSI and non-ANSI
//! headers, `wire`/`reg`/`logic`/`integer` declarations, parameters,
//! continuous assignments, `always` blocks with edge or `*` sensitivity,
//! `if`/`case`, and the usual operators, selects and literals. Generate
//! blocks, functions, tasks, loops and module instantiation are reported as
//! [`DiagnosticKind::UnsupportedConstruct`].

mod ast;
mod drivers;
mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

pub use ast::*;
pub use drivers::{backtrace, direct_drivers, DriverSet, DriverSite, TraceEdge, TraceGraph};
pub use parser::Fragment;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    SyntaxError,
    UnsupportedConstruct,
    UndeclaredIdentifier,
    DuplicateDeclaration,
    UnknownSignal,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::SyntaxError => "syntax error",
            DiagnosticKind::UnsupportedConstruct => "unsupported construct",
            DiagnosticKind::UndeclaredIdentifier => "undeclared identifier",
            DiagnosticKind::DuplicateDeclaration => "duplicate declaration",
            DiagnosticKind::UnknownSignal => "unknown signal",
        })
    }
}

/// A line-numbered parse or analysis message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("line {line}: {kind}: {message}")]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// 1-based.
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// Parse exactly one module. On failure every diagnostic carries a line.
pub fn parse_module(source: &str) -> Result<AstModule, Vec<Diagnostic>> {
    let module = parser::Parser::new(source)
        .and_then(|mut p| p.parse_module())
        .map_err(|d| vec![d])?;
    let undeclared = check_declarations(&module);
    if undeclared.is_empty() {
        Ok(module)
    } else {
        Err(undeclared)
    }
}

/// Parse a standalone item (`assign ...;`, `always ...`, an initialised
/// declaration) or a procedural statement such as `q <= d;`.
pub fn parse_fragment(source: &str) -> Result<Fragment, Diagnostic> {
    parser::Parser::new(source).and_then(|mut p| p.parse_fragment())
}

/// Render diagnostics one per line, the way compilers do.
pub fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("{d}\n")).collect()
}

fn check_declarations(module: &AstModule) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut check = |idents: BTreeSet<String>, line: u32, column: u32| {
        for name in idents {
            if module.symbol(&name).is_none() {
                diags.push(Diagnostic {
                    kind: DiagnosticKind::UndeclaredIdentifier,
                    line,
                    column,
                    message: format!("'{name}' is not declared"),
                });
            }
        }
    };
    let range_idents = |range: &Option<BitRange>| {
        let mut out = BTreeSet::new();
        if let Some(r) = range {
            r.msb.identifiers(&mut out);
            r.lsb.identifiers(&mut out);
        }
        out
    };
    for port in &module.ports {
        check(range_idents(&port.range), port.span.line, port.span.column);
    }
    for decl in &module.decls {
        let mut ids = range_idents(&decl.range);
        if let Some(init) = &decl.init {
            init.identifiers(&mut ids);
        }
        check(ids, decl.span.line, decl.span.column);
    }
    for item in &module.items {
        match item {
            Item::Assign(a) => {
                let mut ids = BTreeSet::new();
                for asg in &a.assignments {
                    asg.lhs.identifiers(&mut ids);
                    asg.rhs.identifiers(&mut ids);
                }
                check(ids, a.span.line, a.span.column);
            }
            Item::Always(a) => {
                if let Sensitivity::List(events) = &a.sensitivity {
                    let mut ids = BTreeSet::new();
                    events.iter().for_each(|e| e.expr.identifiers(&mut ids));
                    check(ids, a.header_span.line, a.header_span.column);
                }
                let mut stack = vec![&a.body];
                while let Some(stmt) = stack.pop() {
                    let mut ids = BTreeSet::new();
                    match &stmt.kind {
                        StmtKind::Block { stmts, .. } => stack.extend(stmts.iter().rev()),
                        StmtKind::If {
                            cond,
                            then_branch,
                            else_branch,
                            ..
                        } => {
                            cond.identifiers(&mut ids);
                            stack.push(then_branch);
                            if let Some(e) = else_branch {
                                stack.push(e);
                            }
                        }
                        StmtKind::Case { expr, arms, .. } => {
                            expr.identifiers(&mut ids);
                            for arm in arms {
                                arm.labels.iter().for_each(|l| l.identifiers(&mut ids));
                                stack.push(&arm.body);
                            }
                        }
                        StmtKind::Assign { lhs, rhs, .. } => {
                            lhs.identifiers(&mut ids);
                            rhs.identifiers(&mut ids);
                        }
                        StmtKind::Null => {}
                    }
                    check(ids, stmt.span.line, stmt.span.column);
                }
            }
        }
    }
    diags.sort_by_key(|d| (d.line, d.column, d.message.clone()));
    diags.dedup();
    diags
}

#[cfg(test)]
mod tests;
