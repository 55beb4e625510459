//! Waveform tracing: back-trace the drivers of mismatched outputs and show
//! the code that assigns them next to their waveforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::verilog::{backtrace, direct_drivers, AstModule, Diagnostic, DriverSite, Span};
use crate::waveform::{
    tabulate, window_around, WaveDb, WaveError, WaveTable, DEFAULT_CYCLES_AFTER, DEFAULT_CYCLES_BEFORE,
};

/// Most signals a single report will tabulate.
pub const MAX_COLUMNS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRequest {
    pub mismatched_signals: BTreeSet<String>,
    pub level: usize,
    pub mismatch_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Hierarchical scope of the design in the dump, e.g. `tb.dut`. When
    /// absent the scope covering most module signals is used.
    pub scope: Option<String>,
    /// Instance name that settles a tie between equally good scopes, e.g.
    /// a design and a reference model with the same ports.
    pub instance_hint: Option<String>,
    pub cycles_before: usize,
    pub cycles_after: usize,
    pub max_columns: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            scope: None,
            instance_hint: Some("dut".into()),
            cycles_before: DEFAULT_CYCLES_BEFORE,
            cycles_after: DEFAULT_CYCLES_AFTER,
            max_columns: MAX_COLUMNS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRef {
    pub signal: String,
    pub hop: usize,
    pub text: String,
    pub span: Span,
    /// Enclosing `always`/`if`/`case` headers, outermost first.
    pub context: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub request: TraceRequest,
    pub code_refs: Vec<CodeRef>,
    /// Columns hold full dump names.
    pub table: WaveTable,
    /// Module-level names of the table columns, in the same order.
    pub column_signals: Vec<String>,
    /// Traced signals with no waveform in the dump.
    pub not_dumped: Vec<String>,
    pub truncation_note: Option<String>,
    pub clock: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("trace request names no signals")]
    EmptyRequest,
    #[error(transparent)]
    Module(#[from] Diagnostic),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error("mismatched signal '{0}' is not in the waveform dump")]
    RootNotDumped(String),
    #[error("cannot tell which dump scope holds the design: {}", .0.join(", "))]
    AmbiguousScope(Vec<String>),
}

pub fn trace(module: &AstModule, db: &WaveDb, req: &TraceRequest, clock: &str) -> Result<TraceReport, TraceError> {
    trace_with(module, db, req, clock, &TraceOptions::default())
}

pub fn trace_with(
    module: &AstModule,
    db: &WaveDb,
    req: &TraceRequest,
    clock: &str,
    opts: &TraceOptions,
) -> Result<TraceReport, TraceError> {
    if req.mismatched_signals.is_empty() {
        return Err(TraceError::EmptyRequest);
    }
    let graph = backtrace(module, &req.mismatched_signals, req.level)?;

    let mut code_refs = Vec::new();
    for (signal, hop) in graph.signals_by_level() {
        let sites = match graph.sites.get(&signal) {
            Some(s) => s.clone(),
            None => direct_drivers(module, &signal)?.sites,
        };
        for site in sites {
            code_refs.push(code_ref(module, &signal, hop, &site));
        }
    }
    code_refs.sort_by(|a, b| {
        (a.hop, a.span.line, a.span.column, &a.signal).cmp(&(b.hop, b.span.line, b.span.column, &b.signal))
    });

    let scope = match &opts.scope {
        Some(s) => Some(s.clone()),
        None => infer_scope(module, db, opts.instance_hint.as_deref())?,
    };
    let locate = |name: &str| -> Option<String> {
        match &scope {
            Some(s) => {
                let full = format!("{s}.{name}");
                db.signals.contains_key(&full).then_some(full)
            }
            None => db.signals.contains_key(name).then(|| name.to_string()),
        }
    };

    let mut dumped = Vec::new();
    let mut not_dumped = Vec::new();
    for (signal, _) in graph.signals_by_level() {
        match locate(&signal) {
            Some(full) => dumped.push((signal, full)),
            None if graph.roots.contains(&signal) => return Err(TraceError::RootNotDumped(signal)),
            None => not_dumped.push(signal),
        }
    }
    let truncation_note = (dumped.len() > opts.max_columns).then(|| {
        let left_out: Vec<&str> = dumped[opts.max_columns..].iter().map(|(s, _)| s.as_str()).collect();
        format!(
            "{} traced signal(s) left out to stay within {} columns: {}",
            left_out.len(),
            opts.max_columns,
            left_out.join(", ")
        )
    });
    dumped.truncate(opts.max_columns);

    let window = window_around(db, req.mismatch_time, opts.cycles_before, opts.cycles_after, clock)?;
    let full_names: Vec<String> = dumped.iter().map(|(_, f)| f.clone()).collect();
    let table = tabulate(db, &full_names, window)?;

    Ok(TraceReport {
        request: req.clone(),
        code_refs,
        table,
        column_signals: dumped.into_iter().map(|(s, _)| s).collect(),
        not_dumped,
        truncation_note,
        clock: clock.to_string(),
    })
}

fn code_ref(module: &AstModule, signal: &str, hop: usize, site: &DriverSite) -> CodeRef {
    CodeRef {
        signal: signal.to_string(),
        hop,
        text: module.text(site.span).to_string(),
        span: site.span,
        context: site
            .context
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let header = module.text(*s);
                if site.else_of.contains(&i) {
                    format!("else of {header}")
                } else {
                    header.to_string()
                }
            })
            .collect(),
    }
}

/// Scope whose children cover the most module signals. Ties go to the
/// deeper scope, since testbenches often mirror the port names; a tie at
/// the same depth is an error.
fn infer_scope(module: &AstModule, db: &WaveDb, hint: Option<&str>) -> Result<Option<String>, TraceError> {
    let names: BTreeSet<String> = module.signal_names().into_iter().collect();
    let mut hits: BTreeMap<Option<String>, usize> = BTreeMap::new();
    for full in db.signals.keys() {
        let (scope, leaf) = match full.rfind('.') {
            Some(i) if !full[..i].contains('[') => (Some(full[..i].to_string()), &full[i + 1..]),
            _ => (None, full.as_str()),
        };
        if names.contains(leaf) {
            *hits.entry(scope).or_default() += 1;
        }
    }
    let Some(best) = hits.values().copied().max() else {
        return Ok(None);
    };
    let depth = |s: &Option<String>| s.as_ref().map_or(0, |s| s.matches('.').count() + 1);
    let top: Vec<&Option<String>> = hits.iter().filter(|(_, n)| **n == best).map(|(s, _)| s).collect();
    let deepest = top.iter().map(|s| depth(s)).max().unwrap_or(0);
    let mut winners: Vec<&Option<String>> = top.into_iter().filter(|s| depth(s) == deepest).collect();
    if winners.len() > 1 {
        if let Some(h) = hint {
            let leaf = |s: &Option<String>| s.as_deref().map(|s| s.rsplit('.').next().unwrap_or(s) == h);
            winners.retain(|s| leaf(s) == Some(true));
        }
    }
    if winners.len() != 1 {
        return Err(TraceError::AmbiguousScope(
            winners.iter().map(|s| (*s).clone().unwrap_or_default()).collect(),
        ));
    }
    Ok(winners[0].clone())
}

impl TraceReport {
    /// Plain-text report with a `== CODE ==` and a `== WAVEFORM ==` section.
    pub fn render(&self) -> String {
        let mut out = String::from("== CODE ==\n");
        let roots: Vec<&str> = self.request.mismatched_signals.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "traced from {} back {} level(s)",
            roots.join(", "),
            self.request.level
        );
        if self.code_refs.is_empty() {
            out.push_str("(no assignments: the traced signals are module inputs)\n");
        }
        for r in &self.code_refs {
            let lines = if r.span.end_line > r.span.line {
                format!("lines {}-{}", r.span.line, r.span.end_line)
            } else {
                format!("line {}", r.span.line)
            };
            let _ = write!(out, "-- {} (hop {}), {}", r.signal, r.hop, lines);
            if !r.context.is_empty() {
                let ctx: Vec<String> = r
                    .context
                    .iter()
                    .map(|c| match c.strip_prefix("else of ") {
                        Some(h) => format!("else of `{}`", one_line(h)),
                        None => format!("`{}`", one_line(c)),
                    })
                    .collect();
                let _ = write!(out, ", under {}", ctx.join(" > "));
            }
            out.push('\n');
            for l in r.text.lines() {
                let _ = writeln!(out, "  {}", l.trim_end());
            }
        }
        out.push_str("== WAVEFORM ==\n");
        let _ = writeln!(
            out,
            "window {}..{} around mismatch at {} (clock {})",
            self.table.window.0, self.table.window.1, self.request.mismatch_time, self.clock
        );
        out.push_str(&self.table.render_with_headers(&self.column_signals));
        if !self.not_dumped.is_empty() {
            let _ = writeln!(out, "not dumped: {}", self.not_dumped.join(", "));
        }
        if let Some(note) = &self.truncation_note {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
