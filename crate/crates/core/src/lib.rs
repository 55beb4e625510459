//! Deterministic building blocks of the Verilog completion pipeline.
//!
//! Everything in this crate is pure: parsing Verilog into an AST and
//! back-tracing signal drivers, decoding VCD dumps into tabular waveforms,
//! fusing both into waveform-tracing reports, building and querying the
//! task/circuit relation graph, and scheduling sub-task DAGs.

pub mod ast_wt;
pub mod task_graph;
pub mod tcrg;
pub mod verilog;
pub mod waveform;

pub use ast_wt::{trace, CodeRef, TraceError, TraceReport, TraceRequest};
pub use task_graph::{build_dag, parse_plan, DagError, PlanError, SubTask, TaskDag, TaskKind, TaskPlan, TaskStatus};
pub use tcrg::{build_graph, khop, ExtractionDoc, RetrievalResult, Tcrg, TcrgError};
pub use verilog::{
    backtrace, direct_drivers, parse_module, AstModule, Diagnostic, DiagnosticKind, DriverSet, Span, TraceGraph,
};
pub use waveform::{parse_vcd, tabulate, window_around, WaveDb, WaveError, WaveTable};
