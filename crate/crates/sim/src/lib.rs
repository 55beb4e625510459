//! Syntax checking and simulation through an external Verilog simulator.
//!
//! Two simulators are supported: Icarus Verilog (`iverilog` + `vvp`) and
//! Verilator. Every call works inside a caller-owned directory laid out as
//! `dut.v`, `tb.v`, `sim.out`, `wave.vcd` and `stdout.log`.

mod icarus;
mod process;
mod rules;
mod verilator;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use rules::{CompiledRules, MismatchRules};

pub const DUT_FILE: &str = "dut.v";
pub const TB_FILE: &str = "tb.v";
pub const SIM_BINARY: &str = "sim.out";
pub const VCD_FILE: &str = "wave.vcd";
pub const STDOUT_FILE: &str = "stdout.log";

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("simulator unavailable: {0}")]
    ToolUnavailable(String),
    #[error("work directory {path}: {source}")]
    Workdir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage} timed out after {seconds:.1} s")]
    Timeout { stage: String, seconds: f64 },
    #[error("bad mismatch rule: {0}")]
    Rules(String),
}

impl SimError {
    pub(crate) fn workdir(path: &Path, source: std::io::Error) -> Self {
        SimError::Workdir {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Fatal errors abort a run; the rest are reported to the agent.
    pub fn is_fatal(&self) -> bool {
        matches!(self, SimError::ToolUnavailable(_) | SimError::Rules(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulatorKind {
    Icarus,
    Verilator,
}

impl fmt::Display for SimulatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimulatorKind::Icarus => "icarus",
            SimulatorKind::Verilator => "verilator",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Preferred simulator; discovered when absent.
    pub kind: Option<SimulatorKind>,
    /// `iverilog` or `verilator` executable.
    pub binary: Option<PathBuf>,
    /// Verilator installation root (holds `bin/` and `include/`).
    pub verilator_root: Option<PathBuf>,
    /// Where the prebuilt Verilator runtime objects are kept.
    pub kit_dir: Option<PathBuf>,
    pub extra_flags: Vec<String>,
    pub timeout_secs: f64,
    /// Name of the testbench top module.
    pub top: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            kind: None,
            binary: None,
            verilator_root: None,
            kit_dir: None,
            extra_flags: Vec::new(),
            timeout_secs: 30.0,
            top: "tb".into(),
        }
    }
}

impl SimConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileDiagnostic {
    pub file: String,
    /// 0 when the compiler gave no line.
    pub line: u32,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for CompileDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if self.line > 0 {
            write!(f, "{}:{}: {sev}: {}", self.file, self.line, self.message)
        } else {
            write!(f, "{sev}: {}", self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReport {
    pub ok: bool,
    pub diagnostics: Vec<CompileDiagnostic>,
    pub raw_output: String,
}

impl CompileReport {
    pub(crate) fn new(exit_ok: bool, diagnostics: Vec<CompileDiagnostic>, raw_output: String) -> Self {
        let mut diagnostics = diagnostics;
        let has_error = diagnostics.iter().any(|d| d.severity == Severity::Error);
        if !exit_ok && !has_error {
            diagnostics.push(CompileDiagnostic {
                file: String::new(),
                line: 0,
                severity: Severity::Error,
                message: "compiler exited with failure".into(),
            });
        }
        CompileReport {
            ok: exit_ok && !has_error,
            diagnostics,
            raw_output,
        }
    }

    pub fn errors(&self) -> impl Iterator<Item = &CompileDiagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    /// One diagnostic per line, errors first.
    pub fn summary(&self) -> String {
        if self.ok && self.diagnostics.is_empty() {
            return "no syntax errors".into();
        }
        let mut lines: Vec<String> = self.errors().map(|d| d.to_string()).collect();
        lines.extend(
            self.diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Warning)
                .map(|d| d.to_string()),
        );
        lines.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalMismatch {
    pub signal: String,
    pub count: u64,
    pub first_time: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub compiled: bool,
    pub diagnostics: Vec<CompileDiagnostic>,
    pub mismatch_count: Option<u64>,
    pub total_samples: Option<u64>,
    pub first_mismatch_time: Option<u64>,
    /// Outputs the testbench reported (or the dump showed) as mismatching.
    pub mismatched_signals: Vec<SignalMismatch>,
    pub vcd_path: Option<PathBuf>,
    pub raw_stdout: String,
}

impl SimReport {
    pub(crate) fn compile_failure(diagnostics: Vec<CompileDiagnostic>, raw: String) -> Self {
        SimReport {
            compiled: false,
            diagnostics,
            mismatch_count: None,
            total_samples: None,
            first_mismatch_time: None,
            mismatched_signals: Vec::new(),
            vcd_path: None,
            raw_stdout: raw,
        }
    }

    pub fn passed(&self) -> bool {
        self.compiled && self.mismatch_count == Some(0)
    }

    /// Short text for an agent observation.
    pub fn summary(&self) -> String {
        if !self.compiled {
            let diags: Vec<String> = self
                .diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .map(|d| d.to_string())
                .collect();
            return format!("compilation failed:\n{}", diags.join("\n"));
        }
        match (self.mismatch_count, self.total_samples) {
            (Some(0), Some(n)) => format!("simulation passed: 0 mismatches in {n} samples"),
            (Some(m), total) => {
                let mut s = format!(
                    "simulation failed: {m} mismatches in {} samples",
                    total.map_or("?".into(), |t| t.to_string())
                );
                if let Some(t) = self.first_mismatch_time {
                    s.push_str(&format!("; first mismatch at time {t}"));
                }
                for sm in &self.mismatched_signals {
                    s.push_str(&format!("\n- output '{}': {} mismatches", sm.signal, sm.count));
                    if let Some(t) = sm.first_time {
                        s.push_str(&format!(", first at time {t}"));
                    }
                }
                s
            }
            (None, _) => format!(
                "simulation ended without a mismatch summary; output:\n{}",
                tail(&self.raw_stdout, 20)
            ),
        }
    }
}

fn tail(text: &str, n: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

#[derive(Debug, Clone)]
enum Backend {
    Icarus(icarus::Icarus),
    Verilator(verilator::Verilator),
}

/// A located simulator ready to run.
#[derive(Debug, Clone)]
pub struct Simulator {
    backend: Backend,
    config: SimConfig,
}

impl Simulator {
    /// Locate a simulator. With no explicit kind, Icarus on the search path
    /// is preferred, then Verilator.
    pub fn discover(config: &SimConfig) -> Result<Simulator, SimError> {
        let backend = match config.kind {
            Some(SimulatorKind::Icarus) => Backend::Icarus(icarus::Icarus::locate(config)?),
            Some(SimulatorKind::Verilator) => Backend::Verilator(verilator::Verilator::locate(config)?),
            None => match icarus::Icarus::locate(config) {
                Ok(i) => Backend::Icarus(i),
                Err(icarus_err) => match verilator::Verilator::locate(config) {
                    Ok(v) => Backend::Verilator(v),
                    Err(v_err) => {
                        return Err(SimError::ToolUnavailable(format!(
                            "no Verilog simulator found ({icarus_err}; {v_err})"
                        )))
                    }
                },
            },
        };
        Ok(Simulator {
            backend,
            config: config.clone(),
        })
    }

    pub fn kind(&self) -> SimulatorKind {
        match self.backend {
            Backend::Icarus(_) => SimulatorKind::Icarus,
            Backend::Verilator(_) => SimulatorKind::Verilator,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Compile the design alone and report diagnostics.
    pub fn check_syntax(&self, dut_source: &str, workdir: &Path) -> Result<CompileReport, SimError> {
        prepare(workdir)?;
        write(workdir, DUT_FILE, dut_source)?;
        match &self.backend {
            Backend::Icarus(i) => i.check_syntax(workdir, &self.config),
            Backend::Verilator(v) => v.check_syntax(workdir, &self.config),
        }
    }

    /// Compile design plus testbench, run it, and read the mismatch summary.
    pub fn simulate(
        &self,
        dut_source: &str,
        testbench_source: &str,
        workdir: &Path,
        rules: &MismatchRules,
    ) -> Result<SimReport, SimError> {
        let rules = rules.compile()?;
        prepare(workdir)?;
        for stale in [SIM_BINARY, VCD_FILE, STDOUT_FILE] {
            let _ = std::fs::remove_file(workdir.join(stale));
        }
        write(workdir, DUT_FILE, dut_source)?;
        write(workdir, TB_FILE, testbench_source)?;
        let built = match &self.backend {
            Backend::Icarus(i) => i.build(workdir, &self.config)?,
            Backend::Verilator(v) => v.build(workdir, &self.config)?,
        };
        if !built.ok {
            return Ok(SimReport::compile_failure(built.diagnostics, built.raw_output));
        }
        let stdout = match &self.backend {
            Backend::Icarus(i) => i.run(workdir, &self.config)?,
            Backend::Verilator(v) => v.run(workdir, &self.config)?,
        };
        let vcd = workdir.join(VCD_FILE);
        let vcd_path = vcd.exists().then_some(vcd);
        Ok(rules.apply(stdout, built.diagnostics, vcd_path))
    }
}

fn prepare(workdir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(workdir).map_err(|e| SimError::workdir(workdir, e))
}

fn write(workdir: &Path, name: &str, text: &str) -> Result<(), SimError> {
    let path = workdir.join(name);
    std::fs::write(&path, text).map_err(|e| SimError::workdir(&path, e))
}
