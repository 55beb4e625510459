use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use regex::Regex;

use crate::process::run_logged;
use crate::{
    CompileDiagnostic, CompileReport, Severity, SimConfig, SimError, DUT_FILE, SIM_BINARY, STDOUT_FILE, TB_FILE,
};

#[derive(Debug, Clone)]
pub(crate) struct Icarus {
    iverilog: PathBuf,
    vvp: PathBuf,
}

impl Icarus {
    pub(crate) fn locate(config: &SimConfig) -> Result<Self, SimError> {
        let iverilog = match &config.binary {
            Some(p) if p.is_file() => p.clone(),
            Some(p) => return Err(SimError::ToolUnavailable(format!("{} does not exist", p.display()))),
            None => which::which("iverilog").map_err(|_| SimError::ToolUnavailable("iverilog not on PATH".into()))?,
        };
        let sibling = iverilog.with_file_name("vvp");
        let vvp = if sibling.is_file() {
            sibling
        } else {
            which::which("vvp")
                .map_err(|_| SimError::ToolUnavailable("vvp not found next to iverilog or on PATH".into()))?
        };
        Ok(Icarus { iverilog, vvp })
    }

    fn compile(
        &self,
        workdir: &Path,
        config: &SimConfig,
        files: &[&str],
        target: &[&str],
    ) -> Result<CompileReport, SimError> {
        let mut cmd = Command::new(&self.iverilog);
        cmd.arg("-g2012").args(target).args(&config.extra_flags).args(files);
        let done = run_logged(cmd, workdir, &workdir.join("compile.log"), config.timeout(), "compile")?;
        Ok(CompileReport::new(
            done.success,
            parse_diagnostics(&done.output),
            done.output,
        ))
    }

    pub(crate) fn check_syntax(&self, workdir: &Path, config: &SimConfig) -> Result<CompileReport, SimError> {
        self.compile(workdir, config, &[DUT_FILE], &["-t", "null"])
    }

    pub(crate) fn build(&self, workdir: &Path, config: &SimConfig) -> Result<CompileReport, SimError> {
        self.compile(
            workdir,
            config,
            &[DUT_FILE, TB_FILE],
            &["-s", &config.top, "-o", SIM_BINARY],
        )
    }

    pub(crate) fn run(&self, workdir: &Path, config: &SimConfig) -> Result<String, SimError> {
        let mut cmd = Command::new(&self.vvp);
        cmd.arg("-n").arg(SIM_BINARY);
        Ok(run_logged(cmd, workdir, &workdir.join(STDOUT_FILE), config.timeout(), "simulation")?.output)
    }
}

/// `file:line: [error:|warning:] message`
fn parse_diagnostics(output: &str) -> Vec<CompileDiagnostic> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re =
        RE.get_or_init(|| Regex::new(r"^([^:\s]+\.s?v):(\d+):\s*(?:(error|warning|sorry):\s*)?(.*)$").expect("valid"));
    output
        .lines()
        .filter_map(|l| {
            let c = re.captures(l.trim_end())?;
            let severity = match c.get(3).map(|m| m.as_str()) {
                Some("warning") => Severity::Warning,
                _ => Severity::Error,
            };
            Some(CompileDiagnostic {
                file: c[1].to_string(),
                line: c[2].parse().unwrap_or(0),
                severity,
                message: c[4].trim().to_string(),
            })
        })
        .collect()
}
