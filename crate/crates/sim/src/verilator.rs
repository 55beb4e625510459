use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;

use crate::process::run_logged;
use crate::{
    CompileDiagnostic, CompileReport, Severity, SimConfig, SimError, DUT_FILE, SIM_BINARY, STDOUT_FILE, TB_FILE,
};

/// Runtime sources linked into every simulation binary.
const RUNTIME: &[&str] = &["verilated", "verilated_vcd_c", "verilated_timing", "verilated_threads"];
const PCH: &str = "vlpch.h";
const READY: &str = "READY";
const KIT_TIMEOUT: Duration = Duration::from_secs(900);

/// Verilator drives a C++ toolchain: the design is translated to C++,
/// compiled against a precompiled runtime "kit" kept in a cache directory,
/// and linked into `sim.out`.
#[derive(Debug, Clone)]
pub(crate) struct Verilator {
    exe: PathBuf,
    root: PathBuf,
    cxx: PathBuf,
}

fn probe_python_package() -> Option<PathBuf> {
    let out = Command::new("python3")
        .args(["-c", "import os, verilator; print(os.path.dirname(verilator.__file__))"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| PathBuf::from(String::from_utf8_lossy(&out.stdout).trim()))
}

fn root_from_exe(exe: &Path) -> Option<PathBuf> {
    let out = Command::new(exe).args(["--getenv", "VERILATOR_ROOT"]).output().ok()?;
    let text = String::from_utf8_lossy(&out.stdout).trim().to_string();
    (out.status.success() && !text.is_empty()).then(|| PathBuf::from(text))
}

fn is_root(p: &Path) -> bool {
    p.join("include").join("verilated.cpp").is_file() && p.join("bin").join("verilator").is_file()
}

impl Verilator {
    /// Search order: configured root or binary, `verilator` on PATH,
    /// `$VERILATOR_ROOT`, then the Python `verilator` package.
    pub(crate) fn locate(config: &SimConfig) -> Result<Self, SimError> {
        let mut root = config.verilator_root.clone();
        if root.is_none() {
            if let Some(bin) = &config.binary {
                root = bin
                    .parent()
                    .and_then(Path::parent)
                    .map(Path::to_path_buf)
                    .filter(|r| is_root(r));
                if root.is_none() {
                    root = root_from_exe(bin);
                }
            }
        }
        if root.is_none() {
            if let Ok(exe) = which::which("verilator") {
                root = root_from_exe(&exe);
            }
        }
        if root.is_none() {
            root = std::env::var_os("VERILATOR_ROOT").map(PathBuf::from);
        }
        if root.is_none() {
            root = probe_python_package();
        }
        let root = root
            .filter(|r| is_root(r))
            .ok_or_else(|| SimError::ToolUnavailable("verilator installation not found".into()))?;
        let cxx = std::env::var_os("CXX")
            .map(PathBuf::from)
            .or_else(|| which::which("c++").ok())
            .or_else(|| which::which("g++").ok())
            .ok_or_else(|| SimError::ToolUnavailable("no C++ compiler for verilator".into()))?;
        Ok(Verilator {
            exe: root.join("bin").join("verilator"),
            root,
            cxx,
        })
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new(&self.exe);
        cmd.env("VERILATOR_ROOT", &self.root);
        cmd
    }

    fn include(&self) -> PathBuf {
        self.root.join("include")
    }

    /// Flags shared by the kit, the precompiled header and every model.
    fn cxx_flags(&self, opt: &str) -> Vec<String> {
        let inc = self.include();
        let mut flags = vec![
            opt.to_string(),
            "--std=c++20".into(),
            format!("-I{}", inc.display()),
            format!("-I{}", inc.join("vltstd").display()),
        ];
        flags.extend(
            [
                "VERILATOR=1",
                "VM_COVERAGE=0",
                "VM_SC=0",
                "VM_TIMING=1",
                "VM_TRACE=1",
                "VM_TRACE_FST=0",
                "VM_TRACE_VCD=1",
                "VM_TRACE_SAIF=0",
                "VL_TIME_CONTEXT",
            ]
            .iter()
            .map(|d| format!("-D{d}")),
        );
        flags
    }

    fn kit_dir(&self, config: &SimConfig) -> PathBuf {
        if let Some(d) = &config.kit_dir {
            return d.clone();
        }
        if let Some(d) = std::env::var_os("RTLSMITH_KIT_DIR") {
            return PathBuf::from(d);
        }
        let mut h = DefaultHasher::new();
        self.root.hash(&mut h);
        self.cxx.hash(&mut h);
        self.cxx_flags("-O0").hash(&mut h);
        std::env::temp_dir().join(format!("rtlsmith-vkit-{:016x}", h.finish()))
    }

    /// Build the runtime objects and precompiled header once per cache dir.
    fn ensure_kit(&self, config: &SimConfig) -> Result<PathBuf, SimError> {
        static LOCK: Mutex<()> = Mutex::new(());
        let dir = self.kit_dir(config);
        if dir.join(READY).is_file() {
            return Ok(dir);
        }
        let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
        if dir.join(READY).is_file() {
            return Ok(dir);
        }
        let parent = dir.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(parent).map_err(|e| SimError::workdir(parent, e))?;
        let tmp = parent.join(format!(
            ".{}.tmp{}",
            dir.file_name().and_then(|n| n.to_str()).unwrap_or("kit"),
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&tmp);
        std::fs::create_dir_all(&tmp).map_err(|e| SimError::workdir(&tmp, e))?;
        log::info!("building verilator runtime kit in {}", dir.display());

        let header: String = ["verilated.h", "verilated_vcd_c.h", "verilated_timing.h"]
            .iter()
            .map(|h| format!("#include \"{h}\"\n"))
            .collect();
        std::fs::write(tmp.join(PCH), header).map_err(|e| SimError::workdir(&tmp, e))?;
        let mut pch = Command::new(&self.cxx);
        pch.args(self.cxx_flags("-O0"))
            .args(["-x", "c++-header", PCH, "-o"])
            .arg(format!("{PCH}.gch"));
        self.kit_step(pch, &tmp, "pch")?;
        for unit in RUNTIME {
            let mut cc = Command::new(&self.cxx);
            cc.args(self.cxx_flags("-O2"))
                .arg("-c")
                .arg(self.include().join(format!("{unit}.cpp")))
                .arg("-o")
                .arg(format!("{unit}.o"));
            self.kit_step(cc, &tmp, unit)?;
        }
        std::fs::write(tmp.join(READY), "").map_err(|e| SimError::workdir(&tmp, e))?;
        if std::fs::rename(&tmp, &dir).is_err() {
            // another process finished first
            let _ = std::fs::remove_dir_all(&tmp);
            if !dir.join(READY).is_file() {
                return Err(SimError::ToolUnavailable(format!(
                    "cannot install verilator kit into {}",
                    dir.display()
                )));
            }
        }
        Ok(dir)
    }

    fn kit_step(&self, cmd: Command, dir: &Path, what: &str) -> Result<(), SimError> {
        let done = run_logged(cmd, dir, &dir.join(format!("{what}.log")), KIT_TIMEOUT, "kit build")?;
        if !done.success {
            return Err(SimError::ToolUnavailable(format!(
                "building verilator runtime ({what}) failed:\n{}",
                done.output
            )));
        }
        Ok(())
    }

    pub(crate) fn check_syntax(&self, workdir: &Path, config: &SimConfig) -> Result<CompileReport, SimError> {
        let mut cmd = self.command();
        cmd.args(["--lint-only", "-Wno-fatal", "-Wno-lint", "-Wno-style"])
            .args(&config.extra_flags)
            .arg(DUT_FILE);
        let done = run_logged(
            cmd,
            workdir,
            &workdir.join("compile.log"),
            config.timeout(),
            "syntax check",
        )?;
        Ok(CompileReport::new(
            done.success,
            parse_diagnostics(&done.output),
            done.output,
        ))
    }

    pub(crate) fn build(&self, workdir: &Path, config: &SimConfig) -> Result<CompileReport, SimError> {
        let obj = workdir.join("obj");
        let _ = std::fs::remove_dir_all(&obj);
        let mut cmd = self.command();
        cmd.args([
            "--cc",
            "--exe",
            "--main",
            "--timing",
            "--trace",
            "-Wno-fatal",
            "-Wno-lint",
            "-Wno-style",
        ])
        .args(["--top-module", &config.top, "--Mdir", "obj", "-o", SIM_BINARY])
        .args(&config.extra_flags)
        .args([DUT_FILE, TB_FILE]);
        let done = run_logged(cmd, workdir, &workdir.join("compile.log"), config.timeout(), "compile")?;
        let report = CompileReport::new(done.success, parse_diagnostics(&done.output), done.output);
        if !report.ok {
            return Ok(report);
        }

        let kit = self.ensure_kit(config)?;
        let mut units: Vec<String> = std::fs::read_dir(&obj)
            .map_err(|e| SimError::workdir(&obj, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".cpp"))
            .collect();
        units.sort();
        let mut all = String::from("#define VL_INCLUDE_OPT include\n");
        for u in &units {
            all.push_str(&format!("#include \"{u}\"\n"));
        }
        let all_path = obj.join("model_all.cpp");
        std::fs::write(&all_path, all).map_err(|e| SimError::workdir(&all_path, e))?;

        let mut cc = Command::new(&self.cxx);
        cc.args(self.cxx_flags("-O0"))
            .arg("-I.")
            .arg("-include")
            .arg(kit.join(PCH))
            .args(["-c", "model_all.cpp", "-o", "model_all.o"]);
        let compiled = run_logged(cc, &obj, &workdir.join("cxx.log"), config.timeout(), "C++ compile")?;
        if !compiled.success {
            return Ok(cxx_failure(report, compiled.output));
        }
        let mut link = Command::new(&self.cxx);
        link.args(RUNTIME.iter().map(|u| kit.join(format!("{u}.o"))))
            .arg("model_all.o")
            .arg("-pthread")
            .arg("-o")
            .arg(workdir.join(SIM_BINARY));
        let linked = run_logged(link, &obj, &workdir.join("link.log"), config.timeout(), "link")?;
        if !linked.success {
            return Ok(cxx_failure(report, linked.output));
        }
        Ok(report)
    }

    pub(crate) fn run(&self, workdir: &Path, config: &SimConfig) -> Result<String, SimError> {
        let cmd = Command::new(workdir.join(SIM_BINARY));
        Ok(run_logged(cmd, workdir, &workdir.join(STDOUT_FILE), config.timeout(), "simulation")?.output)
    }
}

fn cxx_failure(mut report: CompileReport, output: String) -> CompileReport {
    report.ok = false;
    report.diagnostics.push(CompileDiagnostic {
        file: String::new(),
        line: 0,
        severity: Severity::Error,
        message: "generated C++ failed to build".into(),
    });
    report.raw_output.push_str(&output);
    report
}

/// `%Error: dut.v:2:3: message` and `%Warning-CODE: dut.v:2:3: message`.
fn parse_diagnostics(output: &str) -> Vec<CompileDiagnostic> {
    static RE: OnceLock<Regex> = OnceLock::new();
    static BARE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"^%(Error|Warning)(?:-[A-Za-z0-9_]+)?:\s*([^:\s]+):(\d+):(?:\d+:)?\s*(.*)$").expect("valid")
    });
    let bare = BARE.get_or_init(|| Regex::new(r"^%Error(?:-[A-Za-z0-9_]+)?:\s*(.*)$").expect("valid"));
    output
        .lines()
        .filter_map(|l| {
            let l = l.trim_end();
            if let Some(c) = re.captures(l) {
                return Some(CompileDiagnostic {
                    file: c[2].to_string(),
                    line: c[3].parse().unwrap_or(0),
                    severity: if &c[1] == "Error" {
                        Severity::Error
                    } else {
                        Severity::Warning
                    },
                    message: c[4].trim().to_string(),
                });
            }
            let c = bare.captures(l)?;
            (!c[1].starts_with("Exiting due to")).then(|| CompileDiagnostic {
                file: String::new(),
                line: 0,
                severity: Severity::Error,
                message: c[1].trim().to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verilator_messages() {
        let out = "%Error: dut.v:2:3: syntax error, unexpected assign\n%Warning-WIDTH: dut.v:5:9: Operator ASSIGN expects 4 bits\n%Error: Cannot find file containing module: 'foo'\n%Error: Exiting due to 2 error(s)\n";
        let d = parse_diagnostics(out);
        assert_eq!(d.len(), 3);
        assert_eq!(
            (d[0].file.as_str(), d[0].line, d[0].severity),
            ("dut.v", 2, Severity::Error)
        );
        assert_eq!(d[0].message, "syntax error, unexpected assign");
        assert_eq!(d[1].severity, Severity::Warning);
        assert_eq!(d[2].line, 0);
    }
}
