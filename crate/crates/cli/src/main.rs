use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rtlsmith_agents::{run_problem, PipelineEnv, PlannerMode, ProblemSpec};
use rtlsmith_cli::{load_problems, parse_planner, run_ablation, run_suite, Arm, CliError, Overrides, Settings, Toggle};
use rtlsmith_core::ast_wt::{trace_with, TraceOptions};
use rtlsmith_core::verilog::format_diagnostics;
use rtlsmith_core::{parse_module, parse_vcd, TraceRequest};
use rtlsmith_fixtures::validate_fixtures;
use rtlsmith_sim::Simulator;

#[derive(Parser)]
#[command(
    name = "rtlsmith",
    version,
    about = "Multi-agent Verilog generation with graph retrieval and waveform tracing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem directory.
    Run {
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve every problem under a directory.
    Suite {
        #[arg(long)]
        dir: PathBuf,
        /// Run all four planner × AST-WT arms.
        #[arg(long)]
        ablation: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check golden modules and planted bugs of a fixture corpus.
    ValidateFixtures {
        #[arg(long, default_value = "fixtures/problems")]
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout_sim: Option<f64>,
    },
    /// Print the AST-WT report for a module and a waveform dump.
    Trace {
        #[arg(long)]
        module: PathBuf,
        #[arg(long)]
        vcd: PathBuf,
        /// Mismatched output; repeat for several.
        #[arg(long = "signal", required = true)]
        signals: Vec<String>,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long)]
        time: u64,
        #[arg(long, default_value = "clk")]
        clock: String,
        /// Dump scope of the design, e.g. tb.dut.
        #[arg(long)]
        scope: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_parser = parse_planner)]
    planner: Option<PlannerMode>,
    #[arg(long, value_enum)]
    ast_wt: Option<Toggle>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Seconds per compile or simulation step.
    #[arg(long)]
    timeout_sim: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scripted transcript used instead of a live model.
    #[arg(long)]
    scripted: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

impl Common {
    fn settings(self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        s.apply(Overrides {
            backend_url: self.backend_url,
            model: self.model,
            planner: self.planner,
            ast_wt: self.ast_wt,
            jobs: self.jobs,
            timeout_sim: self.timeout_sim,
            out: self.out,
            scripted: self.scripted,
            verbose: self.verbose,
        });
        s.validate()?;
        Ok(s)
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn run(problem: &Path, common: Common) -> Result<ExitCode, CliError> {
    let settings = common.settings()?;
    init_logging(settings.verbose);
    let spec = ProblemSpec::load(problem)?;
    let sim = Simulator::discover(&settings.sim_config())?;
    let backends = settings.backends()?;
    let backend = backends.for_problem(problem)?;
    let env = PipelineEnv {
        backend: backend.as_ref(),
        sim: &sim,
        rules: &settings.rules,
        config: &settings.agents,
        options: settings.pipeline_options(),
    };
    let result = run_problem(&spec, &env, &settings.out)?;
    println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
    Ok(if result.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn suite(dir: &Path, ablation: bool, common: Common) -> Result<ExitCode, CliError> {
    let settings = common.settings()?;
    init_logging(settings.verbose);
    let problems = load_problems(dir)?;
    let sim = Simulator::discover(&settings.sim_config())?;
    let backends = settings.backends()?;
    if ablation {
        let report = run_ablation(&problems, &settings, &backends, &sim, &settings.out)?;
        for arm in &report.arms {
            println!("{}", arm.render());
        }
        print!("{}", report.render());
    } else {
        let arm = Arm {
            planner: settings.planner,
            ast_wt: settings.ast_wt.is_on(),
        };
        let report = run_suite(&problems, &settings, &backends, &sim, arm, &settings.out)?;
        print!("{}", report.render());
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(dir: &Path, out: Option<PathBuf>, timeout: Option<f64>) -> Result<ExitCode, CliError> {
    init_logging(false);
    let mut config = rtlsmith_sim::SimConfig::default();
    if let Some(t) = timeout {
        config.timeout_secs = t;
    }
    let sim = Simulator::discover(&config)?;
    let scratch;
    let work = match out {
        Some(p) => p,
        None => {
            scratch = std::env::temp_dir().join(format!("rtlsmith-validate-{}", std::process::id()));
            scratch.clone()
        }
    };
    let checks = validate_fixtures(dir, &sim, &Default::default(), &work)?;
    let mut bad = 0;
    for c in &checks {
        let status = if c.ok() { "ok" } else { "VIOLATION" };
        println!("{:<16} {status}", c.id);
        for p in c.problems.iter().chain(c.bugs.iter().flat_map(|b| b.problems.iter())) {
            println!("  {p}");
        }
        bad += usize::from(!c.ok());
    }
    println!("{} fixture(s), {bad} with violations", checks.len());
    Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn trace(
    module: &Path,
    vcd: &Path,
    signals: Vec<String>,
    level: usize,
    time: u64,
    clock: &str,
    scope: Option<String>,
) -> Result<ExitCode, CliError> {
    let source = String::from_utf8_lossy(&read(module)?).into_owned();
    let module = parse_module(&source).map_err(|d| CliError::Config(format_diagnostics(&d)))?;
    let db = parse_vcd(&read(vcd)?).map_err(|e| CliError::Config(e.to_string()))?;
    let request = TraceRequest {
        mismatched_signals: signals.into_iter().collect(),
        level,
        mismatch_time: time,
    };
    let opts = TraceOptions {
        scope,
        ..TraceOptions::default()
    };
    let report = trace_with(&module, &db, &request, clock, &opts).map_err(|e| CliError::Config(e.to_string()))?;
    print!("{}", report.render());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { problem, common } => run(&problem, common),
        Command::Suite { dir, ablation, common } => suite(&dir, ablation, common),
        Command::ValidateFixtures { dir, out, timeout_sim } => validate(&dir, out, timeout_sim),
        Command::Trace {
            module,
            vcd,
            signals,
            level,
            time,
            clock,
            scope,
        } => trace(&module, &vcd, signals, level, time, &clock, scope),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
