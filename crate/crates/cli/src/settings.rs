use std::path::{Path, PathBuf};
use std::sync::Arc;

use rtlsmith_agents::{AgentConfig, PipelineOptions, PlannerMode};
use rtlsmith_llm::{BackendConfig, ChatBackend, HttpBackend, ScriptedBackend};
use rtlsmith_sim::{MismatchRules, SimConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    #[default]
    On,
    Off,
}

impl Toggle {
    pub fn is_on(self) -> bool {
        self == Toggle::On
    }
}

impl From<bool> for Toggle {
    fn from(on: bool) -> Self {
        if on {
            Toggle::On
        } else {
            Toggle::Off
        }
    }
}

/// Run configuration. The config file uses the flag names as keys; the
/// nested sections tune what the flags do not cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub planner: PlannerMode,
    pub ast_wt: Toggle,
    pub jobs: usize,
    pub timeout_sim: Option<f64>,
    pub out: PathBuf,
    pub scripted: Option<PathBuf>,
    pub verbose: bool,
    pub backend: BackendConfig,
    pub sim: SimConfig,
    pub agents: AgentConfig,
    pub rules: MismatchRules,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            backend_url: None,
            model: None,
            planner: PlannerMode::Tcrg,
            ast_wt: Toggle::On,
            jobs: 1,
            timeout_sim: None,
            out: PathBuf::from("out"),
            scripted: None,
            verbose: false,
            backend: BackendConfig::default(),
            sim: SimConfig::default(),
            agents: AgentConfig::default(),
            rules: MismatchRules::default(),
        }
    }
}

/// Flag values; `None` leaves the file setting alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub planner: Option<PlannerMode>,
    pub ast_wt: Option<Toggle>,
    pub jobs: Option<usize>,
    pub timeout_sim: Option<f64>,
    pub out: Option<PathBuf>,
    pub scripted: Option<PathBuf>,
    pub verbose: bool,
}

/// `simple` or `tcrg`.
pub fn parse_planner(text: &str) -> Result<PlannerMode, String> {
    match text {
        "simple" => Ok(PlannerMode::Simple),
        "tcrg" => Ok(PlannerMode::Tcrg),
        other => Err(format!("expected simple or tcrg, got '{other}'")),
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(planner, ast_wt, jobs, out);
        if o.backend_url.is_some() {
            self.backend_url = o.backend_url;
        }
        if o.model.is_some() {
            self.model = o.model;
        }
        if o.timeout_sim.is_some() {
            self.timeout_sim = o.timeout_sim;
        }
        if o.scripted.is_some() {
            self.scripted = o.scripted;
        }
        self.verbose |= o.verbose;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if let Some(t) = self.timeout_sim {
            if t.is_nan() || t <= 0.0 {
                return Err(CliError::Config("timeout-sim must be positive".into()));
            }
        }
        if self.scripted.is_none() && self.backend_url.is_none() {
            return Err(CliError::Config("no backend: give --backend-url or --scripted".into()));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut c = self.sim.clone();
        if let Some(t) = self.timeout_sim {
            c.timeout_secs = t;
        }
        c
    }

    pub fn backend_config(&self) -> BackendConfig {
        let mut c = self.backend.clone();
        if let Some(u) = &self.backend_url {
            c.endpoint = u.clone();
        }
        if let Some(m) = &self.model {
            c.model = m.clone();
        }
        c
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            planner: self.planner,
            ast_wt: self.ast_wt.is_on(),
            verbose: self.verbose,
        }
    }

    pub fn backends(&self) -> Result<Backends, CliError> {
        match &self.scripted {
            Some(p) => Ok(Backends::Scripted(p.clone())),
            None => {
                let http = HttpBackend::new(self.backend_config())?.with_exchanges(self.verbose);
                Ok(Backends::Http(Arc::new(http)))
            }
        }
    }
}

/// Where each problem's chat backend comes from.
#[derive(Clone)]
pub enum Backends {
    /// A fresh scripted backend per problem. A relative path naming no file
    /// in the working directory is looked up in the problem directory.
    Scripted(PathBuf),
    Http(Arc<HttpBackend>),
}

impl Backends {
    pub fn script_for(path: &Path, problem_dir: &Path) -> PathBuf {
        if path.is_absolute() || path.is_file() {
            path.to_path_buf()
        } else {
            problem_dir.join(path)
        }
    }

    pub fn for_problem(&self, problem_dir: &Path) -> Result<Arc<dyn ChatBackend>, CliError> {
        match self {
            Backends::Scripted(p) => {
                let path = Self::script_for(p, problem_dir);
                Ok(Arc::new(ScriptedBackend::from_file(&path)?))
            }
            Backends::Http(h) => Ok(h.clone()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Backends::Scripted(p) => format!("scripted ({})", p.display()),
            Backends::Http(h) => h.describe(),
        }
    }
}
