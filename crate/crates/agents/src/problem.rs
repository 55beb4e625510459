use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::AgentError;

pub const SPEC_FILE: &str = "spec.txt";
pub const TESTBENCH_FILE: &str = "tb.v";
pub const REFERENCE_FILE: &str = "ref.v";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "Application-Descr")]
    ApplicationDescr,
    #[serde(rename = "CombSeqFSM-Descr")]
    CombSeqFsmDescr,
    #[serde(rename = "CombSeqFSM-Waveform")]
    CombSeqFsmWaveform,
    #[serde(rename = "Comb-Kmap")]
    CombKmap,
    #[serde(rename = "FSM-TransTable")]
    FsmTransTable,
    #[default]
    #[serde(rename = "other")]
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::ApplicationDescr,
        Category::CombSeqFsmDescr,
        Category::CombSeqFsmWaveform,
        Category::CombKmap,
        Category::FsmTransTable,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ApplicationDescr => "Application-Descr",
            Category::CombSeqFsmDescr => "CombSeqFSM-Descr",
            Category::CombSeqFsmWaveform => "CombSeqFSM-Waveform",
            Category::CombKmap => "Comb-Kmap",
            Category::FsmTransTable => "FSM-TransTable",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `meta.json`; keys other tools add are ignored here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemMeta {
    pub category: Category,
    /// Clock name used to frame waveform windows.
    pub clock: String,
    /// Dump scope of the design instance; inferred when absent.
    pub dut_scope: Option<String>,
}

impl Default for ProblemMeta {
    fn default() -> Self {
        ProblemMeta {
            category: Category::Other,
            clock: "clk".into(),
            dut_scope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: String,
    pub spec_text: String,
    pub testbench: String,
    pub reference: Option<String>,
    pub meta: ProblemMeta,
    pub dir: Option<PathBuf>,
}

impl ProblemSpec {
    /// Load `<dir>/spec.txt`, `<dir>/tb.v` and the optional `ref.v` and
    /// `meta.json`. The id is the directory name.
    pub fn load(dir: &Path) -> Result<Self, AgentError> {
        let id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| AgentError::Problem(format!("{} has no usable name", dir.display())))?
            .to_string();
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| AgentError::Problem(format!("{}: {e}", dir.join(name).display())))
        };
        let optional = |name: &str| dir.join(name).is_file().then(|| read(name)).transpose();
        let meta = match optional(META_FILE)? {
            Some(text) => serde_json::from_str(&text)
                .map_err(|e| AgentError::Problem(format!("{}: {e}", dir.join(META_FILE).display())))?,
            None => ProblemMeta::default(),
        };
        let problem = ProblemSpec {
            id,
            spec_text: read(SPEC_FILE)?,
            testbench: read(TESTBENCH_FILE)?,
            reference: optional(REFERENCE_FILE)?,
            meta,
            dir: Some(dir.to_path_buf()),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.spec_text.trim().is_empty() {
            return Err(AgentError::Problem(format!("{}: empty specification", self.id)));
        }
        if self.testbench.trim().is_empty() {
            return Err(AgentError::Problem(format!("{}: empty testbench", self.id)));
        }
        Ok(())
    }
}

/// Problem directories under `root`, sorted by name. A directory counts when
/// it holds a specification.
pub fn problem_dirs(root: &Path) -> Result<Vec<PathBuf>, AgentError> {
    let entries = std::fs::read_dir(root).map_err(|e| AgentError::Problem(format!("{}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SPEC_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}
