//! The bundled problem corpus. Each problem directory holds `spec.txt`,
//! `tb.v`, a golden `ref.v`, `meta.json` with planted bugs under `bugs/`,
//! and a scripted transcript `script.json`.

use std::path::{Path, PathBuf};

use rtlsmith_agents::{problem_dirs, AgentError, Category, ProblemSpec, META_FILE};
use rtlsmith_core::parse_module;
use rtlsmith_core::verilog::format_diagnostics;
use rtlsmith_sim::{MismatchRules, SimError, Simulator};
use serde::{Deserialize, Serialize};

pub const SCRIPT_FILE: &str = "script.json";
pub const BUGS_DIR: &str = "bugs";

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Problem(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// A planted bug and what the testbench must report for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugMeta {
    pub file: String,
    pub description: String,
    pub mismatch_count: Option<u64>,
    pub first_mismatch_time: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct FixtureMeta {
    #[serde(default)]
    bugs: Vec<BugMeta>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub problem: ProblemSpec,
    pub golden: String,
    pub bugs: Vec<(BugMeta, String)>,
    pub script: PathBuf,
}

impl Fixture {
    pub fn id(&self) -> &str {
        &self.problem.id
    }

    pub fn category(&self) -> Category {
        self.problem.meta.category
    }
}

/// `fixtures/` at the workspace root.
pub fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn problems_root() -> PathBuf {
    fixtures_root().join("problems")
}

fn invalid(path: &Path, message: impl Into<String>) -> FixtureError {
    FixtureError::Invalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn load_fixture(dir: &Path) -> Result<Fixture, FixtureError> {
    let problem = ProblemSpec::load(dir)?;
    let golden = problem.reference.clone().ok_or_else(|| invalid(dir, "no ref.v"))?;
    let meta_path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| invalid(&meta_path, e.to_string()))?;
    let meta: FixtureMeta = serde_json::from_str(&text).map_err(|e| invalid(&meta_path, e.to_string()))?;
    let mut bugs = Vec::new();
    for b in meta.bugs {
        let path = dir.join(BUGS_DIR).join(&b.file);
        let src = std::fs::read_to_string(&path).map_err(|e| invalid(&path, e.to_string()))?;
        bugs.push((b, src));
    }
    let script = dir.join(SCRIPT_FILE);
    if !script.is_file() {
        return Err(invalid(dir, "no script.json"));
    }
    Ok(Fixture {
        problem,
        golden,
        bugs,
        script,
    })
}

pub fn load_all(root: &Path) -> Result<Vec<Fixture>, FixtureError> {
    let dirs = problem_dirs(root)?;
    if dirs.is_empty() {
        return Err(invalid(root, "no problems"));
    }
    dirs.iter().map(|d| load_fixture(d)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BugCheck {
    pub file: String,
    pub compiled: bool,
    pub mismatch_count: Option<u64>,
    pub first_mismatch_time: Option<u64>,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureCheck {
    pub id: String,
    pub golden_passes: bool,
    pub problems: Vec<String>,
    pub bugs: Vec<BugCheck>,
}

impl FixtureCheck {
    pub fn ok(&self) -> bool {
        self.problems.is_empty() && self.bugs.iter().all(|b| b.problems.is_empty())
    }
}

/// Golden module parses and passes; every planted bug parses, compiles and
/// fails with the documented count and first mismatch time.
pub fn check_fixture(
    fixture: &Fixture,
    sim: &Simulator,
    rules: &MismatchRules,
    workdir: &Path,
) -> Result<FixtureCheck, FixtureError> {
    let tb = &fixture.problem.testbench;
    let mut problems = Vec::new();
    if let Err(d) = parse_module(&fixture.golden) {
        problems.push(format!("ref.v does not parse: {}", format_diagnostics(&d).trim_end()));
    }
    let golden = sim.simulate(&fixture.golden, tb, &workdir.join("golden"), rules)?;
    if !golden.passed() {
        problems.push(format!("ref.v fails its testbench: {}", golden.summary()));
    }
    if fixture.bugs.is_empty() {
        problems.push("no planted bugs".into());
    }
    let mut bugs = Vec::new();
    for (i, (meta, src)) in fixture.bugs.iter().enumerate() {
        let mut issues = Vec::new();
        if let Err(d) = parse_module(src) {
            issues.push(format!("does not parse: {}", format_diagnostics(&d).trim_end()));
        }
        let r = sim.simulate(src, tb, &workdir.join(format!("bug{i}")), rules)?;
        if !r.compiled {
            issues.push(format!("does not compile: {}", r.summary()));
        } else if r.passed() {
            issues.push("passes the testbench".into());
        }
        if meta.mismatch_count.is_some() && meta.mismatch_count != r.mismatch_count {
            issues.push(format!(
                "mismatch count {:?}, documented {:?}",
                r.mismatch_count, meta.mismatch_count
            ));
        }
        if meta.first_mismatch_time.is_some() && meta.first_mismatch_time != r.first_mismatch_time {
            issues.push(format!(
                "first mismatch at {:?}, documented {:?}",
                r.first_mismatch_time, meta.first_mismatch_time
            ));
        }
        bugs.push(BugCheck {
            file: meta.file.clone(),
            compiled: r.compiled,
            mismatch_count: r.mismatch_count,
            first_mismatch_time: r.first_mismatch_time,
            problems: issues,
        });
    }
    Ok(FixtureCheck {
        id: fixture.id().to_string(),
        golden_passes: golden.passed(),
        problems,
        bugs,
    })
}

pub fn validate_fixtures(
    root: &Path,
    sim: &Simulator,
    rules: &MismatchRules,
    workdir: &Path,
) -> Result<Vec<FixtureCheck>, FixtureError> {
    let mut out = Vec::new();
    for f in load_all(root)? {
        out.push(check_fixture(&f, sim, rules, &workdir.join(f.id()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_loads_and_covers_every_category() {
        let all = load_all(&problems_root()).unwrap();
        assert!(all.len() >= 10);
        for c in Category::ALL {
            assert!(all.iter().any(|f| f.category() == c), "{c}");
        }
        for f in &all {
            assert!(!f.bugs.is_empty(), "{}", f.id());
            assert!(f.golden.lines().count() <= 40, "{}", f.id());
        }
    }

    #[test]
    fn modules_stay_in_the_parsed_subset() {
        for f in load_all(&problems_root()).unwrap() {
            parse_module(&f.golden).unwrap_or_else(|d| panic!("{}: {}", f.id(), format_diagnostics(&d)));
            for (b, src) in &f.bugs {
                parse_module(src).unwrap_or_else(|d| panic!("{}/{}: {}", f.id(), b.file, format_diagnostics(&d)));
            }
        }
    }
}
