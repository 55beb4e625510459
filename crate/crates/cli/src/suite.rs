use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rtlsmith_agents::tools::{AST_WT_TRACE, SIMULATE};
use rtlsmith_agents::{
    problem_dirs, run_problem, Category, PipelineEnv, PipelineOptions, PlannerMode, ProblemResult, ProblemSpec,
};
use rtlsmith_sim::Simulator;
use serde::{Deserialize, Serialize};

use crate::{Backends, CliError, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub planner: PlannerMode,
    pub ast_wt: bool,
}

impl Arm {
    pub const ALL: [Arm; 4] = [
        Arm {
            planner: PlannerMode::Simple,
            ast_wt: false,
        },
        Arm {
            planner: PlannerMode::Simple,
            ast_wt: true,
        },
        Arm {
            planner: PlannerMode::Tcrg,
            ast_wt: false,
        },
        Arm {
            planner: PlannerMode::Tcrg,
            ast_wt: true,
        },
    ];

    pub fn planner_name(self) -> &'static str {
        match self.planner {
            PlannerMode::Simple => "simple",
            PlannerMode::Tcrg => "tcrg",
        }
    }

    pub fn label(self) -> String {
        format!(
            "{}-ast-wt-{}",
            self.planner_name(),
            if self.ast_wt { "on" } else { "off" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRate {
    pub category: Category,
    pub passed: usize,
    pub total: usize,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub planner: PlannerMode,
    pub ast_wt: bool,
    pub backend: String,
    pub problems: Vec<ProblemResult>,
    pub passed: usize,
    pub total: usize,
    pub pass_rate: f64,
    /// Categories with at least one problem, in taxonomy order.
    pub categories: Vec<CategoryRate>,
    pub wall_ms: u64,
}

fn rate(passed: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        passed as f64 / total as f64
    }
}

impl SuiteReport {
    pub fn new(arm: Arm, backend: String, mut problems: Vec<ProblemResult>, wall_ms: u64) -> Self {
        problems.sort_by(|a, b| a.id.cmp(&b.id));
        let passed = problems.iter().filter(|p| p.passed).count();
        let total = problems.len();
        let mut by_cat: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
        for p in &problems {
            let e = by_cat.entry(p.category).or_default();
            e.0 += usize::from(p.passed);
            e.1 += 1;
        }
        let categories = Category::ALL
            .iter()
            .filter_map(|c| {
                by_cat.get(c).map(|&(passed, total)| CategoryRate {
                    category: *c,
                    passed,
                    total,
                    pass_rate: rate(passed, total),
                })
            })
            .collect();
        SuiteReport {
            planner: arm.planner,
            ast_wt: arm.ast_wt,
            backend,
            problems,
            passed,
            total,
            pass_rate: rate(passed, total),
            categories,
            wall_ms,
        }
    }

    pub fn arm(&self) -> Arm {
        Arm {
            planner: self.planner,
            ast_wt: self.ast_wt,
        }
    }

    pub fn category(&self, c: Category) -> Option<&CategoryRate> {
        self.categories.iter().find(|r| r.category == c)
    }

    /// The report without wall-clock times, for run-to-run comparison.
    pub fn fingerprint(&self) -> serde_json::Value {
        let mut r = self.clone();
        r.wall_ms = 0;
        for p in &mut r.problems {
            p.wall_ms = 0;
        }
        serde_json::to_value(&r).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "planner {}, AST-WT {}",
            self.arm().planner_name(),
            if self.ast_wt { "on" } else { "off" }
        );
        let _ = writeln!(
            out,
            "{:<16} {:<20} {:<6} {:<18} {:>4} {:>6} {:>8} {:>8}",
            "problem", "category", "result", "stop", "sim", "trace", "replies", "time"
        );
        for p in &self.problems {
            let count = |t: &str| p.tool_calls.get(t).copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "{:<16} {:<20} {:<6} {:<18} {:>4} {:>6} {:>8} {:>7.1}s",
                p.id,
                p.category.as_str(),
                if p.passed { "pass" } else { "FAIL" },
                serde_json::to_value(p.stop)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                count(SIMULATE),
                count(AST_WT_TRACE),
                p.replies,
                p.wall_ms as f64 / 1000.0
            );
        }
        let _ = writeln!(
            out,
            "passed {}/{} ({:.1}%)",
            self.passed,
            self.total,
            100.0 * self.pass_rate
        );
        out.push_str("per category:\n");
        for c in &self.categories {
            let _ = writeln!(
                out,
                "  {:<20} {:>3}/{:<3} {:>6.1}%",
                c.category.as_str(),
                c.passed,
                c.total,
                100.0 * c.pass_rate
            );
        }
        out
    }
}

/// The four planner × AST-WT arms over one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub arms: Vec<SuiteReport>,
}

impl AblationReport {
    pub fn arm(&self, arm: Arm) -> Option<&SuiteReport> {
        self.arms.iter().find(|r| r.arm() == arm)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn fingerprint(&self) -> serde_json::Value {
        serde_json::Value::Array(self.arms.iter().map(SuiteReport::fingerprint).collect())
    }

    /// Pass-rate grid (planner rows, AST-WT columns) and per-category rates.
    pub fn render(&self) -> String {
        let cell = |planner, ast_wt| match self.arm(Arm { planner, ast_wt }) {
            Some(r) => format!("{:>5.1} ({}/{})", 100.0 * r.pass_rate, r.passed, r.total),
            None => "-".into(),
        };
        let mut out = String::from("Pass rate (%)\n");
        let _ = writeln!(out, "{:<16} {:>16} {:>16}", "", "w/o AST-WT", "with AST-WT");
        for (name, planner) in [
            ("simple planner", PlannerMode::Simple),
            ("tcrg planner", PlannerMode::Tcrg),
        ] {
            let _ = writeln!(
                out,
                "{:<16} {:>16} {:>16}",
                name,
                cell(planner, false),
                cell(planner, true)
            );
        }
        out.push_str("\nPass rate by category (%)\n");
        let _ = write!(out, "{:<20}", "");
        for r in &self.arms {
            let _ = write!(out, " {:>18}", r.arm().label());
        }
        out.push('\n');
        for c in Category::ALL {
            if self.arms.iter().all(|r| r.category(c).is_none()) {
                continue;
            }
            let _ = write!(out, "{:<20}", c.as_str());
            for r in &self.arms {
                let v = r.category(c).map_or("-".to_string(), |x| {
                    format!("{:.1} ({}/{})", 100.0 * x.pass_rate, x.passed, x.total)
                });
                let _ = write!(out, " {v:>18}");
            }
            out.push('\n');
        }
        out
    }
}

/// Load every problem under `dir`; any malformed problem is a
/// configuration error before anything runs.
pub fn load_problems(dir: &Path) -> Result<Vec<ProblemSpec>, CliError> {
    let dirs = problem_dirs(dir)?;
    if dirs.is_empty() {
        return Err(CliError::Config(format!("no problems under {}", dir.display())));
    }
    dirs.iter()
        .map(|d| ProblemSpec::load(d).map_err(CliError::from))
        .collect()
}

/// One arm over all problems, `jobs` at a time. Results land in
/// `out/<problem id>/`. A fatal error stops new problems from starting and
/// is returned once the running ones finish.
pub fn run_suite(
    problems: &[ProblemSpec],
    settings: &Settings,
    backends: &Backends,
    sim: &Simulator,
    arm: Arm,
    out: &Path,
) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let options = PipelineOptions {
        planner: arm.planner,
        ast_wt: arm.ast_wt,
        verbose: settings.verbose,
    };
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let results: Mutex<Vec<ProblemResult>> = Mutex::new(Vec::new());
    let fatal: Mutex<Option<CliError>> = Mutex::new(None);
    let jobs = settings.jobs.clamp(1, problems.len().max(1));

    let work = || loop {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(problem) = problems.get(i) else { break };
        let outcome = (|| {
            let dir = problem.dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let backend = backends.for_problem(&dir)?;
            let env = PipelineEnv {
                backend: backend.as_ref(),
                sim,
                rules: &settings.rules,
                config: &settings.agents,
                options,
            };
            run_problem(problem, &env, out).map_err(CliError::from)
        })();
        match outcome {
            Ok(r) => results.lock().expect("results lock").push(r),
            Err(e) => {
                log::error!("{}: {e}", problem.id);
                stop.store(true, Ordering::SeqCst);
                fatal.lock().expect("error lock").get_or_insert(e);
            }
        }
    };
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(work);
        }
    });
    if let Some(e) = fatal.into_inner().expect("error lock") {
        return Err(e);
    }
    let results = results.into_inner().expect("results lock");
    let report = SuiteReport::new(arm, backends.describe(), results, started.elapsed().as_millis() as u64);
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(out.to_path_buf(), e))?;
    write(&out.join("suite.json"), &report.to_json())?;
    write(&out.join("suite.txt"), &report.render())?;
    Ok(report)
}

/// All four arms, each under `out/<arm label>/`.
pub fn run_ablation(
    problems: &[ProblemSpec],
    settings: &Settings,
    backends: &Backends,
    sim: &Simulator,
    out: &Path,
) -> Result<AblationReport, CliError> {
    let mut arms = Vec::new();
    for arm in Arm::ALL {
        arms.push(run_suite(
            problems,
            settings,
            backends,
            sim,
            arm,
            &out.join(arm.label()),
        )?);
    }
    let report = AblationReport { arms };
    write(&out.join("ablation.json"), &report.to_json())?;
    write(&out.join("ablation.txt"), &report.render())?;
    Ok(report)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rtlsmith_agents::ProblemStop;

    fn result(id: &str, category: Category, passed: bool) -> ProblemResult {
        ProblemResult {
            id: id.into(),
            category,
            passed,
            stop: if passed {
                ProblemStop::Passed
            } else {
                ProblemStop::DebugFailed
            },
            detail: String::new(),
            tool_calls: BTreeMap::new(),
            replies: 3,
            planner_rounds: 1,
            debug_actions: vec![],
            artifacts: vec![],
            recheck: None,
            wall_ms: 17,
        }
    }

    #[test]
    fn category_sums_equal_totals() {
        let arm = Arm::ALL[3];
        let r = SuiteReport::new(
            arm,
            "x".into(),
            vec![
                result("b", Category::CombKmap, true),
                result("a", Category::CombKmap, false),
                result("c", Category::Other, true),
            ],
            5,
        );
        assert_eq!((r.passed, r.total), (2, 3));
        assert!((r.pass_rate - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.categories.iter().map(|c| c.total).sum::<usize>(), r.total);
        assert_eq!(r.categories.iter().map(|c| c.passed).sum::<usize>(), r.passed);
        assert_eq!(r.problems[0].id, "a");
        assert!(r.render().contains("passed 2/3 (66.7%)"));
    }

    #[test]
    fn fingerprint_ignores_wall_time() {
        let a = SuiteReport::new(Arm::ALL[0], "x".into(), vec![result("a", Category::Other, true)], 5);
        let mut b = a.clone();
        b.wall_ms = 99;
        b.problems[0].wall_ms = 1;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.problems[0].passed = false;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn grid_layout() {
        let arms = Arm::ALL
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let problems = (0..4)
                    .map(|k| result(&format!("p{k}"), Category::FsmTransTable, k < i + 1))
                    .collect();
                SuiteReport::new(*arm, "x".into(), problems, 0)
            })
            .collect();
        let text = AblationReport { arms }.render();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].contains("w/o AST-WT") && lines[1].contains("with AST-WT"));
        assert!(
            lines[2].starts_with("simple planner")
                && lines[2].contains("25.0 (1/4)")
                && lines[2].contains("50.0 (2/4)")
        );
        assert!(
            lines[3].starts_with("tcrg planner") && lines[3].contains("75.0 (3/4)") && lines[3].contains("100.0 (4/4)")
        );
        assert!(text.contains("FSM-TransTable"));
    }
}
