use std::path::PathBuf;

use rtlsmith_sim::{CompileReport, MismatchRules, SimError, SimReport, Simulator};

/// The simulator as the agents use it, with one scratch directory per tool.
pub struct Workbench<'a> {
    pub sim: &'a Simulator,
    pub rules: &'a MismatchRules,
    pub workdir: PathBuf,
}

impl Workbench<'_> {
    pub fn check_syntax(&self, source: &str) -> Result<CompileReport, SimError> {
        self.sim.check_syntax(source, &self.workdir.join("syntax"))
    }

    pub fn simulate(&self, source: &str, testbench: &str) -> Result<SimReport, SimError> {
        self.sim
            .simulate(source, testbench, &self.workdir.join("sim"), self.rules)
    }
}
