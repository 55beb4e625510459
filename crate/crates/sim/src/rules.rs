use std::path::PathBuf;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{CompileDiagnostic, SignalMismatch, SimError, SimReport};

/// Patterns that read the testbench's mismatch summary from its stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MismatchRules {
    /// Two groups: mismatch count, sample count.
    pub count: String,
    /// One group: time of the first mismatch. The earliest match wins.
    pub first_time: String,
    /// Groups: output name, mismatch count, optional first time.
    pub per_signal: String,
    /// Suffixes of the reference and design copies of each output in the
    /// dump, used when stdout gives no first-mismatch time.
    pub ref_suffix: String,
    pub dut_suffix: String,
}

impl Default for MismatchRules {
    fn default() -> Self {
        MismatchRules {
            count: r"Mismatches:\s*(\d+)\s+in\s+(\d+)\s+samples".into(),
            first_time: r"First mismatch occurred at time\s+(\d+)".into(),
            per_signal: r"Output '([^']+)' has (\d+) mismatches(?:\. First mismatch occurred at time (\d+))?".into(),
            ref_suffix: "_ref".into(),
            dut_suffix: "_dut".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledRules {
    count: Regex,
    first_time: Regex,
    per_signal: Regex,
    ref_suffix: String,
    dut_suffix: String,
}

impl MismatchRules {
    pub fn compile(&self) -> Result<CompiledRules, SimError> {
        let re = |p: &str| Regex::new(p).map_err(|e| SimError::Rules(e.to_string()));
        let count = re(&self.count)?;
        if count.captures_len() < 3 {
            return Err(SimError::Rules("count pattern needs two groups".into()));
        }
        Ok(CompiledRules {
            count,
            first_time: re(&self.first_time)?,
            per_signal: re(&self.per_signal)?,
            ref_suffix: self.ref_suffix.clone(),
            dut_suffix: self.dut_suffix.clone(),
        })
    }
}

fn num(c: &regex::Captures<'_>, i: usize) -> Option<u64> {
    c.get(i).and_then(|m| m.as_str().parse().ok())
}

impl CompiledRules {
    pub(crate) fn apply(
        &self,
        stdout: String,
        diagnostics: Vec<CompileDiagnostic>,
        vcd_path: Option<PathBuf>,
    ) -> SimReport {
        let counts = self.count.captures_iter(&stdout).last();
        let mismatch_count = counts.as_ref().and_then(|c| num(c, 1));
        let total_samples = counts.as_ref().and_then(|c| num(c, 2));
        let mut first = self.first_time.captures_iter(&stdout).filter_map(|c| num(&c, 1)).min();
        let mut signals: Vec<SignalMismatch> = self
            .per_signal
            .captures_iter(&stdout)
            .filter_map(|c| {
                let count = num(&c, 2)?;
                (count > 0).then(|| SignalMismatch {
                    signal: c[1].to_string(),
                    count,
                    first_time: num(&c, 3),
                })
            })
            .collect();

        let failing = mismatch_count.is_some_and(|m| m > 0);
        let needs_dump =
            failing && (first.is_none() || signals.iter().any(|s| s.first_time.is_none()) || signals.is_empty());
        if needs_dump {
            if let Some(divergent) = vcd_path.as_deref().and_then(|p| self.divergence_from_dump(p)) {
                if first.is_none() {
                    first = divergent.iter().filter_map(|d| d.first_time).min();
                }
                if signals.is_empty() {
                    signals = divergent.clone();
                }
                for s in signals.iter_mut().filter(|s| s.first_time.is_none()) {
                    s.first_time = divergent
                        .iter()
                        .find(|d| d.signal == s.signal)
                        .and_then(|d| d.first_time);
                }
            }
        }
        if !failing {
            first = None;
        }
        SimReport {
            compiled: true,
            diagnostics,
            mismatch_count,
            total_samples,
            first_mismatch_time: first,
            mismatched_signals: signals,
            vcd_path,
            raw_stdout: stdout,
        }
    }

    /// Outputs whose design copy departs from the reference copy in the dump.
    fn divergence_from_dump(&self, path: &std::path::Path) -> Option<Vec<SignalMismatch>> {
        let bytes = std::fs::read(path).ok()?;
        let db = rtlsmith_core::parse_vcd(&bytes).ok()?;
        let mut out = Vec::new();
        for name in db.signals.keys() {
            let Some(stem) = name.strip_suffix(&self.dut_suffix) else {
                continue;
            };
            let reference = format!("{stem}{}", self.ref_suffix);
            if !db.signals.contains_key(&reference) {
                continue;
            }
            if let Some(t) = db.first_divergence(name, &reference) {
                let leaf = stem.rsplit('.').next().unwrap_or(stem);
                out.push(SignalMismatch {
                    signal: leaf.to_string(),
                    count: 1,
                    first_time: Some(t),
                });
            }
        }
        Some(out)
    }
}
