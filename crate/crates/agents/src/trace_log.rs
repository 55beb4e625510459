use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rtlsmith_llm::{ChatMessage, ChatReply, TraceSink};
use serde_json::{json, Value};

use crate::{AgentError, AgentOutcome};

/// Where agents report chat turns, tool calls and finished outcomes.
pub trait AgentLog: TraceSink {
    fn outcome(&self, outcome: &AgentOutcome);
    fn event(&self, agent: &str, what: &str, detail: Value);
}

/// Discards everything.
pub struct NullLog;

impl TraceSink for NullLog {
    fn chat_turn(&self, _: &str, _: &[ChatMessage], _: &ChatReply) {}
    fn tool_call(&self, _: &str, _: &str, _: &str, _: &str) {}
}

impl AgentLog for NullLog {
    fn outcome(&self, _: &AgentOutcome) {}
    fn event(&self, _: &str, _: &str, _: Value) {}
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Tally {
    pub replies: u32,
    pub tool_calls: BTreeMap<String, u32>,
}

/// JSONL trace: one record per chat turn, tool call, event or outcome,
/// written and flushed as it happens.
pub struct TraceLog {
    problem: String,
    path: PathBuf,
    file: Mutex<File>,
    verbose: bool,
    tally: Mutex<Tally>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl TraceLog {
    /// Truncates any existing log at `path`.
    pub fn create(path: &Path, problem: &str, verbose: bool) -> Result<Self, AgentError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| AgentError::io(path, e))?;
        Ok(TraceLog {
            problem: problem.to_string(),
            path: path.to_path_buf(),
            file: Mutex::new(file),
            verbose,
            tally: Mutex::new(Tally::default()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn tally(&self) -> Tally {
        self.tally.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn write(&self, agent: &str, kind: &str, body: Value) {
        let mut record = json!({ "ts_ms": now_ms() as u64, "problem": self.problem, "agent": agent, "kind": kind });
        if let (Some(r), Value::Object(b)) = (record.as_object_mut(), body) {
            r.extend(b);
        }
        let mut line = record.to_string();
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
            log::error!("trace log {}: {e}", self.path.display());
        }
    }
}

impl TraceSink for TraceLog {
    fn chat_turn(&self, agent: &str, request: &[ChatMessage], reply: &ChatReply) {
        self.tally.lock().unwrap_or_else(|e| e.into_inner()).replies += 1;
        let mut body = json!({
            "reply": reply.message.content,
            "attempts": reply.attempts,
            "messages": request.len(),
        });
        if self.verbose {
            body["request"] = serde_json::to_value(request).unwrap_or(Value::Null);
            if let Some(ex) = &reply.exchange {
                body["exchange"] = serde_json::to_value(ex).unwrap_or(Value::Null);
            }
        }
        self.write(agent, "chat", body);
    }

    fn tool_call(&self, agent: &str, tool: &str, input: &str, observation: &str) {
        *self
            .tally
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .tool_calls
            .entry(tool.to_string())
            .or_default() += 1;
        self.write(
            agent,
            "tool",
            json!({ "tool": tool, "input": input, "observation": observation }),
        );
    }
}

impl AgentLog for TraceLog {
    fn outcome(&self, outcome: &AgentOutcome) {
        let body = serde_json::to_value(outcome).unwrap_or(Value::Null);
        self.write(&outcome.agent, "outcome", json!({ "outcome": body }));
    }

    fn event(&self, agent: &str, what: &str, detail: Value) {
        self.write(agent, "event", json!({ "event": what, "detail": detail }));
    }
}

/// Parse a JSONL trace back into records.
pub fn read_trace(path: &Path) -> Result<Vec<Value>, AgentError> {
    let text = std::fs::read_to_string(path).map_err(|e| AgentError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| AgentError::Problem(format!("{}: {e}", path.display()))))
        .collect()
}
