use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatBackend, ChatReply, ChatRequest};
use crate::message::Role;
use crate::react::format_action;
use crate::LlmError;

/// A canned reply given when the predicate holds.
///
/// The predicate looks at the calling agent and the last user or tool
/// message of the request. Rules are tried in order; a rule with `uses`
/// set retires after that many replies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub not_contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uses: Option<u32>,
    pub reply: String,
}

impl ScriptRule {
    pub fn new(contains: &str, reply: impl Into<String>) -> Self {
        ScriptRule {
            agent: None,
            contains: vec![contains.to_string()],
            not_contains: Vec::new(),
            uses: None,
            reply: reply.into(),
        }
    }

    pub fn for_agent(mut self, agent: &str) -> Self {
        self.agent = Some(agent.to_string());
        self
    }

    pub fn once(mut self) -> Self {
        self.uses = Some(1);
        self
    }

    fn matches(&self, agent: &str, prompt: &str) -> bool {
        self.agent.as_deref().is_none_or(|a| a == agent)
            && self.contains.iter().all(|c| prompt.contains(c.as_str()))
            && !self.not_contains.iter().any(|c| prompt.contains(c.as_str()))
    }
}

/// File form of a rule. The reply is given as text, as a file next to the
/// script, or as a ReAct action whose input may also come from a file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    agent: Option<String>,
    #[serde(default)]
    contains: Vec<String>,
    #[serde(default)]
    not_contains: Vec<String>,
    uses: Option<u32>,
    reply: Option<String>,
    reply_file: Option<String>,
    action: Option<ActionFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionFile {
    #[serde(default)]
    thought: String,
    action: String,
    #[serde(default)]
    action_input: Option<String>,
    action_input_file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    /// Further scripts whose rules follow this file's own.
    #[serde(default)]
    include: Vec<String>,
    rules: Vec<RuleFile>,
}

/// Deterministic backend replaying canned replies. A prompt no rule covers
/// is an error, never a silent default.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    used: Mutex<Vec<u32>>,
    name: String,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        let used = Mutex::new(vec![0; rules.len()]);
        ScriptedBackend {
            rules,
            used,
            name: "scripted".into(),
        }
    }

    /// Load `{"include": [...], "rules": [...]}`. Included scripts and
    /// `*_file` paths are relative to the script.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let rules = load_rules(path, 0)?;
        let mut backend = Self::new(rules);
        backend.name = format!("scripted ({})", path.display());
        Ok(backend)
    }

    /// Parse a script without includes.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, LlmError> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| LlmError::Config(e.to_string()))?;
        if !file.include.is_empty() {
            return Err(LlmError::Config("include needs a script loaded from a file".into()));
        }
        Ok(Self::new(resolve_rules(file.rules, base)?))
    }
}

fn load_rules(path: &Path, depth: usize) -> Result<Vec<ScriptRule>, LlmError> {
    if depth > 8 {
        return Err(LlmError::Config(format!(
            "includes nested too deep at {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::Config(format!("reading script {}: {e}", path.display())))?;
    let file: ScriptFile =
        serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("script {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rules =
        resolve_rules(file.rules, base).map_err(|e| LlmError::Config(format!("script {}: {e}", path.display())))?;
    for inc in &file.include {
        rules.extend(load_rules(&base.join(inc), depth + 1)?);
    }
    Ok(rules)
}

fn resolve_rules(file_rules: Vec<RuleFile>, base: &Path) -> Result<Vec<ScriptRule>, LlmError> {
    let read = |name: &str| {
        std::fs::read_to_string(base.join(name))
            .map_err(|e| LlmError::Config(format!("reading {}: {e}", base.join(name).display())))
    };
    let mut rules = Vec::with_capacity(file_rules.len());
    for (i, r) in file_rules.into_iter().enumerate() {
        let reply = match (r.reply, r.reply_file, r.action) {
            (Some(t), None, None) => t,
            (None, Some(f), None) => read(&f)?,
            (None, None, Some(a)) => {
                let input = match (a.action_input, a.action_input_file) {
                    (Some(t), None) => t,
                    (None, Some(f)) => read(&f)?,
                    (None, None) => String::new(),
                    _ => {
                        return Err(LlmError::Config(format!(
                            "rule {i}: give action_input or action_input_file"
                        )))
                    }
                };
                format_action(&a.thought, &a.action, &input)
            }
            _ => {
                return Err(LlmError::Config(format!(
                    "rule {i}: give exactly one of reply, reply_file, action"
                )))
            }
        };
        rules.push(ScriptRule {
            agent: r.agent,
            contains: r.contains,
            not_contains: r.not_contains,
            uses: r.uses,
            reply,
        });
    }
    Ok(rules)
}

impl ScriptedBackend {
    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }

    /// How often each rule has fired.
    pub fn usage(&self) -> Vec<u32> {
        self.used.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: ChatRequest<'_>) -> Result<ChatReply, LlmError> {
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| matches!(m.role, Role::User | Role::Tool))
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        let hit = self
            .rules
            .iter()
            .enumerate()
            .find(|(i, r)| r.uses.is_none_or(|u| used[*i] < u) && r.matches(request.agent, prompt));
        match hit {
            Some((i, rule)) => {
                used[i] += 1;
                Ok(ChatReply::new(fill_prompt(&rule.reply, prompt)))
            }
            None => Err(LlmError::ScriptUnmatched {
                agent: request.agent.to_string(),
                prompt: prompt.to_string(),
            }),
        }
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Replaces `{{prompt}}` with the matched prompt. Inside a JSON action the
/// text is escaped so the action stays parseable.
fn fill_prompt(reply: &str, prompt: &str) -> String {
    const KEY: &str = "{{prompt}}";
    if !reply.contains(KEY) {
        return reply.to_string();
    }
    let head = reply.trim_start();
    let value = if head.starts_with("```json") || head.starts_with('{') {
        let quoted = serde_json::to_string(prompt).unwrap_or_default();
        quoted[1..quoted.len() - 1].to_string()
    } else {
        prompt.to_string()
    };
    reply.replace(KEY, &value)
}
