use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{chat, ChatBackend, ChatReply};
use crate::memory::{trim_memory, RECENT_CHATS};
use crate::message::{ChatMessage, Role};
use crate::LlmError;

pub const FINAL: &str = "FINAL";
pub const DEFAULT_MAX_STEPS: u32 = 40;
pub const DEFAULT_MAX_REPLIES: u32 = 100;
/// Format reminders sent in a row before the loop gives up.
pub const MAX_FORMAT_REMINDERS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReactLimits {
    pub max_steps: u32,
    pub max_consecutive_replies: u32,
}

impl Default for ReactLimits {
    fn default() -> Self {
        ReactLimits {
            max_steps: DEFAULT_MAX_STEPS,
            max_consecutive_replies: DEFAULT_MAX_REPLIES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Final,
    StepBudget,
    ReplyBudget,
    ToolFatal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactStep {
    pub thought: String,
    pub action: String,
    pub action_input: String,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactTrace {
    pub steps: Vec<ReactStep>,
    pub final_answer: Option<String>,
    pub stop_reason: StopReason,
    /// Backend replies consumed, including ones that failed to parse.
    pub replies: u32,
}

impl ReactTrace {
    /// Tool names in call order, without the closing FINAL.
    pub fn actions(&self) -> Vec<&str> {
        self.steps
            .iter()
            .map(|s| s.action.as_str())
            .filter(|a| *a != FINAL)
            .collect()
    }

    pub fn calls_to(&self, tool: &str) -> usize {
        self.steps.iter().filter(|s| s.action == tool).count()
    }

    pub fn check(&self) -> Result<(), String> {
        let n = self.steps.len();
        for (i, s) in self.steps.iter().enumerate() {
            if s.action == FINAL && i + 1 != n {
                return Err(format!("FINAL at step {i} is not last"));
            }
            if s.action != FINAL && s.observation.is_empty() {
                return Err(format!("step {i} ({}) has no observation", s.action));
            }
        }
        let ended = self.steps.last().is_some_and(|s| s.action == FINAL);
        if ended != (self.stop_reason == StopReason::Final) {
            return Err("stop reason disagrees with the last step".into());
        }
        Ok(())
    }
}

/// What a tool can report besides its output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToolFailure {
    /// Shown to the model as the observation.
    Recoverable(String),
    /// Ends the loop with `tool_fatal`.
    Fatal(String),
}

pub type ToolFn<'a> = Box<dyn FnMut(&str) -> Result<String, ToolFailure> + 'a>;

pub struct Tool<'a> {
    pub name: String,
    pub description: String,
    run: ToolFn<'a>,
}

#[derive(Default)]
pub struct ToolRegistry<'a> {
    tools: Vec<Tool<'a>>,
}

impl<'a> ToolRegistry<'a> {
    pub fn new() -> Self {
        ToolRegistry { tools: Vec::new() }
    }

    pub fn register(
        &mut self,
        name: &str,
        description: &str,
        run: impl FnMut(&str) -> Result<String, ToolFailure> + 'a,
    ) -> Result<(), LlmError> {
        if name.is_empty() || name.eq_ignore_ascii_case(FINAL) || self.contains(name) {
            return Err(LlmError::DuplicateTool(name.to_string()));
        }
        self.tools.push(Tool {
            name: name.to_string(),
            description: description.to_string(),
            run: Box::new(run),
        });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.iter().any(|t| t.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.name.as_str()).collect()
    }

    fn invoke(&mut self, name: &str, input: &str) -> Option<Result<String, ToolFailure>> {
        let tool = self.tools.iter_mut().find(|t| t.name == name)?;
        Some((tool.run)(input))
    }

    fn protocol(&self) -> String {
        let mut s = String::from("Tools:\n");
        if self.tools.is_empty() {
            s.push_str("(none)\n");
        }
        for t in &self.tools {
            s.push_str(&format!("- {}: {}\n", t.name, t.description));
        }
        s.push_str(
            "\nAnswer every turn with exactly one fenced JSON block:\n```json\n{\"thought\": \"...\", \"action\": \"<tool name or FINAL>\", \"action_input\": \"...\"}\n```\nUse action FINAL with the answer as action_input when done.",
        );
        s
    }
}

/// Receives every chat turn and tool call as it happens.
pub trait TraceSink {
    fn chat_turn(&self, agent: &str, request: &[ChatMessage], reply: &ChatReply);
    fn tool_call(&self, agent: &str, tool: &str, input: &str, observation: &str);
}

pub struct NoopSink;

impl TraceSink for NoopSink {
    fn chat_turn(&self, _: &str, _: &[ChatMessage], _: &ChatReply) {}
    fn tool_call(&self, _: &str, _: &str, _: &str, _: &str) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub thought: String,
    pub action: String,
    pub action_input: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot read an action: {0}")]
pub struct ActionParseError(pub String);

/// The reply text for an action, as models are asked to write it.
pub fn format_action(thought: &str, action: &str, action_input: &str) -> String {
    let obj = serde_json::json!({ "thought": thought, "action": action, "action_input": action_input });
    format!(
        "```json\n{}\n```",
        serde_json::to_string_pretty(&obj).expect("plain json")
    )
}

fn fenced_body(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(&body[..end])
}

pub fn parse_action(reply: &str) -> Result<Action, ActionParseError> {
    let body = match fenced_body(reply) {
        Some(b) => b,
        None if reply.trim_start().starts_with('{') => reply,
        None => return Err(ActionParseError("no fenced JSON block".into())),
    };
    let value: Value = serde_json::from_str(body.trim()).map_err(|e| ActionParseError(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ActionParseError("block is not a JSON object".into()))?;
    let action = obj
        .get("action")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| ActionParseError("missing \"action\"".into()))?;
    let action = if action.eq_ignore_ascii_case(FINAL) {
        FINAL
    } else {
        action
    };
    let thought = obj.get("thought").and_then(Value::as_str).unwrap_or("").to_string();
    let action_input = match obj.get("action_input") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    Ok(Action {
        thought,
        action: action.to_string(),
        action_input,
    })
}

/// True when `sent` is the system prompt, the query, and the last four
/// non-system messages of `history`, with the query kept only once.
pub fn memory_contract_holds(sent: &[ChatMessage], history: &[ChatMessage], query: &ChatMessage) -> bool {
    let chats: Vec<&ChatMessage> = history.iter().filter(|m| m.role != Role::System).collect();
    let tail = &chats[chats.len().saturating_sub(RECENT_CHATS)..];
    let mut i = 0;
    if let Some(sys) = history.iter().find(|m| m.role == Role::System) {
        if sent.first() != Some(sys) {
            return false;
        }
        i = 1;
    }
    if !tail.contains(&query) {
        if sent.get(i) != Some(query) {
            return false;
        }
        i += 1;
    }
    sent.len() == i + tail.len() && sent[i..].iter().zip(tail).all(|(a, b)| a == *b)
}

pub struct ReactRun<'s, 'b> {
    pub agent: &'s str,
    pub system_prompt: &'s str,
    pub query: &'s str,
    pub backend: &'b dyn ChatBackend,
    pub limits: ReactLimits,
    pub sink: &'b dyn TraceSink,
}

/// Thought / Action / Observation loop over `tools`.
pub fn react_loop(run: ReactRun<'_, '_>, tools: &mut ToolRegistry<'_>) -> Result<ReactTrace, LlmError> {
    if run.limits.max_steps == 0 || run.limits.max_consecutive_replies == 0 {
        return Err(LlmError::InvalidRequest("loop limits must be positive".into()));
    }
    let system = ChatMessage::system(format!("{}\n\n{}", run.system_prompt.trim_end(), tools.protocol()));
    let query = ChatMessage::user(run.query);
    let mut history = vec![system, query.clone()];
    let mut steps: Vec<ReactStep> = Vec::new();
    let mut replies = 0u32;
    let mut reminders = 0u32;

    let stop = loop {
        if steps.len() as u32 >= run.limits.max_steps {
            break StopReason::StepBudget;
        }
        if replies >= run.limits.max_consecutive_replies {
            break StopReason::ReplyBudget;
        }
        let sent = trim_memory(&history, &query);
        assert!(memory_contract_holds(&sent, &history, &query), "memory window violated");
        let reply = chat(run.backend, run.agent, &sent)?;
        replies += 1;
        run.sink.chat_turn(run.agent, &sent, &reply);
        let text = reply.message.content.clone();
        history.push(reply.message);

        let action = match parse_action(&text) {
            Ok(a) => a,
            Err(e) => {
                if reminders >= MAX_FORMAT_REMINDERS {
                    break StopReason::ReplyBudget;
                }
                reminders += 1;
                history.push(ChatMessage::user(format!(
                    "Format error: {e}. Reply with one fenced JSON block holding \"thought\", \"action\" and \"action_input\"."
                )));
                continue;
            }
        };
        reminders = 0;
        if action.action == FINAL {
            steps.push(ReactStep {
                thought: action.thought,
                action: FINAL.into(),
                action_input: action.action_input,
                observation: String::new(),
            });
            break StopReason::Final;
        }
        let (observation, fatal) = match tools.invoke(&action.action, &action.action_input) {
            None => (
                format!(
                    "unknown tool '{}', available: {}",
                    action.action,
                    tools.names().join(", ")
                ),
                false,
            ),
            Some(Ok(out)) if out.trim().is_empty() => ("(no output)".to_string(), false),
            Some(Ok(out)) => (out, false),
            Some(Err(ToolFailure::Recoverable(msg))) => (format!("error: {msg}"), false),
            Some(Err(ToolFailure::Fatal(msg))) => (format!("fatal: {msg}"), true),
        };
        run.sink
            .tool_call(run.agent, &action.action, &action.action_input, &observation);
        history.push(ChatMessage::tool(action.action.clone(), observation.clone()));
        steps.push(ReactStep {
            thought: action.thought,
            action: action.action,
            action_input: action.action_input,
            observation,
        });
        if fatal {
            break StopReason::ToolFatal;
        }
    };

    let final_answer =
        (stop == StopReason::Final).then(|| steps.last().map(|s| s.action_input.clone()).unwrap_or_default());
    let trace = ReactTrace {
        steps,
        final_answer,
        stop_reason: stop,
        replies,
    };
    debug_assert_eq!(trace.check(), Ok(()));
    Ok(trace)
}
