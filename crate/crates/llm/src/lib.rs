//! Chat backends, sliding-window memory and the ReAct tool loop.

mod backend;
mod http;
mod memory;
mod message;
mod react;
mod scripted;

pub use backend::{
    chat, BackendConfig, CappedBackend, ChatBackend, ChatReply, ChatRequest, Exchange, DEFAULT_API_KEY_ENV,
    DEFAULT_TEMPERATURE, DEFAULT_TOP_P,
};
pub use http::HttpBackend;
pub use memory::{trim_memory, RECENT_CHATS};
pub use message::{validate_messages, ChatMessage, Role};
pub use react::{
    format_action, memory_contract_holds, parse_action, react_loop, Action, ActionParseError, NoopSink, ReactLimits,
    ReactRun, ReactStep, ReactTrace, StopReason, Tool, ToolFailure, ToolFn, ToolRegistry, TraceSink,
    DEFAULT_MAX_REPLIES, DEFAULT_MAX_STEPS, FINAL, MAX_FORMAT_REMINDERS,
};
pub use scripted::{ScriptRule, ScriptedBackend};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("backend unavailable after {attempts} attempt(s): {reason}")]
    BackendUnavailable { attempts: u32, reason: String },
    #[error("backend rejected the request (HTTP {status}): {body}")]
    BackendRejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("no scripted reply for agent '{agent}' on prompt: {prompt}")]
    ScriptUnmatched { agent: String, prompt: String },
    #[error("reply cap of {0} reached")]
    ReplyCap(u32),
    #[error("tool name '{0}' is reserved or already registered")]
    DuplicateTool(String),
}
