use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::message::{validate_messages, ChatMessage, Role};
use crate::LlmError;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_TOP_P: f64 = 1.0;
pub const DEFAULT_API_KEY_ENV: &str = "RTLSMITH_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubled for each further attempt.
    pub backoff_ms: u64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-4-turbo".into(),
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            timeout_secs: 120.0,
            max_retries: 3,
            backoff_ms: 500,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::Config(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(LlmError::Config("request timeout must be positive".into()));
        }
        if self.endpoint.is_empty() || self.model.is_empty() {
            return Err(LlmError::Config("endpoint and model are required".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1u64 << retry.min(16)))
    }
}

/// One request as the backend sees it. `agent` names the calling role; HTTP
/// backends ignore it, scripted ones match on it.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub agent: &'a str,
    pub messages: &'a [ChatMessage],
}

/// Raw JSON exchanged with a remote endpoint, kept for verbose logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: serde_json::Value,
    pub response: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub message: ChatMessage,
    /// Number of transport attempts, 1 when the first succeeded.
    pub attempts: u32,
    pub exchange: Option<Exchange>,
}

impl ChatReply {
    pub fn new(content: impl Into<String>) -> Self {
        ChatReply {
            message: ChatMessage::assistant(content),
            attempts: 1,
            exchange: None,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    /// Called with a request whose preconditions already hold.
    fn complete(&self, request: ChatRequest<'_>) -> Result<ChatReply, LlmError>;

    fn describe(&self) -> String;
}

/// Shares one reply budget across every caller of `inner`.
pub struct CappedBackend<'a> {
    inner: &'a dyn ChatBackend,
    cap: u32,
    used: AtomicU32,
}

impl<'a> CappedBackend<'a> {
    pub fn new(inner: &'a dyn ChatBackend, cap: u32) -> Self {
        CappedBackend {
            inner,
            cap,
            used: AtomicU32::new(0),
        }
    }

    pub fn used(&self) -> u32 {
        self.used.load(Ordering::SeqCst)
    }
}

impl ChatBackend for CappedBackend<'_> {
    fn complete(&self, request: ChatRequest<'_>) -> Result<ChatReply, LlmError> {
        let taken = self
            .used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < self.cap).then_some(u + 1));
        if taken.is_err() {
            return Err(LlmError::ReplyCap(self.cap));
        }
        self.inner.complete(request)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// Check preconditions, call the backend, and insist on an assistant reply.
pub fn chat(backend: &dyn ChatBackend, agent: &str, messages: &[ChatMessage]) -> Result<ChatReply, LlmError> {
    validate_messages(messages)?;
    let reply = backend.complete(ChatRequest { agent, messages })?;
    if reply.message.role != Role::Assistant {
        return Err(LlmError::MalformedResponse(format!(
            "expected an assistant message, got {:?}",
            reply.message.role
        )));
    }
    Ok(reply)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_ranges() {
        assert!(BackendConfig::default().validate().is_ok());
        for (t, p) in [(-0.1, 1.0), (2.1, 1.0), (0.1, 0.0), (0.1, 1.5)] {
            let c = BackendConfig {
                temperature: t,
                top_p: p,
                ..BackendConfig::default()
            };
            assert!(c.validate().is_err(), "{t} {p}");
        }
    }

    #[test]
    fn defaults() {
        let c = BackendConfig::default();
        assert_eq!((c.temperature, c.top_p), (0.1, 1.0));
    }

    struct Echo;

    impl ChatBackend for Echo {
        fn complete(&self, _: ChatRequest<'_>) -> Result<ChatReply, LlmError> {
            Ok(ChatReply::new("e"))
        }
        fn describe(&self) -> String {
            "echo".into()
        }
    }

    #[test]
    fn cap_is_shared() {
        let capped = CappedBackend::new(&Echo, 2);
        let msgs = [ChatMessage::system("s")];
        assert!(chat(&capped, "a", &msgs).is_ok());
        assert!(chat(&capped, "b", &msgs).is_ok());
        assert!(matches!(chat(&capped, "a", &msgs), Err(LlmError::ReplyCap(2))));
        assert_eq!(capped.used(), 2);
    }

    #[test]
    fn backoff_doubles() {
        let c = BackendConfig {
            backoff_ms: 10,
            ..BackendConfig::default()
        };
        assert_eq!(
            (0..3).map(|r| c.backoff(r).as_millis()).collect::<Vec<_>>(),
            vec![10, 20, 40]
        );
    }
}
