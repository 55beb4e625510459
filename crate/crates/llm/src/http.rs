use std::thread::sleep;

use serde_json::{json, Value};

use crate::backend::{BackendConfig, ChatBackend, ChatReply, ChatRequest, Exchange};
use crate::message::{ChatMessage, Role};
use crate::LlmError;

/// Client for an OpenAI-style `chat/completions` endpoint.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    keep_exchanges: bool,
}

enum Attempt {
    Done(Value, Value),
    Retry(String),
}

impl HttpBackend {
    /// Reads the API key from `config.api_key_env`; a missing key is allowed
    /// for local endpoints.
    pub fn new(config: BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            config,
            api_key,
            agent,
            keep_exchanges: false,
        })
    }

    /// Attach raw request/response JSON to every reply.
    pub fn with_exchanges(mut self, keep: bool) -> Self {
        self.keep_exchanges = keep;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn body(&self, messages: &[ChatMessage]) -> Value {
        let wire: Vec<Value> = messages
            .iter()
            .map(|m| match m.role {
                // plain chat protocol: observations go back as user turns
                Role::Tool => json!({
                    "role": "user",
                    "content": format!("Observation from {}:\n{}", m.tool_name.as_deref().unwrap_or("tool"), m.content),
                }),
                role => json!({ "role": role, "content": m.content }),
            })
            .collect();
        json!({
            "model": self.config.model,
            "messages": wire,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
        })
    }

    fn attempt(&self, body: &Value) -> Result<Attempt, LlmError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) if transient(&e) => return Ok(Attempt::Retry(e.to_string())),
            Err(e) => {
                return Err(LlmError::BackendUnavailable {
                    attempts: 1,
                    reason: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading response: {e}"))),
        };
        if status == 408 || status == 429 || status >= 500 {
            return Ok(Attempt::Retry(format!("HTTP {status}: {}", clip(&text))));
        }
        if !(200..300).contains(&status) {
            return Err(LlmError::BackendRejected { status, body: text });
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| LlmError::MalformedResponse(format!("{e}: {}", clip(&text))))?;
        Ok(Attempt::Done(body.clone(), value))
    }
}

fn transient(e: &ureq::Error) -> bool {
    matches!(
        e,
        ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Protocol(_)
            | ureq::Error::BodyStalled
    )
}

fn clip(s: &str) -> String {
    s.chars().take(500).collect()
}

fn content_of(value: &Value) -> Result<String, LlmError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            LlmError::MalformedResponse(format!("no choices[0].message.content in {}", clip(&value.to_string())))
        })
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: ChatRequest<'_>) -> Result<ChatReply, LlmError> {
        let body = self.body(request.messages);
        let tries = self.config.max_retries + 1;
        let mut last = String::new();
        for n in 0..tries {
            if n > 0 {
                let wait = self.config.backoff(n - 1);
                log::warn!("{}: retrying in {wait:?} after {last}", request.agent);
                sleep(wait);
            }
            match self.attempt(&body) {
                Ok(Attempt::Done(req, resp)) => {
                    let content = content_of(&resp)?;
                    return Ok(ChatReply {
                        message: ChatMessage::assistant(content),
                        attempts: n + 1,
                        exchange: self.keep_exchanges.then_some(Exchange {
                            request: req,
                            response: resp,
                        }),
                    });
                }
                Ok(Attempt::Retry(reason)) => last = reason,
                Err(LlmError::BackendUnavailable { reason, .. }) => {
                    return Err(LlmError::BackendUnavailable {
                        attempts: n + 1,
                        reason,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Err(LlmError::BackendUnavailable {
            attempts: tries,
            reason: last,
        })
    }

    fn describe(&self) -> String {
        format!("{} at {}", self.config.model, self.config.endpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observations_are_sent_as_user_turns() {
        let b = HttpBackend::new(BackendConfig::default()).unwrap();
        let body = b.body(&[
            ChatMessage::system("s"),
            ChatMessage::user("q"),
            ChatMessage::tool("simulate", "passed"),
        ]);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][2]["role"], "user");
        assert_eq!(body["messages"][2]["content"], "Observation from simulate:\npassed");
        assert_eq!(body["temperature"], 0.1);
        assert_eq!(body["top_p"], 1.0);
    }

    #[test]
    fn reply_content_is_extracted() {
        let v = json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(content_of(&v).unwrap(), "hi");
        assert!(content_of(&json!({"choices": []})).is_err());
    }
}
