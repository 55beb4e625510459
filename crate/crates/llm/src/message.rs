use serde::{Deserialize, Serialize};

use crate::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool(name: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Tool,
            content: content.into(),
            tool_name: Some(name.into()),
        }
    }

    fn plain(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
            tool_name: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.role == Role::Tool && self.tool_name.as_deref().is_none_or(str::is_empty) {
            return Err(LlmError::InvalidRequest("tool message without a tool name".into()));
        }
        Ok(())
    }
}

/// Preconditions shared by every backend: at least one message, the first
/// one a system prompt, every message well formed.
pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), LlmError> {
    match messages.first() {
        None => return Err(LlmError::InvalidRequest("no messages".into())),
        Some(m) if m.role != Role::System => {
            return Err(LlmError::InvalidRequest(
                "first message must be the system prompt".into(),
            ))
        }
        _ => {}
    }
    messages.iter().try_for_each(ChatMessage::validate)
}
