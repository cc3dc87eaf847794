use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// One chat-completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn last_user(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend not configured: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    Response(String),
}

/// A chat model: system prompt plus messages in, text out.
pub trait ChatBackend: Send + Sync {
    /// Provider and model, for the session record.
    fn id(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Any endpoint speaking the OpenAI chat-completions protocol.
#[derive(Debug, Clone)]
pub struct OpenAiCompatible {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub temperature: f64,
}

pub const ENV_ENDPOINT: &str = "APSC_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "APSC_LLM_MODEL";
pub const ENV_API_KEY: &str = "APSC_LLM_API_KEY";

impl OpenAiCompatible {
    /// Reads `APSC_LLM_ENDPOINT` (defaults to the OpenAI URL),
    /// `APSC_LLM_MODEL` (required) and `APSC_LLM_API_KEY`.
    pub fn from_env() -> Result<Self, BackendError> {
        let model = std::env::var(ENV_MODEL).map_err(|_| BackendError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(Self {
            endpoint: std::env::var(ENV_ENDPOINT)
                .unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".into()),
            model,
            api_key: std::env::var(ENV_API_KEY).ok(),
            timeout: Duration::from_secs(60),
            temperature: 0.0,
        })
    }

    pub fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut messages = vec![serde_json::json!({ "role": "system", "content": request.system })];
        messages.extend(request.messages.iter().map(|m| serde_json::json!({ "role": m.role, "content": m.content })));
        serde_json::json!({ "model": self.model, "temperature": self.temperature, "messages": messages })
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Reply,
}

#[derive(Deserialize)]
struct Reply {
    content: Option<String>,
}

impl ChatBackend for OpenAiCompatible {
    fn id(&self) -> String {
        format!("openai-compatible:{}", self.model)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let mut call = client.post(&self.endpoint).json(&self.body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: text });
        }
        let parsed: Completion = serde_json::from_str(&text).map_err(|e| BackendError::Response(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Response("no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_puts_system_first() {
        let b = OpenAiCompatible {
            endpoint: "http://localhost".into(),
            model: "m".into(),
            api_key: None,
            timeout: Duration::from_secs(1),
            temperature: 0.0,
        };
        let req =
            ChatRequest { system: "S".into(), messages: vec![ChatMessage::user("hi"), ChatMessage::assistant("{}")] };
        let body = b.body(&req);
        let roles: Vec<_> = body["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
        assert_eq!(roles, ["system", "user", "assistant"]);
        assert_eq!(body["model"], "m");
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let b = OpenAiCompatible {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key: Some("k".into()),
            timeout: Duration::from_secs(2),
            temperature: 0.0,
        };
        let req = ChatRequest { system: String::new(), messages: vec![ChatMessage::user("x")] };
        assert!(matches!(b.complete(&req), Err(BackendError::Transport(_))));
    }
}
