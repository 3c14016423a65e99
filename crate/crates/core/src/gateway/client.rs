//! Chat-completion requests and the OpenAI-compatible HTTP provider.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::template::{Bindings, PromptLevel, PromptSet, RenderedPrompt, DEFAULT_PROMPT_BUDGET};
use super::transcript::{Transcript, TranscriptMode};
use super::GatewayError;

pub const API_KEY_ENV: &str = "GENIA_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

impl Role {
    fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must be non-empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Canonical encoding: keys sorted, message whitespace collapsed.
    pub fn canonical_json(&self) -> String {
        let quote = |s: &str| serde_json::to_string(s).expect("strings serialize");
        let messages: Vec<String> = self
            .messages
            .iter()
            .map(|m| {
                let content = m.content.split_whitespace().collect::<Vec<_>>().join(" ");
                format!("{{\"content\":{},\"role\":{}}}", quote(&content), quote(m.role.as_str()))
            })
            .collect();
        let max_tokens = self.max_tokens.map_or("null".to_string(), |n| n.to_string());
        format!(
            "{{\"max_tokens\":{},\"messages\":[{}],\"model\":{},\"temperature\":{}}}",
            max_tokens,
            messages.join(","),
            quote(&self.model),
            serde_json::to_string(&self.temperature).expect("finite temperature"),
        )
    }

    /// Hex SHA-256 of [`ChatRequest::canonical_json`].
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Something that answers a chat request with the first choice's text.
pub trait ChatProvider: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total attempts on 429/5xx before giving up.
    pub attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_base: Duration::from_secs(2),
        }
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: Option<String>,
}

fn excerpt(body: &str) -> String {
    const MAX: usize = 300;
    if body.chars().count() <= MAX {
        body.to_string()
    } else {
        body.chars().take(MAX).collect::<String>() + "..."
    }
}

/// POSTs to `{base_url}/chat/completions` with a bearer token.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    retry: RetryPolicy,
}

impl HttpProvider {
    pub fn new(base_url: &str, api_key: String, timeout: Duration, retry: RetryPolicy) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Provider {
                status: None,
                body: e.to_string(),
            })?;
        Ok(HttpProvider {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            retry,
        })
    }

    pub fn from_env(base_url: &str, timeout: Duration, retry: RetryPolicy) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| GatewayError::NoApiKey)?;
        Self::new(base_url, key, timeout, retry)
    }
}

impl ChatProvider for HttpProvider {
    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let attempts = self.retry.attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = self
                .client
                .post(&self.endpoint)
                .bearer_auth(&self.api_key)
                .json(request)
                .send();
            let response = match result {
                Ok(r) => r,
                Err(e) if e.is_timeout() => return Err(GatewayError::Timeout),
                Err(e) => {
                    return Err(GatewayError::Provider {
                        status: None,
                        body: e.to_string(),
                    })
                }
            };
            let status = response.status();
            let body = response.text().map_err(|e| {
                if e.is_timeout() {
                    GatewayError::Timeout
                } else {
                    GatewayError::Provider {
                        status: Some(status.as_u16()),
                        body: e.to_string(),
                    }
                }
            })?;
            if status.is_success() {
                let parsed: CompletionResponse =
                    serde_json::from_str(&body).map_err(|e| GatewayError::Provider {
                        status: Some(status.as_u16()),
                        body: format!("unreadable completion ({e}): {}", excerpt(&body)),
                    })?;
                return parsed
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.message.content)
                    .ok_or_else(|| GatewayError::Provider {
                        status: Some(status.as_u16()),
                        body: format!("completion has no content: {}", excerpt(&body)),
                    });
            }
            let retryable = status.as_u16() == 429 || status.is_server_error();
            if !retryable || attempt >= attempts {
                return Err(GatewayError::Provider {
                    status: Some(status.as_u16()),
                    body: excerpt(&body),
                });
            }
            let delay = self.retry.backoff_base * 2u32.saturating_pow(attempt - 1);
            log::warn!("provider answered {status}; retry {attempt}/{} in {delay:?}", attempts - 1);
            thread::sleep(delay);
        }
    }
}

/// Where the response schema goes: appended to the system persona or to
/// the user message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaRole {
    System,
    #[default]
    User,
}

#[derive(Debug, Clone)]
pub struct GatewaySettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub schema_role: SchemaRole,
    pub prompt_budget: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            model: "gpt-4o-mini".to_string(),
            temperature: 0.0,
            max_tokens: None,
            schema_role: SchemaRole::User,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
        }
    }
}

/// Renders prompts and routes requests through a transcript.
#[derive(Clone)]
pub struct Gateway {
    provider: Option<Arc<dyn ChatProvider>>,
    settings: GatewaySettings,
    prompts: PromptSet,
}

impl Gateway {
    pub fn new(provider: Option<Arc<dyn ChatProvider>>, settings: GatewaySettings, prompts: PromptSet) -> Self {
        Gateway {
            provider,
            settings,
            prompts,
        }
    }

    /// A gateway that can only answer from replay transcripts.
    pub fn offline(settings: GatewaySettings, prompts: PromptSet) -> Self {
        Self::new(None, settings, prompts)
    }

    pub fn settings(&self) -> &GatewaySettings {
        &self.settings
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    pub fn render(&self, level: PromptLevel, bindings: &Bindings) -> Result<RenderedPrompt, GatewayError> {
        self.prompts.get(level).render(bindings, self.settings.prompt_budget)
    }

    pub fn build_request(&self, prompt: &RenderedPrompt) -> ChatRequest {
        let join = |parts: &[&str]| {
            parts
                .iter()
                .filter(|p| !p.is_empty())
                .copied()
                .collect::<Vec<_>>()
                .join("\n\n")
        };
        let (system, user) = match self.settings.schema_role {
            SchemaRole::User => (
                prompt.persona.clone(),
                join(&[&prompt.task, &prompt.output_schema, &prompt.input]),
            ),
            SchemaRole::System => (
                join(&[&prompt.persona, &prompt.output_schema]),
                join(&[&prompt.task, &prompt.input]),
            ),
        };
        let mut messages = Vec::new();
        if !system.is_empty() {
            messages.push(ChatMessage {
                role: Role::System,
                content: system,
            });
        }
        messages.push(ChatMessage {
            role: Role::User,
            content: user,
        });
        ChatRequest {
            model: self.settings.model.clone(),
            messages,
            temperature: self.settings.temperature,
            max_tokens: self.settings.max_tokens,
        }
    }

    pub fn complete(&self, request: &ChatRequest, transcript: &Transcript) -> Result<String, GatewayError> {
        request.validate()?;
        let fingerprint = request.fingerprint();
        match transcript.mode() {
            TranscriptMode::Replay => transcript
                .lookup(&fingerprint)
                .ok_or(GatewayError::ReplayMiss(fingerprint)),
            TranscriptMode::Live => self.provider()?.send(request),
            TranscriptMode::Record => {
                let response = self.provider()?.send(request)?;
                transcript.append(fingerprint, response.clone());
                Ok(response)
            }
        }
    }

    /// Render the level's template, build the request and complete it.
    pub fn ask(&self, level: PromptLevel, bindings: &Bindings, transcript: &Transcript) -> Result<String, GatewayError> {
        let prompt = self.render(level, bindings)?;
        log::debug!("{level} prompt: {} characters", prompt.char_len());
        self.complete(&self.build_request(&prompt), transcript)
    }

    fn provider(&self) -> Result<&dyn ChatProvider, GatewayError> {
        self.provider.as_deref().ok_or(GatewayError::NoProvider)
    }
}
