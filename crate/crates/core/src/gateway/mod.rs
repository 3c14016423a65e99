//! Prompt templates, the chat-completion client and record/replay transcripts.

pub mod client;
pub mod json;
pub mod template;
pub mod transcript;

pub use client::{
    ChatMessage, ChatProvider, ChatRequest, Gateway, GatewaySettings, HttpProvider, RetryPolicy, Role, SchemaRole,
    API_KEY_ENV,
};
pub use json::extract_json;
pub use template::{render_prompt, Bindings, PromptLevel, PromptSet, PromptTemplate, RenderedPrompt};
pub use transcript::{Transcript, TranscriptEntry, TranscriptMode};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("template slot '{0}' has no binding")]
    MissingSlot(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("provider error (status {}): {body}", status.map_or("none".to_string(), |s| s.to_string()))]
    Provider { status: Option<u16>, body: String },
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("provider request timed out")]
    Timeout,
    #[error("no provider configured; only replay transcripts can answer")]
    NoProvider,
    #[error("environment variable {} is not set", client::API_KEY_ENV)]
    NoApiKey,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript error: {0}")]
    Transcript(String),
    #[error("response contains no JSON object or array")]
    NoJsonFound,
}
