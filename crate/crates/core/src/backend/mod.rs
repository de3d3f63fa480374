//! Text-generating backends: a hosted chat judge, a VQA-capable LVLM, a
//! scripted stand-in for both, and a transparent response cache.

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use crate::error::BackendError;

mod cache;
mod http;
mod scripted;

pub use cache::{fingerprint, wrap_with_cache, Cached, Request, ResponseCache};
pub use http::{HttpEndpoint, OpenAiChat, OpenAiVqa, RetryPolicy, API_KEY_ENV};
pub use scripted::{ScriptRule, ScriptedBackend, ScriptedCall};

/// Decoding parameters; part of every cache fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub temperature: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: None,
            seed: None,
        }
    }
}

/// Who answered a request: backend kind plus model name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackendIdentity {
    pub kind: String,
    pub model: String,
}

impl BackendIdentity {
    pub fn new(kind: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            model: model.into(),
        }
    }
}

impl std::fmt::Display for BackendIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kind, self.model)
    }
}

/// A text-only completion endpoint (the judge role).
#[async_trait]
pub trait ChatModel: Send + Sync {
    fn identity(&self) -> BackendIdentity;

    fn decode_params(&self) -> DecodeParams {
        DecodeParams::default()
    }

    async fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// An image + question answering endpoint (the model under correction).
#[async_trait]
pub trait VqaModel: Send + Sync {
    fn identity(&self) -> BackendIdentity;

    fn decode_params(&self) -> DecodeParams {
        DecodeParams::default()
    }

    async fn answer(&self, image_ref: &str, question: &str) -> Result<String, BackendError>;
}

#[async_trait]
impl<T: ChatModel + ?Sized> ChatModel for Arc<T> {
    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }

    fn decode_params(&self) -> DecodeParams {
        (**self).decode_params()
    }

    async fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt).await
    }
}

#[async_trait]
impl<T: VqaModel + ?Sized> VqaModel for Arc<T> {
    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }

    fn decode_params(&self) -> DecodeParams {
        (**self).decode_params()
    }

    async fn answer(&self, image_ref: &str, question: &str) -> Result<String, BackendError> {
        (**self).answer(image_ref, question).await
    }
}

/// Sends `prompt` to a chat backend; blank completions are errors.
pub async fn chat_complete<B: ChatModel + ?Sized>(backend: &B, prompt: &str) -> Result<String, BackendError> {
    if prompt.trim().is_empty() {
        return Err(BackendError::EmptyRequest("prompt"));
    }
    let text = backend.complete(prompt).await?;
    if text.trim().is_empty() {
        return Err(BackendError::EmptyCompletion);
    }
    Ok(text)
}

/// Asks a VQA backend `question` about the image at `image_ref`.
pub async fn vqa_answer<B: VqaModel + ?Sized>(
    backend: &B,
    image_ref: &str,
    question: &str,
) -> Result<String, BackendError> {
    if question.trim().is_empty() {
        return Err(BackendError::EmptyRequest("question"));
    }
    let text = backend.answer(image_ref, question).await?;
    if text.trim().is_empty() {
        return Err(BackendError::EmptyCompletion);
    }
    Ok(text)
}
