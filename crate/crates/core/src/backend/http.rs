//! Hosted chat-completion backends (OpenAI-compatible `/chat/completions`).

use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendIdentity, ChatModel, DecodeParams, VqaModel};
use crate::error::BackendError;

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "DENTIST_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpoint {
    pub base_url: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

impl HttpEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    /// Picks the key up from `DENTIST_API_KEY` when set.
    pub fn with_env_api_key(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Exponential backoff: `initial_backoff * 2^attempt`, capped at `max_backoff`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt; total attempts are `max_retries + 1`.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 1,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone)]
struct Transport {
    client: reqwest::Client,
    endpoint: HttpEndpoint,
    params: DecodeParams,
    retry: RetryPolicy,
}

enum Attempt {
    Retryable(String),
    Fatal(String),
}

impl Transport {
    fn new(endpoint: HttpEndpoint, params: DecodeParams, retry: RetryPolicy) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self {
            client,
            endpoint,
            params,
            retry,
        })
    }

    fn body(&self, content: Value) -> Value {
        let mut body = json!({
            "model": self.endpoint.model,
            "messages": [{ "role": "user", "content": content }],
            "temperature": self.params.temperature,
        });
        if let Some(max) = self.params.max_tokens {
            body["max_tokens"] = json!(max);
        }
        if let Some(seed) = self.params.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    async fn send(&self, body: &Value) -> Result<String, BackendError> {
        let mut attempt = 0;
        loop {
            match self.attempt(body).await {
                Ok(text) => return Ok(text),
                Err(Attempt::Retryable(message)) if attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    tracing::warn!(attempt = attempt + 1, ?delay, %message, "retrying chat request");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(Attempt::Retryable(message)) | Err(Attempt::Fatal(message)) => {
                    return Err(BackendError::Transport {
                        attempts: attempt + 1,
                        message,
                    })
                }
            }
        }
    }

    async fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut request = self.client.post(self.endpoint.url()).json(body);
        if let Some(key) = &self.endpoint.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().await.map_err(|e| Attempt::Retryable(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = response.text().await.unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {detail}")));
        }
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| Attempt::Fatal(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| Attempt::Fatal("response has no choices".into()))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

/// Text-only chat completion client.
#[derive(Debug, Clone)]
pub struct OpenAiChat {
    transport: Transport,
}

impl OpenAiChat {
    pub fn new(endpoint: HttpEndpoint, params: DecodeParams, retry: RetryPolicy) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new(endpoint, params, retry)?,
        })
    }
}

#[async_trait]
impl ChatModel for OpenAiChat {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("openai-chat", &self.transport.endpoint.model)
    }

    fn decode_params(&self) -> DecodeParams {
        self.transport.params.clone()
    }

    async fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.transport.send(&self.transport.body(json!(prompt))).await
    }
}

/// Vision chat client: sends the image as an `image_url` content part.
///
/// `http(s)://` and `data:` references are passed through; anything else is
/// read as a local file and inlined as a base64 data URL.
#[derive(Debug, Clone)]
pub struct OpenAiVqa {
    transport: Transport,
}

impl OpenAiVqa {
    pub fn new(endpoint: HttpEndpoint, params: DecodeParams, retry: RetryPolicy) -> Result<Self, BackendError> {
        Ok(Self {
            transport: Transport::new(endpoint, params, retry)?,
        })
    }
}

async fn image_url(image_ref: &str) -> Result<String, BackendError> {
    if image_ref.starts_with("http://") || image_ref.starts_with("https://") || image_ref.starts_with("data:") {
        return Ok(image_ref.to_string());
    }
    let path = Path::new(image_ref.strip_prefix("file://").unwrap_or(image_ref));
    let bytes = tokio::fs::read(path)
        .await
        .map_err(|e| BackendError::ImageUnavailable(format!("{}: {e}", path.display())))?;
    let mime = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "image/jpeg",
    };
    Ok(format!(
        "data:{mime};base64,{}",
        base64::engine::general_purpose::STANDARD.encode(bytes)
    ))
}

#[async_trait]
impl VqaModel for OpenAiVqa {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("openai-vqa", &self.transport.endpoint.model)
    }

    fn decode_params(&self) -> DecodeParams {
        self.transport.params.clone()
    }

    async fn answer(&self, image_ref: &str, question: &str) -> Result<String, BackendError> {
        let url = image_url(image_ref).await?;
        let content = json!([
            { "type": "text", "text": question },
            { "type": "image_url", "image_url": { "url": url } },
        ]);
        self.transport.send(&self.transport.body(content)).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 5,
            initial_backoff_ms: 100,
            max_backoff_ms: 350,
        };
        let ms: Vec<u128> = (0..4).map(|a| p.delay(a).as_millis()).collect();
        assert_eq!(ms, [100, 200, 350, 350]);
    }

    #[tokio::test]
    async fn missing_local_image() {
        let vqa = OpenAiVqa::new(
            HttpEndpoint::new("http://127.0.0.1:9", "m"),
            DecodeParams::default(),
            RetryPolicy::default(),
        )
        .unwrap();
        let err = vqa.answer("/definitely/not/here.jpg", "What?").await.unwrap_err();
        assert!(matches!(err, BackendError::ImageUnavailable(_)), "{err:?}");
    }

    #[tokio::test]
    async fn local_image_becomes_data_url() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        std::fs::write(&path, [1u8, 2, 3]).unwrap();
        let url = image_url(path.to_str().unwrap()).await.unwrap();
        assert_eq!(url, "data:image/png;base64,AQID");
        assert_eq!(image_url("https://a/b.jpg").await.unwrap(), "https://a/b.jpg");
    }

    #[test]
    fn request_body_shape() {
        let t = Transport::new(
            HttpEndpoint::new("http://x/v1/", "gpt-3.5-turbo-0613"),
            DecodeParams {
                temperature: 0.0,
                max_tokens: Some(64),
                seed: Some(7),
            },
            RetryPolicy::default(),
        )
        .unwrap();
        assert_eq!(t.endpoint.url(), "http://x/v1/chat/completions");
        assert_eq!(
            t.body(json!("hi")),
            json!({
                "model": "gpt-3.5-turbo-0613",
                "messages": [{"role": "user", "content": "hi"}],
                "temperature": 0.0,
                "max_tokens": 64,
                "seed": 7
            })
        );
    }
}
