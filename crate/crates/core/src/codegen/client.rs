use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::ChatPrompt;

/// Environment variable holding the chat-completions API key.
pub const API_KEY_ENV: &str = "EIPL_API_KEY";

#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub model_id: &'a str,
    pub prompt: &'a ChatPrompt,
    pub temperature: f64,
    /// Number of completions wanted.
    pub n: usize,
    /// Variant index of the first completion; the rest follow consecutively.
    pub first_seed_index: usize,
    pub function_name: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    /// Network failure or a server-side error; worth retrying.
    #[error("transport: {0}")]
    Transport(String),
    /// HTTP 429; worth retrying after a pause.
    #[error("rate limited: {0}")]
    RateLimited(String),
    /// A request the server will never accept (bad key, bad model, ...).
    #[error("request rejected: {0}")]
    Rejected(String),
}

impl ClientError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, ClientError::Rejected(_))
    }
}

/// A chat-completion source. Implementations must tolerate concurrent calls.
pub trait GenerationClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Vec<String>, ClientError>;
}

impl<C: GenerationClient + ?Sized> GenerationClient for &C {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Vec<String>, ClientError> {
        (**self).complete(request)
    }
}

impl<C: GenerationClient + ?Sized> GenerationClient for Box<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Vec<String>, ClientError> {
        (**self).complete(request)
    }
}

/// Deterministic offline client with scripted completions per function name.
///
/// Variant `k` of a name gets the `k`-th scripted completion, cycling when
/// fewer completions than variants are scripted.
#[derive(Debug, Default)]
pub struct MockClient {
    completions: HashMap<String, Vec<String>>,
    calls: AtomicUsize,
}

impl MockClient {
    pub fn new(completions: HashMap<String, Vec<String>>) -> Self {
        MockClient {
            completions,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with(mut self, function_name: &str, completions: Vec<String>) -> Self {
        self.completions.insert(function_name.to_string(), completions);
        self
    }

    /// Number of `complete` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GenerationClient for MockClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Vec<String>, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let scripted = self
            .completions
            .get(request.function_name)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| {
                ClientError::Rejected(format!("no scripted completion for `{}`", request.function_name))
            })?;
        Ok((0..request.n)
            .map(|k| scripted[(request.first_seed_index + k) % scripted.len()].clone())
            .collect())
    }
}

/// Client for an OpenAI-style `POST {base_url}/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct HttpClient {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize, Serialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent,
        }
    }

    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>, timeout: Duration) -> Self {
        Self::new(base_url, std::env::var(API_KEY_ENV).ok(), timeout)
    }

    pub fn request_body(request: &CompletionRequest<'_>) -> serde_json::Value {
        json!({
            "model": request.model_id,
            "messages": request.prompt.messages(),
            "temperature": request.temperature,
            "n": request.n,
        })
    }
}

impl GenerationClient for HttpClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Vec<String>, ClientError> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(Self::request_body(request))
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            429 => return Err(ClientError::RateLimited(format!("HTTP {status}"))),
            500..=599 => return Err(ClientError::Transport(format!("HTTP {status}"))),
            _ => {
                let body = response.body_mut().read_to_string().unwrap_or_default();
                return Err(ClientError::Rejected(format!("HTTP {status}: {body}")));
            }
        }
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Transport(format!("bad response body: {e}")))?;
        Ok(parsed
            .choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect())
    }
}
