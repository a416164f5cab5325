//! Prompt construction, completion fetching (with cache and retries) and
//! code extraction.

mod cache;
mod client;
mod extract;
mod prompt;

use std::time::Duration;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{compact as compact_cache, prompt_hash, CacheKey, CacheRecord, VariantCache};
pub use client::{
    ClientError, CompletionRequest, GenerationClient, HttpClient, MockClient, API_KEY_ENV,
};
pub use extract::{extract_code, ExtractError};
pub use prompt::{build_prompt, ChatMessage, ChatPrompt, PROMPT_VERSION};

use crate::jsonl::JsonlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub question_id: String,
    pub function_name: String,
    pub n_variants: usize,
    pub temperature: f64,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedVariant {
    pub index: usize,
    pub raw_output: String,
    /// Extracted code; empty when extraction failed.
    pub code: String,
    pub cache_hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_error: Option<ExtractError>,
}

impl GeneratedVariant {
    pub fn has_code(&self) -> bool {
        self.extraction_error.is_none()
    }
}

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limit still exceeded after {attempts} attempts")]
    Quota { attempts: u32 },
    #[error("model rejected the request: {0}")]
    Rejected(String),
    #[error("variant {index}: model returned an empty completion")]
    EmptyCompletion { index: usize },
    #[error("cache: {0}")]
    Cache(#[from] JsonlError),
}

/// Exponential backoff: the `k`-th retry waits `base_delay · 2^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total tries per request, including the first.
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }
}

/// Fetches variants through a client, consulting the cache first.
pub struct Generator<'a> {
    pub client: &'a dyn GenerationClient,
    pub cache: &'a VariantCache,
    pub retry: RetryPolicy,
}

impl<'a> Generator<'a> {
    pub fn new(client: &'a dyn GenerationClient, cache: &'a VariantCache) -> Self {
        Generator {
            client,
            cache,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Returns exactly `n_variants` variants in index order.
    ///
    /// Variant `k` is served from the cache when a record keyed by
    /// (model, prompt hash, temperature, `k`) exists. Missing variants are
    /// requested in one call and appended to the cache.
    pub fn generate(
        &self,
        request: &GenerationRequest,
        prompt: &ChatPrompt,
    ) -> Result<Vec<GeneratedVariant>, CodegenError> {
        if request.n_variants == 0 {
            return Err(CodegenError::InvalidRequest("n_variants must be at least 1".into()));
        }
        if !request.temperature.is_finite() || request.temperature < 0.0 {
            return Err(CodegenError::InvalidRequest(format!(
                "temperature {} is not a finite non-negative number",
                request.temperature
            )));
        }
        let text = prompt.text();
        let keys: Vec<CacheKey> = (0..request.n_variants)
            .map(|k| CacheKey::new(&request.model_id, &text, request.temperature, k))
            .collect();
        let mut raw: Vec<Option<(String, bool)>> = keys
            .iter()
            .map(|key| self.cache.get(key).map(|r| (r.raw_output, true)))
            .collect();

        // Missing indices are fetched as one contiguous run starting at the
        // first gap, so seed indices stay aligned with variant indices.
        if let Some(first_missing) = raw.iter().position(Option::is_none) {
            let n = request.n_variants - first_missing;
            let completions = self.fetch(request, prompt, first_missing, n)?;
            for (offset, completion) in completions.into_iter().enumerate().take(n) {
                let index = first_missing + offset;
                if raw[index].is_some() {
                    continue;
                }
                if completion.trim().is_empty() {
                    return Err(CodegenError::EmptyCompletion { index });
                }
                self.cache.insert(CacheRecord {
                    model_id: request.model_id.clone(),
                    prompt_hash: keys[index].prompt_hash.clone(),
                    temperature: request.temperature,
                    seed_index: index,
                    prompt_version: prompt.version.to_string(),
                    raw_output: completion.clone(),
                    created_at: Utc::now(),
                })?;
                raw[index] = Some((completion, false));
            }
        }

        raw.into_iter()
            .enumerate()
            .map(|(index, slot)| {
                let (raw_output, cache_hit) =
                    slot.ok_or(CodegenError::EmptyCompletion { index })?;
                let (code, extraction_error) = match extract_code(&raw_output, &request.function_name) {
                    Ok(code) => (code, None),
                    Err(e) => (String::new(), Some(e)),
                };
                Ok(GeneratedVariant {
                    index,
                    raw_output,
                    code,
                    cache_hit,
                    extraction_error,
                })
            })
            .collect()
    }

    fn fetch(
        &self,
        request: &GenerationRequest,
        prompt: &ChatPrompt,
        first_seed_index: usize,
        n: usize,
    ) -> Result<Vec<String>, CodegenError> {
        let call = CompletionRequest {
            model_id: &request.model_id,
            prompt,
            temperature: request.temperature,
            n,
            first_seed_index,
            function_name: &request.function_name,
        };
        let attempts = self.retry.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            match self.client.complete(&call) {
                Ok(out) => return Ok(out),
                Err(e) if e.is_retryable() => last = Some(e),
                Err(ClientError::Rejected(msg)) => return Err(CodegenError::Rejected(msg)),
                Err(e) => unreachable!("non-retryable error {e}"),
            }
        }
        Err(match last {
            Some(ClientError::RateLimited(_)) => CodegenError::Quota { attempts },
            Some(e) => CodegenError::Transport {
                attempts,
                message: e.to_string(),
            },
            None => CodegenError::Transport {
                attempts,
                message: "no attempt made".into(),
            },
        })
    }
}

/// Convenience wrapper around [`Generator::generate`] with default retries.
pub fn generate_variants(
    request: &GenerationRequest,
    prompt: &ChatPrompt,
    client: &dyn GenerationClient,
    cache: &VariantCache,
) -> Result<Vec<GeneratedVariant>, CodegenError> {
    Generator::new(client, cache).generate(request, prompt)
}
