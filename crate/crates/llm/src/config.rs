use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::LlmError;

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_SYSTEM_MESSAGE: &str = "You are a general practitioner, and need to summarize the patient encounter in a clinical note. Your notes are detailed and extensive.";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Llm,
    #[default]
    Offline,
}

/// Exponential backoff: attempt `k` (from 1) waits up to
/// `base_delay * 2^(k-1)`, capped at `max_delay`, scaled by a random factor
/// in `[0.5, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_secs(1), max_delay: Duration::from_secs(60) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32, jitter: f64) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << (attempt.saturating_sub(1)).min(20));
        exp.min(self.max_delay).mul_f64(jitter.clamp(0.0, 1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub endpoint: String,
    /// No default: model availability drifts, so callers pick one.
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub system_message: String,
    pub retry: RetryPolicy,
    pub mode: Mode,
    /// Name of the environment variable holding the API key. The key itself
    /// is never part of the configuration.
    pub api_key_env: String,
    pub concurrency: usize,
    pub request_timeout: Duration,
    pub cache_dir: Option<PathBuf>,
    /// Seeds the assignment of generic special-case notes to records.
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            model: String::new(),
            temperature: 1.2,
            max_tokens: 1000,
            system_message: DEFAULT_SYSTEM_MESSAGE.to_string(),
            retry: RetryPolicy::default(),
            mode: Mode::Offline,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            concurrency: 4,
            request_timeout: Duration::from_secs(120),
            cache_dir: None,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: &str| Err(LlmError::Config(m.to_string()));
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be at least 0");
        }
        if self.max_tokens < 1 {
            return bad("max_tokens must be at least 1");
        }
        if self.concurrency < 1 {
            return bad("concurrency must be at least 1");
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be at least 1");
        }
        if self.mode == Mode::Llm && self.model.trim().is_empty() {
            return bad("a model id is required in llm mode");
        }
        Ok(())
    }

    /// Model label stored with generated bundles.
    pub fn model_label(&self) -> String {
        match self.mode {
            Mode::Llm => self.model.clone(),
            Mode::Offline => "offline-template".to_string(),
        }
    }
}
