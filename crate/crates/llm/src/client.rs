use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use synsum_core::notegen::Usage;

use crate::config::GenConfig;
use crate::LlmError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub attempts: u32,
}

/// Anything that turns a user prompt into a completion.
pub trait Completer: Sync {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError>;
}

/// Blocking client for an OpenAI-compatible `chat/completions` endpoint.
pub struct ChatClient {
    config: GenConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish()
    }
}

enum Outcome {
    Done(Completion),
    Retry { message: String, wait: Option<Duration> },
    Fail(LlmError),
}

impl ChatClient {
    pub fn new(config: GenConfig, api_key: String) -> Result<Self, LlmError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        Ok(ChatClient { config, api_key, agent })
    }

    /// Reads the key from the variable named by `config.api_key_env`.
    pub fn from_env(config: GenConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| LlmError::MissingCredentials(config.api_key_env.clone()))?;
        Self::new(config, key)
    }

    pub fn config(&self) -> &GenConfig {
        &self.config
    }

    /// The exact JSON body sent for `prompt`.
    pub fn request_body(&self, prompt: &str) -> String {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": self.config.system_message},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
        .to_string()
    }

    fn attempt(&self, body: &str, attempts: u32) -> Outcome {
        let started = Instant::now();
        let sent = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Outcome::Retry { message: e.to_string(), wait: None },
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Outcome::Retry { message: e.to_string(), wait: None },
        };
        if status == 429 || status >= 500 {
            return Outcome::Retry { message: format!("HTTP {status}: {text}"), wait: retry_after };
        }
        if !(200..300).contains(&status) {
            return Outcome::Fail(LlmError::Request { status, body: text });
        }
        match parse_completion(&text) {
            Ok((content, prompt_tokens, completion_tokens)) => {
                if content.trim().is_empty() {
                    return Outcome::Fail(LlmError::EmptyCompletion);
                }
                Outcome::Done(Completion {
                    text: content,
                    usage: Usage { prompt_tokens, completion_tokens, latency_ms: started.elapsed().as_millis() as u64 },
                    attempts,
                })
            }
            Err(e) => Outcome::Fail(e),
        }
    }
}

fn parse_completion(text: &str) -> Result<(String, u64, u64), LlmError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| LlmError::Response(e.to_string()))?;
    let content = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| LlmError::Response("no choices[0].message.content".into()))?;
    let tokens = |k: &str| v["usage"][k].as_u64().unwrap_or(0);
    Ok((content.to_string(), tokens("prompt_tokens"), tokens("completion_tokens")))
}

impl Completer for ChatClient {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let body = self.request_body(prompt);
        let retry = self.config.retry;
        let mut last = String::new();
        for attempt in 1..=retry.max_attempts {
            match self.attempt(&body, attempt) {
                Outcome::Done(c) => return Ok(c),
                Outcome::Fail(e) => return Err(e),
                Outcome::Retry { message, wait } => {
                    last = message;
                    if attempt < retry.max_attempts {
                        let backoff = retry.delay(attempt, rand::thread_rng().gen_range(0.5..1.0));
                        std::thread::sleep(wait.map_or(backoff, |w| w.min(retry.max_delay)));
                    }
                }
            }
        }
        Err(LlmError::Transport { attempts: retry.max_attempts, message: last })
    }
}

/// One chat completion for `prompt`, with the key taken from the environment.
pub fn generate(prompt: &str, config: &GenConfig) -> Result<Completion, LlmError> {
    ChatClient::from_env(config.clone())?.complete(prompt)
}
