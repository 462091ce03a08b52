//! Clinical-note generation against an OpenAI-compatible chat endpoint, with
//! an offline template fallback.
//!
//! [`generate`] sends one prompt. [`generate_corpus`] drives a whole dataset:
//! note, then compact rewrite, per record; generic special cases three to a
//! request; bounded concurrency; an on-disk cache that makes reruns resume
//! where the last one stopped.

mod cache;
mod client;
mod config;
mod corpus;

pub use cache::{cache_key, Cache};
pub use client::{generate, ChatClient, Completer, Completion};
pub use config::{GenConfig, Mode, RetryPolicy, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_SYSTEM_MESSAGE};
pub use corpus::{generate_corpus, generate_corpus_with, CorpusOutput, RecordError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("environment variable `{0}` with the API key is not set")]
    MissingCredentials(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Request { status: u16, body: String },
    #[error("completion was empty")]
    EmptyCompletion,
    #[error("malformed response: {0}")]
    Response(String),
    #[error(transparent)]
    Note(#[from] synsum_core::notegen::NoteError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
