//! Synthetic respiratory patient records from an expert-defined Bayesian
//! network.
//!
//! The crate covers the whole tabular side: network definitions and
//! validation ([`network`]), ancestral sampling ([`sampler`]), exact
//! inference ([`inference`]), parameter learning ([`learning`]), CSV
//! datasets ([`dataset`]), symptom-prediction scores ([`eval`]) and the
//! prompt plans that turn a record into a clinical-note request
//! ([`notegen`]).

pub mod dataset;
pub mod eval;
pub mod factor;
pub mod inference;
pub mod learning;
pub mod network;
pub mod notegen;
pub mod par;
pub mod reference;
pub mod sampler;

pub use dataset::{Dataset, DatasetError, Manifest};
pub use eval::{evaluate, EvalReport};
pub use inference::{EvidenceSetting, InferenceEngine, InferenceError};
pub use learning::{learn_network, learn_network_with, LearnConfig, LearnError, LearnedNetwork};
pub use network::{assignment, Assignment, Cpd, Network, NetworkError, NetworkSpec, VariableDef, VariableKind};
pub use notegen::{MentionPolicy, NoteBundle, NoteContext, PromptPlan, Route, Templates};
pub use par::Execution;
pub use sampler::{sample_dataset, sample_dataset_with, PatientRecord, SampleConfig, SampleError};
