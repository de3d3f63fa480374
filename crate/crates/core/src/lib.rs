//! Hallucination mitigation for vision-language model answers.
//!
//! Each query is classified as perception or reasoning, the answer is
//! verified with the matching treatment (sub-question checks or a
//! chain-of-thought re-query), and the verification repeats until the answer
//! stops changing. The [`metrics`] module scores outputs with CHAIR and POPE.

pub mod backend;
pub mod classify;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod template;
pub mod treatment;
pub mod validation;

pub use backend::{BackendError, ChatModel, ScriptedBackend, VqaModel};
pub use classify::{classify_query, parse_class_label};
pub use error::{Error, Result, TemplateError};
pub use model::{Answer, LoopConfig, Provenance, QueryClass, QueryKind, QueryRecord, SubQa};
pub use pipeline::Pipeline;
pub use template::{load_templates, PromptTemplate, TemplateName, TemplateSet};
pub use treatment::{verify_once, TreatmentOutcome};
pub use validation::{dentist_loop, similar, IterationRecord, Termination, VerificationTranscript};
