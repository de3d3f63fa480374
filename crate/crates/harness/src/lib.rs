//! Corpus runner for the dentist hallucination-mitigation engine: loads
//! query corpora, runs correction and repeated-response baselines with
//! bounded concurrency, and writes transcripts, manifests and metric reports.

pub mod baseline;
pub mod config;
pub mod corpus;
pub mod error;
pub mod report;
pub mod run;

pub use baseline::{direct_rejection, run_repeated_baseline, BaselineReport, CorrectnessOracle};
pub use config::{BackendConfig, RunConfig, RunMode};
pub use corpus::load_query_records;
pub use error::{HarnessError, Result};
pub use report::{render_report, write_report, Report, ReportFormat};
pub use run::{run_classification, run_correction, RunCounts, RunManifest, TranscriptLine};
