//! Corpus runs: bounded concurrency, a single transcript writer, a manifest.

use std::collections::BTreeMap;
use std::future::Future;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use dentist_core::backend::{vqa_answer, BackendIdentity};
use dentist_core::{
    classify_query, dentist_loop, Answer, Pipeline, QueryClass, QueryRecord, Termination, VerificationTranscript,
};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::io::AsyncWriteExt;

use crate::config::RunConfig;
use crate::corpus::load_query_records;
use crate::error::{io_error, Result};

pub const TRANSCRIPT_SCHEMA: &str = "dentist.transcript/v1";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const PARTIAL_SUFFIX: &str = ".partial";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CLASSES_FILE: &str = "classes.jsonl";

/// One line of the transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub schema: String,
    pub image_ref: String,
    #[serde(flatten)]
    pub transcript: VerificationTranscript,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl TranscriptLine {
    pub fn new(record: &QueryRecord, transcript: VerificationTranscript) -> Self {
        Self {
            schema: TRANSCRIPT_SCHEMA.to_string(),
            image_ref: record.image_ref.clone(),
            transcript,
            category: record.category.clone(),
            ground_truth: record.ground_truth.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub processed: u64,
    pub converged: u64,
    pub exhausted: u64,
    pub errored: u64,
}

impl RunCounts {
    pub fn record(&mut self, termination: Termination) {
        self.processed += 1;
        match termination {
            Termination::Converged => self.converged += 1,
            Termination::MaxIterations => self.exhausted += 1,
            Termination::Error => self.errored += 1,
        }
    }

    pub fn reconciles(&self) -> bool {
        self.processed == self.converged + self.exhausted + self.errored
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: RunConfig,
    pub template_hashes: BTreeMap<String, String>,
    pub backends: BTreeMap<String, BackendIdentity>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub counts: RunCounts,
}

impl RunManifest {
    fn begin(config: &RunConfig, pipeline: &Pipeline) -> Self {
        let now = Utc::now();
        Self {
            run_id: uuid::Uuid::new_v4().to_string(),
            config: config.clone(),
            template_hashes: pipeline.templates().hashes(),
            backends: pipeline
                .identities()
                .into_iter()
                .map(|(role, id)| (role.to_string(), id))
                .collect(),
            started_at: now,
            finished_at: now,
            counts: RunCounts::default(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json + "\n").map_err(io_error(&path))?;
        Ok(path)
    }
}

/// Serializes lines into `<file>.partial` as they arrive, then writes the
/// sorted final file and drops the partial one.
pub(crate) struct LineWriter<K> {
    partial_path: PathBuf,
    final_path: PathBuf,
    partial: tokio::fs::File,
    lines: Vec<(K, String)>,
}

impl<K: Ord> LineWriter<K> {
    pub(crate) async fn create(final_path: PathBuf) -> Result<Self> {
        let mut partial_path = final_path.clone().into_os_string();
        partial_path.push(PARTIAL_SUFFIX);
        let partial_path = PathBuf::from(partial_path);
        let partial = tokio::fs::File::create(&partial_path)
            .await
            .map_err(io_error(&partial_path))?;
        Ok(Self {
            partial_path,
            final_path,
            partial,
            lines: Vec::new(),
        })
    }

    pub(crate) async fn push<T: Serialize>(&mut self, key: K, value: &T) -> Result<()> {
        let mut line = serde_json::to_string(value).expect("transcript serializes");
        line.push('\n');
        self.partial
            .write_all(line.as_bytes())
            .await
            .map_err(io_error(&self.partial_path))?;
        self.partial.flush().await.map_err(io_error(&self.partial_path))?;
        self.lines.push((key, line));
        Ok(())
    }

    pub(crate) async fn finish(mut self) -> Result<PathBuf> {
        self.lines.sort_by(|a, b| a.0.cmp(&b.0));
        let body: String = self.lines.into_iter().map(|(_, l)| l).collect();
        tokio::fs::write(&self.final_path, body)
            .await
            .map_err(io_error(&self.final_path))?;
        drop(self.partial);
        tokio::fs::remove_file(&self.partial_path)
            .await
            .map_err(io_error(&self.partial_path))?;
        Ok(self.final_path)
    }
}

/// Runs `work` over `items` with at most `width` futures in flight; results
/// come back in completion order.
pub(crate) fn bounded<I, F, Fut>(items: I, width: usize, work: F) -> impl Stream<Item = Fut::Output>
where
    I: IntoIterator,
    F: FnMut(I::Item) -> Fut,
    Fut: Future,
{
    stream::iter(items).map(work).buffer_unordered(width.max(1))
}

/// Transcript for a record whose original answer could not be obtained.
fn failed_before_loop(record: &QueryRecord, error: String) -> VerificationTranscript {
    VerificationTranscript {
        query_id: record.id.clone(),
        class: None,
        original: Answer::original(""),
        iterations: Vec::new(),
        final_answer: Answer::original(""),
        termination: Termination::Error,
        error: Some(error),
    }
}

/// Ŷ from the record when present, otherwise from the LVLM, then the loop.
pub async fn correct_record(pipeline: &Pipeline, record: &QueryRecord) -> VerificationTranscript {
    let original = match &record.original_answer {
        Some(answer) => answer.clone(),
        None => match vqa_answer(pipeline.lvlm(), &record.image_ref, &record.query_text).await {
            Ok(answer) => answer,
            Err(e) => return failed_before_loop(record, format!("obtaining original answer: {e}")),
        },
    };
    dentist_loop(pipeline, record, &original).await
}

pub async fn run_correction(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let pipeline = config.build_pipeline()?;
    let records = load_query_records(&config.corpus)?;
    run_correction_with(config, &pipeline, &records).await
}

/// [`run_correction`] with an already-built pipeline and corpus.
pub async fn run_correction_with(
    config: &RunConfig,
    pipeline: &Pipeline,
    records: &[QueryRecord],
) -> Result<RunManifest> {
    config.validate()?;
    std::fs::create_dir_all(&config.out).map_err(io_error(&config.out))?;
    let mut manifest = RunManifest::begin(config, pipeline);
    let mut writer = LineWriter::create(config.out.join(TRANSCRIPTS_FILE)).await?;
    let mut results = std::pin::pin!(bounded(records, config.concurrency, |record| async move {
        (record, correct_record(pipeline, record).await)
    }));
    while let Some((record, transcript)) = results.next().await {
        manifest.counts.record(transcript.termination);
        if let Some(e) = &transcript.error {
            tracing::warn!(query = %record.id, "{e}");
        }
        let line = TranscriptLine::new(record, transcript);
        writer.push(record.id.clone(), &line).await?;
    }

    writer.finish().await?;
    manifest.finished_at = Utc::now();
    manifest.write(&config.out)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationLine {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<QueryClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Classification only; one line per record in `classes.jsonl`.
pub async fn run_classification(config: &RunConfig) -> Result<Vec<ClassificationLine>> {
    config.validate()?;
    let pipeline = config.build_pipeline()?;
    let records = load_query_records(&config.corpus)?;
    std::fs::create_dir_all(&config.out).map_err(io_error(&config.out))?;
    let mut writer = LineWriter::create(config.out.join(CLASSES_FILE)).await?;
    let mut out = Vec::with_capacity(records.len());
    let pipeline = &pipeline;

    let mut results = std::pin::pin!(bounded(&records, config.concurrency, |record| async move {
        let result = classify_query(
            pipeline.judge(),
            pipeline.templates(),
            &record.query_text,
            pipeline.config(),
        )
        .await;
        match result {
            Ok(class) => ClassificationLine {
                id: record.id.clone(),
                class: Some(class),
                error: None,
            },
            Err(e) => ClassificationLine {
                id: record.id.clone(),
                class: None,
                error: Some(e.to_string()),
            },
        }
    }));
    while let Some(line) = results.next().await {
        writer.push(line.id.clone(), &line).await?;
        out.push(line);
    }

    writer.finish().await?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Reads a transcript file back.
pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<TranscriptLine>> {
    Ok(crate::corpus::read_jsonl(path.as_ref())?
        .into_iter()
        .map(|(_, line)| line)
        .collect())
}
