//! The validation loop.
//!
//! The answer is re-verified until one pass leaves it semantically
//! unchanged. On convergence the loop returns the answer that went *into*
//! the converging pass; if the cap is reached without convergence it returns
//! the output of the first pass, so corrections cannot snowball.

use serde::{Deserialize, Serialize};

use crate::backend::{chat_complete, BackendError, ChatModel};
use crate::classify::classify_query;
use crate::error::{Error, Result};
use crate::model::{Answer, LoopConfig, QueryClass, QueryRecord};
use crate::pipeline::Pipeline;
use crate::template::{TemplateName, TemplateSet, ANSWER_A, ANSWER_B, QUERY};
use crate::treatment::{verify_once, TreatmentOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub index: u32,
    pub input_answer: String,
    pub output_answer: String,
    pub similar: bool,
    pub treatment: TreatmentOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Error,
}

/// Audit trail of one loop run.
///
/// On `Error` the partial iterations are kept, `error` holds the message and
/// `final_answer` is the uncorrected original.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationTranscript {
    pub query_id: String,
    /// `None` only when classification itself failed.
    pub class: Option<QueryClass>,
    pub original: Answer,
    pub iterations: Vec<IterationRecord>,
    #[serde(rename = "final")]
    pub final_answer: Answer,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reads a yes/no verdict from the first word of the judge output.
pub fn parse_yes_no_verdict(raw: &str) -> Option<bool> {
    let first = raw
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())?
        .to_lowercase();
    match first.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Asks the judge whether two answers say the same thing.
///
/// Unparseable verdicts are retried up to `judge_retry_limit` times and then
/// count as "not similar".
pub async fn similar<J: ChatModel + ?Sized>(
    judge: &J,
    templates: &TemplateSet,
    query: &str,
    a: &str,
    b: &str,
    config: &LoopConfig,
) -> Result<bool> {
    if a.trim().is_empty() || b.trim().is_empty() {
        return Err(Error::Precondition("answers to compare must be non-empty"));
    }
    let prompt = templates.render(TemplateName::Similar, &[(QUERY, query), (ANSWER_A, a), (ANSWER_B, b)])?;
    for _ in 0..=config.judge_retry_limit {
        let raw = match chat_complete(judge, &prompt).await {
            Ok(raw) => raw,
            Err(BackendError::EmptyCompletion) => continue,
            Err(e) => return Err(e.into()),
        };
        if let Some(verdict) = parse_yes_no_verdict(&raw) {
            return Ok(verdict);
        }
    }
    Ok(false)
}

/// Runs classification once, then the verification loop on `original`.
///
/// Never fails: errors end the loop with [`Termination::Error`].
pub async fn dentist_loop(pipeline: &Pipeline, record: &QueryRecord, original: &str) -> VerificationTranscript {
    let mut transcript = VerificationTranscript {
        query_id: record.id.clone(),
        class: None,
        original: Answer::original(original),
        iterations: Vec::new(),
        final_answer: Answer::original(original),
        termination: Termination::Error,
        error: None,
    };
    if let Err(e) = run_loop(pipeline, record, &mut transcript).await {
        transcript.termination = Termination::Error;
        transcript.final_answer = transcript.original.clone();
        transcript.error = Some(e.to_string());
    }
    transcript
}

async fn run_loop(pipeline: &Pipeline, record: &QueryRecord, transcript: &mut VerificationTranscript) -> Result<()> {
    let config = pipeline.config();
    config.validate()?;
    record.validate()?;
    if transcript.original.text.trim().is_empty() {
        return Err(Error::Precondition("original answer must be non-empty"));
    }
    let query = record.query_text.as_str();

    let class = classify_query(pipeline.judge(), pipeline.templates(), query, config)
        .await
        .map_err(|e| e.context("classifying query"))?;
    transcript.class = Some(class.clone());

    let mut latest = transcript.original.clone();
    let mut first_pass: Option<Answer> = None;

    for index in 1..=config.max_iterations {
        let treatment = verify_once(pipeline, &record.image_ref, query, &latest.text, &class)
            .await
            .map_err(|e| e.context("verifying answer"))?;
        let checked = Answer::corrected(treatment.corrected_text.clone(), index);
        if index == 1 {
            first_pass = Some(checked.clone());
        }

        let verdict = similar(
            pipeline.judge(),
            pipeline.templates(),
            query,
            &latest.text,
            &checked.text,
            config,
        )
        .await;
        transcript.iterations.push(IterationRecord {
            index,
            input_answer: latest.text.clone(),
            output_answer: checked.text.clone(),
            similar: matches!(verdict, Ok(true)),
            treatment,
        });

        if verdict.map_err(|e| e.context("checking convergence"))? {
            transcript.final_answer = if config.return_post_check { checked } else { latest };
            transcript.termination = Termination::Converged;
            return Ok(());
        }
        latest = checked;
    }

    transcript.final_answer = first_pass.expect("max_iterations >= 1");
    transcript.termination = Termination::MaxIterations;
    Ok(())
}
