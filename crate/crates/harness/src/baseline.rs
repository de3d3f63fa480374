//! Repeated-response baselines: direct rejection (DR) and repeated
//! correction (RC) over `repeats` responses per sample.

use std::pin::pin;

use dentist_core::backend::vqa_answer;
use dentist_core::metrics::{accuracy_by_category, normalize_yes_no, CategoryAccuracy, PopeReport, YesNo};
use dentist_core::{dentist_loop, Pipeline, QueryRecord, Termination};
use futures::StreamExt;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunMode};
use crate::corpus::load_query_records;
use crate::error::{io_error, HarnessError, Result};
use crate::run::{bounded, LineWriter, TranscriptLine, TRANSCRIPTS_FILE};

pub const BASELINE_FILE: &str = "baseline.json";
const UNCATEGORIZED: &str = "uncategorized";

/// Decides whether a response answers a sample correctly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectnessOracle {
    /// Both sides reduced to yes/no.
    #[default]
    YesNo,
    /// Case-insensitive equality after trimming.
    Exact,
    /// The ground truth appears in the response, case-insensitively.
    Contains,
}

impl CorrectnessOracle {
    pub fn is_correct(self, response: &str, ground_truth: &str) -> bool {
        match self {
            Self::YesNo => normalize_yes_no(response) == normalize_yes_no(ground_truth),
            Self::Exact => response.trim().to_lowercase() == ground_truth.trim().to_lowercase(),
            Self::Contains => response.to_lowercase().contains(&ground_truth.trim().to_lowercase()),
        }
    }
}

/// Outcome of the rejection rule over one sample's responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Lowest index of a response judged correct.
    pub selected: Option<usize>,
    pub correct: bool,
}

/// A sample is incorrect only if every response is; otherwise the first
/// correct response is kept.
pub fn direct_rejection(responses: &[String], ground_truth: &str, oracle: CorrectnessOracle) -> Rejection {
    let selected = responses.iter().position(|r| oracle.is_correct(r, ground_truth));
    Rejection {
        selected,
        correct: selected.is_some(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub repeat: u32,
    /// The raw response for DR, the corrected one for RC.
    pub text: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub responses: Vec<ScoredResponse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<u32>,
    /// DR verdict; for RC, whether every corrected response is correct.
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub mode: RunMode,
    pub repeats: u32,
    pub oracle: CorrectnessOracle,
    pub samples: u64,
    /// Scored units: one per sample for DR, one per response for RC.
    pub scored: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// Samples that could not be scored at all.
    pub errored: u64,
    /// RC loops that ended in an error; their response is scored unchanged.
    pub loop_errors: u64,
    pub by_category: CategoryAccuracy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pope: Option<PopeReport>,
    pub outcomes: Vec<SampleOutcome>,
}

pub async fn run_repeated_baseline(config: &RunConfig, oracle: CorrectnessOracle) -> Result<BaselineReport> {
    config.validate()?;
    let pipeline = config.build_pipeline()?;
    let records = load_query_records(&config.corpus)?;
    run_repeated_baseline_with(config, &pipeline, &records, oracle).await
}

async fn collect_responses(pipeline: &Pipeline, record: &QueryRecord, repeats: usize) -> Result<Vec<String>, String> {
    if let Some(recorded) = &record.responses {
        if recorded.len() < repeats {
            return Err(format!("{} recorded responses, {repeats} required", recorded.len()));
        }
        return Ok(recorded[..repeats].to_vec());
    }
    let mut out = Vec::with_capacity(repeats);
    for k in 0..repeats {
        let text = vqa_answer(pipeline.lvlm(), &record.image_ref, &record.query_text)
            .await
            .map_err(|e| format!("sampling response {}: {e}", k + 1))?;
        out.push(text);
    }
    Ok(out)
}

struct Worked {
    outcome: SampleOutcome,
    transcripts: Vec<TranscriptLine>,
    loop_errors: u64,
}

async fn work_sample(
    pipeline: &Pipeline,
    record: &QueryRecord,
    mode: RunMode,
    repeats: usize,
    oracle: CorrectnessOracle,
) -> Worked {
    let mut outcome = SampleOutcome {
        id: record.id.clone(),
        category: record.category.clone(),
        responses: Vec::new(),
        selected: None,
        correct: false,
        error: None,
    };
    let worked = |outcome| Worked {
        outcome,
        transcripts: Vec::new(),
        loop_errors: 0,
    };
    let Some(truth) = record.ground_truth.as_deref() else {
        outcome.error = Some("record has no ground_truth".into());
        return worked(outcome);
    };
    let responses = match collect_responses(pipeline, record, repeats).await {
        Ok(r) => r,
        Err(e) => {
            outcome.error = Some(e);
            return worked(outcome);
        }
    };

    match mode {
        RunMode::RepeatedCorrection => {
            let mut transcripts = Vec::with_capacity(repeats);
            let mut loop_errors = 0;
            for (k, response) in responses.iter().enumerate() {
                let mut attempt = record.clone();
                attempt.id = format!("{}#{}", record.id, k + 1);
                let transcript = dentist_loop(pipeline, &attempt, response).await;
                loop_errors += u64::from(transcript.termination == Termination::Error);
                let text = transcript.final_answer.text.clone();
                outcome.responses.push(ScoredResponse {
                    repeat: k as u32 + 1,
                    correct: oracle.is_correct(&text, truth),
                    text,
                });
                transcripts.push(TranscriptLine::new(&attempt, transcript));
            }
            outcome.correct = outcome.responses.iter().all(|r| r.correct);
            Worked {
                outcome,
                transcripts,
                loop_errors,
            }
        }
        _ => {
            let rejection = direct_rejection(&responses, truth, oracle);
            outcome.responses = responses
                .into_iter()
                .enumerate()
                .map(|(k, text)| ScoredResponse {
                    repeat: k as u32 + 1,
                    correct: oracle.is_correct(&text, truth),
                    text,
                })
                .collect();
            outcome.selected = rejection.selected.map(|i| i as u32 + 1);
            outcome.correct = rejection.correct;
            worked(outcome)
        }
    }
}

/// [`run_repeated_baseline`] with an already-built pipeline and corpus.
pub async fn run_repeated_baseline_with(
    config: &RunConfig,
    pipeline: &Pipeline,
    records: &[QueryRecord],
    oracle: CorrectnessOracle,
) -> Result<BaselineReport> {
    config.validate()?;
    if config.mode == RunMode::Correct {
        return Err(HarnessError::Config(
            "baseline mode must be direct_rejection or repeated_correction".into(),
        ));
    }
    std::fs::create_dir_all(&config.out).map_err(io_error(&config.out))?;
    let repeats = config.repeats as usize;
    let rc = config.mode == RunMode::RepeatedCorrection;
    if repeats > 1 && records.iter().any(|r| r.responses.is_none()) {
        tracing::info!("sampling {repeats} live responses per record; identical requests may be served from cache");
    }

    let mut writer = if rc {
        Some(LineWriter::create(config.out.join(TRANSCRIPTS_FILE)).await?)
    } else {
        None
    };
    let mut outcomes = Vec::with_capacity(records.len());
    let mut loop_errors = 0;
    let mut results = pin!(bounded(records, config.concurrency, |record| {
        work_sample(pipeline, record, config.mode, repeats, oracle)
    }));
    while let Some(w) = results.next().await {
        if let Some(writer) = writer.as_mut() {
            for (k, line) in w.transcripts.iter().enumerate() {
                writer.push((w.outcome.id.clone(), k), line).await?;
            }
        }
        loop_errors += w.loop_errors;
        outcomes.push(w.outcome);
    }
    if let Some(writer) = writer {
        writer.finish().await?;
    }
    outcomes.sort_by(|a, b| a.id.cmp(&b.id));

    let report = summarize(config.mode, config.repeats, oracle, outcomes, records, loop_errors);
    crate::report::write_report(
        &crate::report::Report::Baseline(report.clone()),
        crate::report::ReportFormat::Json,
        &config.out.join(BASELINE_FILE),
    )?;
    Ok(report)
}

fn summarize(
    mode: RunMode,
    repeats: u32,
    oracle: CorrectnessOracle,
    outcomes: Vec<SampleOutcome>,
    records: &[QueryRecord],
    loop_errors: u64,
) -> BaselineReport {
    let truth_of = |id: &str| {
        records
            .iter()
            .find(|r| r.id == id)
            .and_then(|r| r.ground_truth.as_deref())
            .unwrap_or_default()
    };
    let mut units: Vec<(String, bool)> = Vec::new();
    let mut pope_pairs: Vec<(YesNo, YesNo)> = Vec::new();
    let mut errored = 0;
    for o in &outcomes {
        if o.error.is_some() {
            errored += 1;
            continue;
        }
        let category = o.category.clone().unwrap_or_else(|| UNCATEGORIZED.to_string());
        let label = normalize_yes_no(truth_of(&o.id));
        if mode == RunMode::RepeatedCorrection {
            for r in &o.responses {
                units.push((category.clone(), r.correct));
                pope_pairs.push((normalize_yes_no(&r.text), label));
            }
        } else {
            units.push((category, o.correct));
            let chosen = o.selected.map_or(0, |s| s as usize - 1);
            pope_pairs.push((normalize_yes_no(&o.responses[chosen].text), label));
        }
    }
    let by_category = accuracy_by_category(units);
    BaselineReport {
        mode,
        repeats,
        oracle,
        samples: outcomes.len() as u64,
        scored: by_category.total,
        correct: by_category.correct,
        accuracy: by_category.overall,
        errored,
        loop_errors,
        pope: (oracle == CorrectnessOracle::YesNo).then(|| PopeReport::from_pairs(pope_pairs)),
        by_category,
        outcomes,
    }
}
