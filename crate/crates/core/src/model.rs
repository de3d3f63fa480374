//! Domain types shared across the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation item: a question about an image, with optional ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub image_ref: String,
    pub query_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Pre-recorded model answer; when present no live LVLM call is needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_answer: Option<String>,
    /// Pre-recorded repeated responses for the repeated-response baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<Vec<String>>,
}

impl QueryRecord {
    pub fn new(id: impl Into<String>, image_ref: impl Into<String>, query_text: impl Into<String>) -> Result<Self> {
        let record = Self {
            id: id.into(),
            image_ref: image_ref.into(),
            query_text: query_text.into(),
            ground_truth: None,
            category: None,
            original_answer: None,
            responses: None,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn with_ground_truth(mut self, ground_truth: impl Into<String>) -> Self {
        self.ground_truth = Some(ground_truth.into());
        self
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn with_original_answer(mut self, answer: impl Into<String>) -> Self {
        self.original_answer = Some(answer.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Precondition("record id must be non-empty"));
        }
        if self.query_text.trim().is_empty() {
            return Err(Error::Precondition("query_text must be non-empty"));
        }
        Ok(())
    }
}

/// Routing class of a query's potential hallucination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Perception,
    Reasoning,
}

impl std::fmt::Display for QueryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryKind::Perception => f.write_str("perception"),
            QueryKind::Reasoning => f.write_str("reasoning"),
        }
    }
}

/// Classification result, keeping the raw judge output for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryClass {
    pub variant: QueryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_note: Option<String>,
}

impl QueryClass {
    pub fn perception() -> Self {
        Self {
            variant: QueryKind::Perception,
            confidence_note: None,
        }
    }

    pub fn reasoning() -> Self {
        Self {
            variant: QueryKind::Reasoning,
            confidence_note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.confidence_note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Corrected,
}

/// A model answer. Iteration 0 is the uncorrected original; corrected
/// answers carry the loop iteration that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub provenance: Provenance,
    pub iteration: u32,
}

impl Answer {
    pub fn original(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            provenance: Provenance::Original,
            iteration: 0,
        }
    }

    /// Panics if `iteration` is 0.
    pub fn corrected(text: impl Into<String>, iteration: u32) -> Self {
        assert!(iteration > 0, "corrected answers start at iteration 1");
        Self {
            text: text.into(),
            provenance: Provenance::Corrected,
            iteration,
        }
    }
}

/// A verification sub-question and the LVLM's answer to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQa {
    pub question: String,
    pub answer: String,
}

/// Knobs of the validation loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Iteration cap of the loop; must be at least 1.
    pub max_iterations: u32,
    pub sub_question_cap: usize,
    /// Extra judge calls allowed when a label cannot be parsed.
    pub judge_retry_limit: u32,
    /// Return the post-check answer instead of the pre-check one on convergence.
    pub return_post_check: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            sub_question_cap: 5,
            judge_retry_limit: 1,
            return_post_check: false,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Precondition("max_iterations must be >= 1"));
        }
        if self.sub_question_cap < 1 {
            return Err(Error::Precondition("sub_question_cap must be >= 1"));
        }
        Ok(())
    }
}
