//! Hallucination metrics: CHAIR, POPE and per-category accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod chair;
pub mod lexicon;
pub mod pope;

pub use chair::{chair_scores, split_sentences, ChairAnnotation, ChairOptions, ChairReport};
pub use lexicon::{extract_objects, ObjectLexicon};
pub use pope::{normalize_yes_no, pope_scores, pope_scores_by_setting, PopeReport, PopeSample, PopeSetting, YesNo};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no annotation for image {0}")]
    MissingAnnotation(String),

    #[error("image {image_id}: ground-truth object {object:?} is not in the lexicon")]
    UnknownObject { image_id: String, object: String },

    #[error("predictions and samples do not align: {0}")]
    IdMismatch(String),

    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

/// `num / den`, or 0 when `den` is 0.
pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub per_category: BTreeMap<String, CategoryScore>,
    /// Micro-average over all records.
    pub overall: f64,
    pub correct: u64,
    pub total: u64,
}

pub fn accuracy_by_category<I, S>(records: I) -> CategoryAccuracy
where
    I: IntoIterator<Item = (S, bool)>,
    S: Into<String>,
{
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for (category, correct) in records {
        let entry = counts.entry(category.into()).or_default();
        entry.0 += u64::from(correct);
        entry.1 += 1;
    }
    let correct = counts.values().map(|c| c.0).sum();
    let total = counts.values().map(|c| c.1).sum();
    CategoryAccuracy {
        per_category: counts
            .into_iter()
            .map(|(k, (c, t))| {
                (
                    k,
                    CategoryScore {
                        correct: c,
                        total: t,
                        accuracy: ratio(c, t),
                    },
                )
            })
            .collect(),
        overall: ratio(correct, total),
        correct,
        total,
    }
}
