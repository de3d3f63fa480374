//! CHAIR object hallucination scores.
//!
//! A mention is hallucinated when its canonical object is not among the
//! image's ground-truth objects. `chair_i` is the hallucinated share of all
//! mentions; `chair_s` is the share of sentences (or, with `caption_level`,
//! of captions) containing at least one hallucinated mention. Empty
//! denominators give 0.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::lexicon::{tokenize, ObjectLexicon};
use super::{ratio, MetricsError};

const ABBREVIATIONS: [&str; 13] = [
    "dr", "mr", "mrs", "ms", "st", "jr", "sr", "vs", "prof", "mt", "e.g", "i.e", "approx",
];

/// Splits on `.`, `!` or `?` followed by whitespace or end of text, except
/// after a known abbreviation. Segments are trimmed; empty ones are dropped.
pub fn split_sentences(caption: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = caption.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for (k, &(offset, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = chars.get(k + 1).is_none_or(|(_, n)| n.is_whitespace());
        if !at_boundary {
            continue;
        }
        if c == '.' && is_abbreviation(&caption[start..offset]) {
            continue;
        }
        let end = offset + c.len_utf8();
        push_trimmed(&mut sentences, &caption[start..end]);
        start = end;
    }
    push_trimmed(&mut sentences, &caption[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, segment: &str) {
    let segment = segment.trim();
    if !segment.is_empty() && segment.chars().any(|c| c.is_alphanumeric()) {
        out.push(segment.to_string());
    }
}

fn is_abbreviation(before_dot: &str) -> bool {
    let word = before_dot
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChairAnnotation {
    pub image_id: String,
    pub ground_truth_objects: BTreeSet<String>,
}

impl ChairAnnotation {
    pub fn new<I, S>(image_id: impl Into<String>, objects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            image_id: image_id.into(),
            ground_truth_objects: objects.into_iter().map(|o| o.as_ref().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChairOptions {
    /// Count hallucinated captions instead of hallucinated sentences.
    pub caption_level: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChairReport {
    pub chair_s: f64,
    pub chair_i: f64,
    pub n_sentences: u64,
    pub n_hallucinated_sentences: u64,
    pub n_mentions: u64,
    pub n_hallucinated_mentions: u64,
}

impl ChairReport {
    pub fn from_counts(
        n_sentences: u64,
        n_hallucinated_sentences: u64,
        n_mentions: u64,
        n_hallucinated_mentions: u64,
    ) -> Self {
        Self {
            chair_s: ratio(n_hallucinated_sentences, n_sentences),
            chair_i: ratio(n_hallucinated_mentions, n_mentions),
            n_sentences,
            n_hallucinated_sentences,
            n_mentions,
            n_hallucinated_mentions,
        }
    }
}

#[derive(Default)]
struct Counts {
    units: u64,
    hallucinated_units: u64,
    mentions: u64,
    hallucinated_mentions: u64,
}

/// Corpus-level CHAIR over `(image_id, caption)` pairs.
pub fn chair_scores(
    captions: &[(String, String)],
    annotations: &HashMap<String, ChairAnnotation>,
    lexicon: &ObjectLexicon,
    options: ChairOptions,
) -> Result<ChairReport, MetricsError> {
    let mut counts = Counts::default();
    for (image_id, caption) in captions {
        let annotation = annotations
            .get(image_id)
            .ok_or_else(|| MetricsError::MissingAnnotation(image_id.clone()))?;
        let truth = normalized_truth(annotation, lexicon)?;
        let is_hallucinated = |object: &String| !truth.contains(object);

        if options.caption_level {
            let mentions = lexicon.extract_objects(caption);
            let bad = mentions.iter().filter(|m| is_hallucinated(m)).count() as u64;
            counts.units += 1;
            counts.hallucinated_units += u64::from(bad > 0);
            counts.mentions += mentions.len() as u64;
            counts.hallucinated_mentions += bad;
        } else {
            for sentence in split_sentences(caption) {
                let mentions = lexicon.extract_objects(&sentence);
                let bad = mentions.iter().filter(|m| is_hallucinated(m)).count() as u64;
                counts.units += 1;
                counts.hallucinated_units += u64::from(bad > 0);
                counts.mentions += mentions.len() as u64;
                counts.hallucinated_mentions += bad;
            }
        }
    }
    Ok(ChairReport::from_counts(
        counts.units,
        counts.hallucinated_units,
        counts.mentions,
        counts.hallucinated_mentions,
    ))
}

fn normalized_truth(annotation: &ChairAnnotation, lexicon: &ObjectLexicon) -> Result<BTreeSet<String>, MetricsError> {
    annotation
        .ground_truth_objects
        .iter()
        .map(|o| {
            let name = tokenize(o).join(" ");
            if lexicon.contains(&name) {
                Ok(name)
            } else {
                Err(MetricsError::UnknownObject {
                    image_id: annotation.image_id.clone(),
                    object: o.clone(),
                })
            }
        })
        .collect()
}
