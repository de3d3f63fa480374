//! JSON-lines inputs: query corpora, captions, POPE samples and predictions.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use dentist_core::metrics::{normalize_yes_no, ChairAnnotation, PopeSample, YesNo};
use dentist_core::QueryRecord;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{io_error, HarnessError, Result};

/// Parses every non-blank line of `path` as `T`, keeping 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let source = std::fs::read_to_string(path).map_err(io_error(path))?;
    source
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map(|value| (i + 1, value))
                .map_err(|e| HarnessError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn load_query_records(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, record) in read_jsonl::<QueryRecord>(path)? {
        record.validate().map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(HarnessError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Pulls `(id, text)` out of either a plain line or a transcript line, where
/// the text is the final answer.
fn id_and_text(value: &Value, id_keys: &[&str], text_keys: &[&str]) -> Option<(String, String)> {
    let field = |keys: &[&str]| {
        keys.iter().find_map(|k| match value.get(*k)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
    };
    let text = field(text_keys).or_else(|| value.pointer("/final/text")?.as_str().map(str::to_string))?;
    Some((field(id_keys)?, text))
}

fn pairs_from(path: &Path, id_keys: &[&str], text_keys: &[&str]) -> Result<Vec<(String, String)>> {
    read_jsonl::<Value>(path)?
        .into_iter()
        .map(|(line, value)| {
            id_and_text(&value, id_keys, text_keys).ok_or_else(|| HarnessError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected one of {id_keys:?} and one of {text_keys:?} (or final.text)"),
            })
        })
        .collect()
}

/// `(image_id, caption)` pairs. Accepts `{"image_id", "caption"}` lines or
/// transcript lines, whose `image_ref` is the image id.
pub fn load_captions(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    pairs_from(path.as_ref(), &["image_id", "image_ref"], &["caption", "text"])
}

/// `(question_id, answer)` pairs from `{"question_id", "answer"}` lines or
/// transcript lines.
pub fn load_pope_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, YesNo)>> {
    Ok(
        pairs_from(path.as_ref(), &["question_id", "query_id", "id"], &["answer", "text"])?
            .into_iter()
            .map(|(id, text)| (id, normalize_yes_no(&text)))
            .collect(),
    )
}

pub fn load_pope_samples(path: impl AsRef<Path>) -> Result<Vec<PopeSample>> {
    Ok(read_jsonl(path.as_ref())?.into_iter().map(|(_, s)| s).collect())
}

#[derive(Deserialize)]
struct AnnotationLine {
    image_id: String,
    #[serde(alias = "objects")]
    ground_truth_objects: Vec<String>,
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<HashMap<String, ChairAnnotation>> {
    let path = path.as_ref();
    let mut out = HashMap::new();
    for (line, a) in read_jsonl::<AnnotationLine>(path)? {
        let ann = ChairAnnotation::new(a.image_id.clone(), &a.ground_truth_objects);
        if out.insert(a.image_id.clone(), ann).is_some() {
            return Err(HarnessError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: a.image_id,
            });
        }
    }
    Ok(out)
}
