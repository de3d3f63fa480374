//! Query classification into perception or reasoning.

use crate::backend::{chat_complete, ChatModel};
use crate::error::{Error, Result};
use crate::model::{LoopConfig, QueryClass, QueryKind};
use crate::template::{TemplateName, TemplateSet, QUERY};

/// Prefix of the audit note attached when the judge never gave a usable label.
pub const FALLBACK_NOTE: &str = "fallback: unparseable judge output";

/// Finds the class label in raw judge output.
///
/// Returns `None` when neither or both of "perception" / "reasoning" occur.
pub fn parse_class_label(raw: &str) -> Option<QueryKind> {
    let lower = raw.to_lowercase();
    let mut perception = false;
    let mut reasoning = false;
    for word in lower.split(|c: char| !c.is_alphanumeric()) {
        match word {
            "perception" => perception = true,
            "reasoning" => reasoning = true,
            _ => {}
        }
    }
    match (perception, reasoning) {
        (true, false) => Some(QueryKind::Perception),
        (false, true) => Some(QueryKind::Reasoning),
        _ => None,
    }
}

/// Asks the judge which kind of query this is.
///
/// Unparseable output is retried up to `judge_retry_limit` times, then the
/// query is routed to perception with a note explaining the fallback.
pub async fn classify_query<J: ChatModel + ?Sized>(
    judge: &J,
    templates: &TemplateSet,
    query: &str,
    config: &LoopConfig,
) -> Result<QueryClass> {
    if query.trim().is_empty() {
        return Err(Error::Precondition("query must be non-empty"));
    }
    let prompt = templates.render(TemplateName::Classify, &[(QUERY, query)])?;

    let mut last = String::new();
    for _ in 0..=config.judge_retry_limit {
        last = match chat_complete(judge, &prompt).await {
            Ok(text) => text,
            Err(crate::BackendError::EmptyCompletion) => String::new(),
            Err(e) => return Err(e.into()),
        };
        if let Some(kind) = parse_class_label(&last) {
            return Ok(QueryClass {
                variant: kind,
                confidence_note: Some(last),
            });
        }
    }
    tracing::debug!(output = %last, "classification fell back to perception");
    Ok(QueryClass::perception().with_note(format!("{FALLBACK_NOTE}: {last:?}")))
}

/// True when the class came from the fallback rule rather than the judge.
pub fn is_fallback(class: &QueryClass) -> bool {
    class
        .confidence_note
        .as_deref()
        .is_some_and(|n| n.starts_with(FALLBACK_NOTE))
}
