//! Class-specific verification of an answer.
//!
//! Perception answers are checked by generating targeted sub-questions,
//! answering them with the LVLM on the same image and having the judge fold
//! the sub-answers back into a corrected answer. Reasoning answers are checked
//! by re-asking the LVLM with a chain-of-thought prefix and having the judge
//! revise the original against that response.

use futures::future::join_all;
use serde::{Deserialize, Serialize};

use crate::backend::{chat_complete, vqa_answer, ChatModel, VqaModel};
use crate::error::{BackendError, Error, Result};
use crate::model::{QueryClass, QueryKind, SubQa};
use crate::pipeline::Pipeline;
use crate::template::{TemplateName, TemplateSet, ANSWER, COT_OUTPUT, QUERY, SUBQA_LIST};

/// Result of one verification pass plus the evidence behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentOutcome {
    pub corrected_text: String,
    pub class_used: QueryClass,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_qas: Vec<SubQa>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot_output: Option<String>,
}

/// Strips list markers such as `1.`, `2)`, `-`, `*` from one line.
fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    let line = if digits > 0 {
        match line[digits..].chars().next() {
            Some('.' | ')' | ':') => &line[digits + 1..],
            _ => line,
        }
    } else {
        line.strip_prefix(['-', '*', '•', '+']).unwrap_or(line)
    };
    line.trim()
}

/// Parses judge output into questions, one per non-blank line.
pub fn parse_sub_questions(raw: &str, cap: usize) -> Vec<String> {
    raw.lines()
        .map(strip_list_marker)
        .filter(|q| !q.is_empty())
        .take(cap)
        .map(str::to_string)
        .collect()
}

pub async fn generate_sub_questions<J: ChatModel + ?Sized>(
    judge: &J,
    templates: &TemplateSet,
    query: &str,
    answer: &str,
    cap: usize,
) -> Result<Vec<String>> {
    if answer.trim().is_empty() {
        return Err(Error::Precondition("answer must be non-empty"));
    }
    if cap == 0 {
        return Err(Error::Precondition("sub-question cap must be >= 1"));
    }
    let prompt = templates.render(TemplateName::SubQuestions, &[(QUERY, query), (ANSWER, answer)])?;
    let raw = match chat_complete(judge, &prompt).await {
        Ok(raw) => raw,
        Err(BackendError::EmptyCompletion) => return Err(Error::EmptySubQuestions),
        Err(e) => return Err(e.into()),
    };
    let questions = parse_sub_questions(&raw, cap);
    if questions.is_empty() {
        return Err(Error::EmptySubQuestions);
    }
    Ok(questions)
}

/// Answers every question on the image, concurrently, keeping input order.
///
/// On failure the error names the lowest failing 1-based question index.
pub async fn answer_sub_questions<M: VqaModel + ?Sized>(
    lvlm: &M,
    image_ref: &str,
    questions: &[String],
) -> Result<Vec<SubQa>> {
    if questions.is_empty() {
        return Err(Error::Precondition("need at least one sub-question"));
    }
    let answers = join_all(questions.iter().map(|q| vqa_answer(lvlm, image_ref, q))).await;
    questions
        .iter()
        .zip(answers)
        .enumerate()
        .map(|(i, (question, answer))| match answer {
            Ok(answer) => Ok(SubQa {
                question: question.clone(),
                answer,
            }),
            Err(source) => Err(Error::SubQuestion { index: i + 1, source }),
        })
        .collect()
}

/// Numbered `Q:`/`A:` blocks, one pair per entry.
pub fn format_sub_qas(sub_qas: &[SubQa]) -> String {
    sub_qas
        .iter()
        .enumerate()
        .map(|(i, qa)| format!("{}. Q: {}\n   A: {}", i + 1, qa.question, qa.answer))
        .collect::<Vec<_>>()
        .join("\n")
}

pub async fn aggregate_correction<J: ChatModel + ?Sized>(
    judge: &J,
    templates: &TemplateSet,
    query: &str,
    sub_qas: &[SubQa],
    original: &str,
) -> Result<String> {
    if sub_qas.is_empty() {
        return Err(Error::Precondition("need at least one sub-question answer"));
    }
    let listing = format_sub_qas(sub_qas);
    let prompt = templates.render(
        TemplateName::Aggregate,
        &[(QUERY, query), (ANSWER, original), (SUBQA_LIST, &listing)],
    )?;
    Ok(chat_complete(judge, &prompt).await?)
}

/// Generate, answer and aggregate sub-questions.
pub async fn verify_perception(
    pipeline: &Pipeline,
    image_ref: &str,
    query: &str,
    answer: &str,
    class: &QueryClass,
) -> Result<TreatmentOutcome> {
    let questions = generate_sub_questions(
        pipeline.judge(),
        pipeline.templates(),
        query,
        answer,
        pipeline.config().sub_question_cap,
    )
    .await
    .map_err(|e| e.context("generating sub-questions"))?;
    let sub_qas = answer_sub_questions(pipeline.sub_answerer(), image_ref, &questions)
        .await
        .map_err(|e| e.context("answering sub-questions"))?;
    let corrected_text = aggregate_correction(pipeline.judge(), pipeline.templates(), query, &sub_qas, answer)
        .await
        .map_err(|e| e.context("aggregating sub-answers"))?;
    Ok(TreatmentOutcome {
        corrected_text,
        class_used: class.clone(),
        sub_qas,
        cot_output: None,
    })
}

/// Chain-of-thought re-query followed by judge revision.
pub async fn verify_reasoning(
    pipeline: &Pipeline,
    image_ref: &str,
    query: &str,
    answer: &str,
    class: &QueryClass,
) -> Result<TreatmentOutcome> {
    if query.trim().is_empty() || answer.trim().is_empty() {
        return Err(Error::Precondition("query and answer must be non-empty"));
    }
    let templates = pipeline.templates();
    let cot_query = templates.render(TemplateName::CotQuery, &[(QUERY, query)])?;
    let cot_output = vqa_answer(pipeline.lvlm(), image_ref, &cot_query)
        .await
        .map_err(|e| Error::from(e).context("chain-of-thought query"))?;
    let prompt = templates.render(
        TemplateName::ReviseFromCot,
        &[(QUERY, query), (ANSWER, answer), (COT_OUTPUT, &cot_output)],
    )?;
    let corrected_text = chat_complete(pipeline.judge(), &prompt)
        .await
        .map_err(|e| Error::from(e).context("revising from chain of thought"))?;
    Ok(TreatmentOutcome {
        corrected_text,
        class_used: class.clone(),
        sub_qas: Vec::new(),
        cot_output: Some(cot_output),
    })
}

/// One verification pass, routed strictly by `class`.
pub async fn verify_once(
    pipeline: &Pipeline,
    image_ref: &str,
    query: &str,
    answer: &str,
    class: &QueryClass,
) -> Result<TreatmentOutcome> {
    match class.variant {
        QueryKind::Perception => verify_perception(pipeline, image_ref, query, answer, class).await,
        QueryKind::Reasoning => verify_reasoning(pipeline, image_ref, query, answer, class).await,
    }
}
