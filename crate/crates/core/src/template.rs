//! Prompt templates with `{name}` placeholders.
//!
//! `{{` and `}}` render as literal braces. Each template accepts only the
//! placeholders listed by [`TemplateName::allowed_placeholders`]; anything else
//! is rejected when the template is constructed.
//!
//! Override files are TOML, one table per template name:
//!
//! ```toml
//! [P_c]
//! text = """
//! Is this a perception or a reasoning question? {query}
//! """
//! ```
//!
//! A bare string (`P_c = "..."`) is accepted as well. Templates missing from
//! the file keep their built-in defaults.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::TemplateError;

pub const QUERY: &str = "query";
pub const ANSWER: &str = "answer";
pub const SUBQA_LIST: &str = "subqa_list";
pub const COT_OUTPUT: &str = "cot_output";
pub const ANSWER_A: &str = "answer_a";
pub const ANSWER_B: &str = "answer_b";

/// Every placeholder name any template may use.
pub const DOCUMENTED_PLACEHOLDERS: [&str; 6] = [QUERY, ANSWER, SUBQA_LIST, COT_OUTPUT, ANSWER_A, ANSWER_B];

/// The literal chain-of-thought prefix.
pub const COT_PREFIX: &str = "Let's think step by step.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateName {
    /// Query classification.
    #[serde(rename = "P_c")]
    Classify,
    /// Sub-question generation.
    #[serde(rename = "P_s")]
    SubQuestions,
    /// Sub-answer aggregation and correction.
    #[serde(rename = "P_a")]
    Aggregate,
    /// Chain-of-thought query prefix.
    #[serde(rename = "P_t")]
    CotQuery,
    /// Correction from a chain-of-thought response.
    #[serde(rename = "P_r")]
    ReviseFromCot,
    /// Convergence check between two answers.
    #[serde(rename = "P_sim")]
    Similar,
}

impl TemplateName {
    pub const ALL: [TemplateName; 6] = [
        TemplateName::Classify,
        TemplateName::SubQuestions,
        TemplateName::Aggregate,
        TemplateName::CotQuery,
        TemplateName::ReviseFromCot,
        TemplateName::Similar,
    ];

    pub fn key(self) -> &'static str {
        match self {
            TemplateName::Classify => "P_c",
            TemplateName::SubQuestions => "P_s",
            TemplateName::Aggregate => "P_a",
            TemplateName::CotQuery => "P_t",
            TemplateName::ReviseFromCot => "P_r",
            TemplateName::Similar => "P_sim",
        }
    }

    /// Placeholders the pipeline binds when rendering this template.
    pub fn allowed_placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateName::Classify => &[QUERY],
            TemplateName::SubQuestions => &[QUERY, ANSWER],
            TemplateName::Aggregate => &[QUERY, ANSWER, SUBQA_LIST],
            TemplateName::CotQuery => &[QUERY],
            TemplateName::ReviseFromCot => &[QUERY, ANSWER, COT_OUTPUT],
            TemplateName::Similar => &[QUERY, ANSWER_A, ANSWER_B],
        }
    }

    pub fn default_text(self) -> &'static str {
        match self {
            TemplateName::Classify => DEFAULT_CLASSIFY,
            TemplateName::SubQuestions => DEFAULT_SUB_QUESTIONS,
            TemplateName::Aggregate => DEFAULT_AGGREGATE,
            TemplateName::CotQuery => DEFAULT_COT_QUERY,
            TemplateName::ReviseFromCot => DEFAULT_REVISE_FROM_COT,
            TemplateName::Similar => DEFAULT_SIMILAR,
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for TemplateName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateName::ALL
            .into_iter()
            .find(|n| n.key() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

fn parse(text: &str) -> Result<Vec<Segment>, TemplateError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = text.char_indices().peekable();

    while let Some((offset, c)) = chars.next() {
        match c {
            '{' if matches!(chars.peek(), Some((_, '{'))) => {
                chars.next();
                literal.push('{');
            }
            '}' if matches!(chars.peek(), Some((_, '}'))) => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let mut name = String::new();
                let mut closed = false;
                for (_, n) in chars.by_ref() {
                    if n == '}' {
                        closed = true;
                        break;
                    }
                    name.push(n);
                }
                if !closed {
                    return Err(TemplateError::Syntax {
                        offset,
                        message: "unclosed '{'".into(),
                    });
                }
                if !is_identifier(&name) {
                    return Err(TemplateError::Syntax {
                        offset,
                        message: format!("invalid placeholder name {name:?}"),
                    });
                }
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Placeholder(name));
            }
            '}' => {
                return Err(TemplateError::Syntax {
                    offset,
                    message: "unmatched '}' (use '}}' for a literal brace)".into(),
                })
            }
            other => literal.push(other),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn substitute<S: AsRef<str>>(segments: &[Segment], bindings: &HashMap<&str, S>) -> Result<String, TemplateError> {
    let mut out = String::new();
    for segment in segments {
        match segment {
            Segment::Literal(text) => out.push_str(text),
            Segment::Placeholder(name) => {
                let value = bindings
                    .get(name.as_str())
                    .ok_or_else(|| TemplateError::MissingBinding(name.clone()))?;
                out.push_str(value.as_ref());
            }
        }
    }
    Ok(out)
}

/// Substitutes every `{name}` in `text` with its binding. Bound values are
/// inserted verbatim and never re-scanned for placeholders.
pub fn render_template<S: AsRef<str>>(text: &str, bindings: &HashMap<&str, S>) -> Result<String, TemplateError> {
    substitute(&parse(text)?, bindings)
}

/// A validated prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: TemplateName,
    text: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(name: TemplateName, text: impl Into<String>) -> Result<Self, TemplateError> {
        let text = text.into();
        let segments = parse(&text)?;
        let allowed = name.allowed_placeholders();
        for segment in &segments {
            if let Segment::Placeholder(p) = segment {
                if !allowed.contains(&p.as_str()) {
                    return Err(TemplateError::UnknownPlaceholder {
                        template: name.key().to_string(),
                        name: p.clone(),
                    });
                }
            }
        }
        Ok(Self { name, text, segments })
    }

    pub fn builtin(name: TemplateName) -> Self {
        Self::new(name, name.default_text()).expect("built-in templates are valid")
    }

    pub fn name(&self) -> TemplateName {
        self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Placeholder(p) => Some(p.as_str()),
            Segment::Literal(_) => None,
        })
    }

    pub fn render<S: AsRef<str>>(&self, bindings: &HashMap<&str, S>) -> Result<String, TemplateError> {
        substitute(&self.segments, bindings)
    }

    /// Hex SHA-256 of the raw template text.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

/// All six templates used by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateName, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TemplateEntry {
    Text(String),
    Table { text: String },
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = TemplateName::ALL
            .into_iter()
            .map(|n| (n, PromptTemplate::builtin(n)))
            .collect();
        Self { templates }
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        &self.templates[&name]
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.name(), template);
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    pub fn render(&self, name: TemplateName, bindings: &[(&'static str, &str)]) -> Result<String, TemplateError> {
        let map: HashMap<&str, &str> = bindings.iter().copied().collect();
        self.get(name).render(&map)
    }

    /// Name → SHA-256 of each template's text.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.iter().map(|t| (t.name().key().to_string(), t.sha256())).collect()
    }

    /// Parses an override document; absent templates fall back to defaults.
    pub fn from_toml_str(source: &str) -> Result<Self, TemplateError> {
        let entries: BTreeMap<String, TemplateEntry> = toml::from_str(source).map_err(|e| TemplateError::Parse {
            line: e.span().map(|s| line_of(source, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;

        let mut set = Self::builtin();
        for (key, entry) in entries {
            let name = key
                .parse::<TemplateName>()
                .map_err(|name| TemplateError::UnknownTemplateName {
                    line: key_line(source, &name),
                    name,
                })?;
            let text = match entry {
                TemplateEntry::Text(t) | TemplateEntry::Table { text: t } => t,
            };
            set.set(PromptTemplate::new(name, text)?);
        }
        Ok(set)
    }
}

/// Reads a template override file.
pub fn load_templates(path: impl AsRef<Path>) -> Result<TemplateSet, TemplateError> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
    TemplateSet::from_toml_str(&source)
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

fn key_line(source: &str, key: &str) -> usize {
    source
        .lines()
        .position(|line| {
            let line = line.trim_start();
            let line = line.strip_prefix('[').unwrap_or(line).trim_start();
            let line = line
                .strip_prefix('"')
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix('"'))
                .or_else(|| line.strip_prefix(key));
            matches!(line.map(str::trim_start), Some(rest) if rest.starts_with(['=', ']', '.']))
        })
        .map(|i| i + 1)
        .unwrap_or(1)
}

/// Renders the chain-of-thought query with the built-in prefix.
pub fn make_cot_query(query: &str) -> Result<String, crate::Error> {
    if query.is_empty() {
        return Err(crate::Error::Precondition("query must be non-empty"));
    }
    Ok(format!("{COT_PREFIX} {query}"))
}

// Built-in defaults. They satisfy each template's contract; the wording is
// our own.

const DEFAULT_CLASSIFY: &str = "\
You will be shown a question that a user asked about an image. Decide which \
ability answering it mainly requires.

perception: the answer can be read directly from the visible content of the \
image, such as objects, attributes, colors, counts, positions, text in the \
image, or a description of the scene.
reasoning: the answer requires inference beyond what is directly visible, \
such as intentions, causes, predictions, social relations, occupations, or \
commonsense and knowledge-based conclusions.

Question: {query}

Reply with exactly one word: perception or reasoning.";

const DEFAULT_SUB_QUESTIONS: &str = "\
A vision-language model answered a question about an image. The answer may \
contain hallucinations: objects, attributes, counts, or relations that are \
not actually in the image.

Question: {query}
Answer: {answer}

Pick out the key visual claims in the answer (objects, quantities, colors, \
positions, actions) and write short, specific verification questions about \
the image that check those claims. Each question must be answerable by \
looking at the image alone.

Write one verification question per line and nothing else.";

const DEFAULT_AGGREGATE: &str = "\
A vision-language model answered a question about an image. Short \
verification questions were then asked about the same image. Their answers \
are listed below and are more reliable than the original answer.

Question: {query}
Original answer: {answer}

Verification questions and answers:
{subqa_list}

Correct the original answer so that it agrees with the verification answers. \
Fix or remove any object, count, attribute, or relation that they \
contradict, and keep everything else as it is. If nothing is contradicted, \
return the original answer unchanged.

Output only the corrected answer.";

const DEFAULT_COT_QUERY: &str = "Let's think step by step. {query}";

const DEFAULT_REVISE_FROM_COT: &str = "\
A vision-language model answered a question about an image. The same model \
was then asked to think step by step, and its step-by-step response is given \
below. That response shows the visual evidence and the reasoning behind the \
answer.

Question: {query}
Original answer: {answer}
Step-by-step response: {cot_output}

Check whether the conclusion of the original answer follows from the \
evidence in the step-by-step response. If it does not, revise the original \
answer so that its conclusion matches that evidence. If it does, return the \
original answer unchanged.

Output only the revised answer.";

const DEFAULT_SIMILAR: &str = "\
Two answers were given to the same question about an image.

Answer A: {answer_a}
Answer B: {answer_b}

Do the two answers state the same thing, with no significant difference in \
the objects, attributes, counts, relations, or conclusions they contain? \
Differences in wording alone do not count.

Reply with Yes or No.";
