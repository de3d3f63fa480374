//! Deterministic scripted backend for offline runs and tests.
//!
//! A script is a list of rules. A request matches a rule when
//!
//! * `exact`, if set, equals the whitespace-normalized request text,
//! * every string in `contains` occurs in the normalized request text, and
//! * `image`, if set, equals the request's image reference (such rules only
//!   ever match VQA requests).
//!
//! Rules with `exact` are tried first, then the rest in declaration order.
//! A rule with several responses returns them in turn and then repeats the
//! last one. Every request is appended to a call log.
//!
//! Script files are JSON:
//!
//! ```json
//! {
//!   "strict": true,
//!   "rules": [
//!     { "contains": ["perception or reasoning", "How many apples"], "response": "perception" },
//!     { "image": "img1.jpg", "exact": "How many apples?", "responses": ["Three apples."] }
//!   ]
//! }
//! ```

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::Deserialize;

use super::{BackendIdentity, ChatModel, VqaModel};
use crate::error::BackendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedCall {
    Chat { prompt: String },
    Vqa { image_ref: String, question: String },
}

impl ScriptedCall {
    /// The prompt or question text of the call.
    pub fn text(&self) -> &str {
        match self {
            ScriptedCall::Chat { prompt } => prompt,
            ScriptedCall::Vqa { question, .. } => question,
        }
    }
}

#[derive(Debug)]
pub struct ScriptRule {
    exact: Option<String>,
    contains: Vec<String>,
    image: Option<String>,
    responses: Vec<String>,
    hits: AtomicUsize,
}

impl ScriptRule {
    fn new(exact: Option<String>, contains: Vec<String>, image: Option<String>, responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "script rule needs at least one response");
        Self {
            exact: exact.map(|e| normalize(&e)),
            contains: contains.iter().map(|c| normalize(c)).collect(),
            image,
            responses,
            hits: AtomicUsize::new(0),
        }
    }

    fn matches(&self, text: &str, image_ref: Option<&str>) -> bool {
        if let Some(image) = &self.image {
            if image_ref != Some(image.as_str()) {
                return false;
            }
        }
        if let Some(exact) = &self.exact {
            if exact != text {
                return false;
            }
        }
        self.contains.iter().all(|c| text.contains(c.as_str()))
    }

    fn next_response(&self) -> String {
        let hit = self.hits.fetch_add(1, Ordering::SeqCst);
        self.responses[hit.min(self.responses.len() - 1)].clone()
    }
}

/// Collapses runs of whitespace to one space and trims.
pub(crate) fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug)]
pub struct ScriptedBackend {
    name: String,
    strict: bool,
    default_response: String,
    rules: Vec<ScriptRule>,
    log: Mutex<Vec<ScriptedCall>>,
}

impl ScriptedBackend {
    /// Every request must match a rule.
    pub fn strict(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            strict: true,
            default_response: String::new(),
            rules: Vec::new(),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Unmatched requests get `default_response`.
    pub fn lenient(name: impl Into<String>, default_response: impl Into<String>) -> Self {
        Self {
            strict: false,
            default_response: default_response.into(),
            ..Self::strict(name)
        }
    }

    pub fn on_exact(self, key: impl Into<String>, response: impl Into<String>) -> Self {
        self.rule(ScriptRule::new(Some(key.into()), vec![], None, vec![response.into()]))
    }

    pub fn on_contains(self, needles: &[&str], response: impl Into<String>) -> Self {
        self.on_contains_seq(needles, &[&response.into()])
    }

    pub fn on_contains_seq(self, needles: &[&str], responses: &[&str]) -> Self {
        self.rule(ScriptRule::new(
            None,
            needles.iter().map(|s| s.to_string()).collect(),
            None,
            responses.iter().map(|s| s.to_string()).collect(),
        ))
    }

    /// VQA rule: exact question on a given image.
    pub fn on_image(
        self,
        image_ref: impl Into<String>,
        question: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        self.rule(ScriptRule::new(
            Some(question.into()),
            vec![],
            Some(image_ref.into()),
            vec![response.into()],
        ))
    }

    /// VQA rule: question containing all `needles`, on any image.
    pub fn on_question_contains(self, needles: &[&str], response: impl Into<String>) -> Self {
        self.on_contains(needles, response)
    }

    pub fn rule(mut self, rule: ScriptRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn from_json_str(name: impl Into<String>, source: &str) -> Result<Self, String> {
        let file: ScriptFile = serde_json::from_str(source).map_err(|e| e.to_string())?;
        let mut backend = if file.strict {
            Self::strict(name)
        } else {
            Self::lenient(name, file.default_response.unwrap_or_default())
        };
        for (i, rule) in file.rules.into_iter().enumerate() {
            let responses = match (rule.response, rule.responses) {
                (Some(one), None) => vec![one],
                (None, Some(many)) if !many.is_empty() => many,
                _ => return Err(format!("rule {i}: give exactly one of response/responses")),
            };
            backend = backend.rule(ScriptRule::new(
                rule.exact,
                rule.contains.into_vec(),
                rule.image,
                responses,
            ));
        }
        Ok(backend)
    }

    pub fn from_json_file(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json_str(name, &source).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    /// Number of logged calls whose text contains `needle`.
    pub fn count_containing(&self, needle: &str) -> usize {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.text().contains(needle))
            .count()
    }

    fn respond(&self, call: ScriptedCall, image_ref: Option<&str>) -> Result<String, BackendError> {
        let text = normalize(call.text());
        self.log.lock().unwrap().push(call);

        let exact_first = self.rules.iter().filter(|r| r.exact.is_some());
        let others = self.rules.iter().filter(|r| r.exact.is_none());
        match exact_first.chain(others).find(|r| r.matches(&text, image_ref)) {
            Some(rule) => Ok(rule.next_response()),
            None if self.strict => Err(BackendError::ScriptMiss(match image_ref {
                Some(image) => format!("[{image}] {text}"),
                None => text,
            })),
            None => Ok(self.default_response.clone()),
        }
    }
}

#[async_trait]
impl ChatModel for ScriptedBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("scripted", &self.name)
    }

    async fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.respond(
            ScriptedCall::Chat {
                prompt: prompt.to_string(),
            },
            None,
        )
    }
}

#[async_trait]
impl VqaModel for ScriptedBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity::new("scripted", &self.name)
    }

    async fn answer(&self, image_ref: &str, question: &str) -> Result<String, BackendError> {
        self.respond(
            ScriptedCall::Vqa {
                image_ref: image_ref.to_string(),
                question: question.to_string(),
            },
            Some(image_ref),
        )
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default = "yes")]
    strict: bool,
    #[serde(default)]
    default_response: Option<String>,
    #[serde(default)]
    rules: Vec<RuleFile>,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    exact: Option<String>,
    #[serde(default)]
    contains: OneOrMany,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    responses: Option<Vec<String>>,
}

#[derive(Deserialize, Default)]
#[serde(untagged)]
enum OneOrMany {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::None => vec![],
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}
