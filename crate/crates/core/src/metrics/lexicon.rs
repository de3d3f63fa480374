//! Object vocabulary used to find object mentions in captions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::MetricsError;

const COCO_LEXICON: &str = include_str!("../../data/coco_lexicon.tsv");

/// Lowercased alphanumeric tokens.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn plural_forms(word: &str) -> Vec<String> {
    let mut forms = vec![format!("{word}s"), format!("{word}es")];
    if let Some(stem) = word.strip_suffix('y') {
        if !stem.ends_with(['a', 'e', 'i', 'o', 'u']) {
            forms.push(format!("{stem}ies"));
        }
    }
    forms
}

/// Canonical object names plus a surface-form → canonical map.
///
/// Every canonical name is also a surface form of itself. Matching also
/// accepts regular plurals (`-s`, `-es`, `-ies`) of each surface form's last
/// word; explicitly listed forms take precedence over generated plurals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectLexicon {
    canonical: BTreeSet<String>,
    synonyms: BTreeMap<String, String>,
    index: HashMap<String, String>,
    max_tokens: usize,
}

impl ObjectLexicon {
    pub fn new<C, S>(canonical: C, synonyms: S) -> Result<Self, MetricsError>
    where
        C: IntoIterator,
        C::Item: AsRef<str>,
        S: IntoIterator<Item = (String, String)>,
    {
        let canonical: BTreeSet<String> = canonical
            .into_iter()
            .map(|c| tokenize(c.as_ref()).join(" "))
            .filter(|c| !c.is_empty())
            .collect();
        let mut map: BTreeMap<String, String> = canonical.iter().map(|c| (c.clone(), c.clone())).collect();

        for (surface, target) in synonyms {
            let surface = tokenize(&surface).join(" ");
            let target = tokenize(&target).join(" ");
            if surface.is_empty() {
                continue;
            }
            if !canonical.contains(&target) {
                return Err(MetricsError::Lexicon {
                    line: 0,
                    message: format!("synonym {surface:?} maps to unknown object {target:?}"),
                });
            }
            if let Some(previous) = map.insert(surface.clone(), target.clone()) {
                if previous != target {
                    return Err(MetricsError::Lexicon {
                        line: 0,
                        message: format!("{surface:?} maps to both {previous:?} and {target:?}"),
                    });
                }
            }
        }

        let mut index: HashMap<String, String> = map.clone().into_iter().collect();
        for (surface, target) in &map {
            let (head, last) = match surface.rsplit_once(' ') {
                Some((head, last)) => (format!("{head} "), last),
                None => (String::new(), surface.as_str()),
            };
            for plural in plural_forms(last) {
                index.entry(format!("{head}{plural}")).or_insert_with(|| target.clone());
            }
        }
        let max_tokens = index.keys().map(|k| k.split(' ').count()).max().unwrap_or(0);

        Ok(Self {
            canonical,
            synonyms: map,
            index,
            max_tokens,
        })
    }

    /// Parses `canonical<TAB>syn1,syn2,...` lines; `#` starts a comment line.
    pub fn from_tsv(source: &str) -> Result<Self, MetricsError> {
        let mut canonical = Vec::new();
        let mut synonyms = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, rest) = line.split_once('\t').unwrap_or((line, ""));
            let name = name.trim();
            if name.is_empty() {
                return Err(MetricsError::Lexicon {
                    line: i + 1,
                    message: "empty canonical name".into(),
                });
            }
            canonical.push(name.to_string());
            synonyms.extend(
                rest.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| (s.to_string(), name.to_string())),
            );
        }
        Self::new(canonical, synonyms)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
        Self::from_tsv(&source)
    }

    /// The 80 COCO object categories with a shipped synonym table.
    pub fn coco() -> Self {
        Self::from_tsv(COCO_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn canonical_objects(&self) -> &BTreeSet<String> {
        &self.canonical
    }

    pub fn contains(&self, object: &str) -> bool {
        self.canonical.contains(object)
    }

    /// Explicit surface forms (including canonical names).
    pub fn synonyms(&self) -> &BTreeMap<String, String> {
        &self.synonyms
    }

    /// Canonical object per mention, in text order. Longest match wins at
    /// each position; matched words are consumed.
    pub fn extract_objects(&self, text: &str) -> Vec<String> {
        let tokens = tokenize(text);
        let mut found = Vec::new();
        let mut i = 0;
        'outer: while i < tokens.len() {
            let longest = self.max_tokens.min(tokens.len() - i);
            for len in (1..=longest).rev() {
                if let Some(object) = self.index.get(&tokens[i..i + len].join(" ")) {
                    found.push(object.clone());
                    i += len;
                    continue 'outer;
                }
            }
            i += 1;
        }
        found
    }
}

/// Free-function form of [`ObjectLexicon::extract_objects`].
pub fn extract_objects(text: &str, lexicon: &ObjectLexicon) -> Vec<String> {
    lexicon.extract_objects(text)
}
