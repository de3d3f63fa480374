use thiserror::Error;

/// Failures raised by a text-generating backend or the response cache.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("scripted backend has no entry for request: {0}")]
    ScriptMiss(String),

    #[error("backend returned an empty completion")]
    EmptyCompletion,

    #[error("image unavailable: {0}")]
    ImageUnavailable(String),

    #[error("cache store I/O error: {0}")]
    Store(String),

    #[error("empty request: {0}")]
    EmptyRequest(&'static str),
}

/// Template parsing, loading and rendering failures.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no binding for placeholder {{{0}}}")]
    MissingBinding(String),

    #[error("template {template} uses unknown placeholder {{{name}}}")]
    UnknownPlaceholder { template: String, name: String },

    #[error("unknown template name {name:?} (line {line})")]
    UnknownTemplateName { name: String, line: usize },

    #[error("template syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("template file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("template file I/O error: {0}")]
    Io(String),
}

/// Pipeline-level error covering classification, treatment and the loop.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error(transparent)]
    Template(#[from] TemplateError),

    #[error("judge produced no parseable sub-question")]
    EmptySubQuestions,

    #[error("sub-question {index} failed: {source}")]
    SubQuestion { index: usize, source: BackendError },

    #[error("precondition violated: {0}")]
    Precondition(&'static str),

    #[error("{context}: {source}")]
    Context {
        context: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn context(self, context: &'static str) -> Self {
        Error::Context {
            context,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
