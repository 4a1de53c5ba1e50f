use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("duplicate iri `{0}`")]
    DuplicateIri(String),

    #[error("invalid ontology: {0}")]
    InvalidOntology(String),

    #[error("missing embedding for key `{0}`")]
    MissingEmbedding(String),

    #[error("dimensionality mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unknown labeling function `{0}`")]
    UnknownFunction(String),

    #[error("metric `{metric}` unavailable for pair {pair}")]
    MetricUnavailable { metric: String, pair: usize },

    #[error("answers do not match the pending batch: {0}")]
    InvalidAnswers(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn json(what: &str, err: serde_json::Error) -> Self {
        Error::Parse {
            context: format!("{what} line {} column {}", err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
