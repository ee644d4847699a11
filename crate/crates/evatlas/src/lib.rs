//! File-backed service around `evatlas-core`: bundle documents, the corpus
//! store, the LLM client, the HTTP API and the demo corpus.

pub mod bundle;
pub mod demo;
pub mod llm;
pub mod server;
pub mod store;

use evatlas_core::layout::LayoutError;
use evatlas_core::{AtlasError, IngestError, QueryError, StabilityError, TopicError, ValidationReport};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use bundle::{Bundle, RunRecord, RunStatus, FORMAT_VERSION};
pub use store::{MapPayload, Store};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("corpus has {} validation error(s)", .0.errors.len())]
    InvalidCorpus(ValidationReport),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error("unknown {kind} `{id}`")]
    NotFound { kind: &'static str, id: String },
    #[error("{0}")]
    Conflict(String),
    #[error("LLM backend failure: {0}")]
    Backend(String),
    #[error("storage: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

impl StoreError {
    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        StoreError::NotFound { kind, id: id.into() }
    }

    /// Stable machine-readable name of the error.
    pub fn kind(&self) -> &'static str {
        match self {
            StoreError::BadRequest(_) => "BadRequest",
            StoreError::Ingest(e) => match e {
                IngestError::MissingRequiredColumn(_) => "MissingRequiredColumn",
                IngestError::EmptyCorpus => "EmptyCorpus",
                IngestError::MalformedCsv(_) => "MalformedCsv",
                IngestError::DuplicateColumn(_) => "DuplicateColumn",
            },
            StoreError::InvalidCorpus(_) => "InvalidCorpus",
            StoreError::Query(e) => match e {
                QueryError::UnknownFacet(_) => "UnknownFacet",
                QueryError::UnknownValue { .. } => "UnknownValue",
                QueryError::UnknownTopic(_) => "UnknownTopic",
                QueryError::SameFacet(_) => "SameFacet",
            },
            StoreError::Topic(e) => topic_error_kind(e),
            StoreError::Stability(e) => match e {
                StabilityError::DomainMismatch => "DomainMismatch",
                StabilityError::TooFewRuns { .. } => "TooFewRuns",
            },
            StoreError::Layout(e) => match e {
                LayoutError::CanvasTooSmall { .. } => "CanvasTooSmall",
                LayoutError::InvalidCanvas => "InvalidCanvas",
            },
            StoreError::Atlas(e) => match e {
                AtlasError::InconsistentInputs(_) => "InconsistentInputs",
                AtlasError::UnknownStudy(_) => "UnknownStudy",
            },
            StoreError::NotFound { .. } => "NotFound",
            StoreError::Conflict(_) => "Conflict",
            StoreError::Backend(_) => "BackendFailure",
            StoreError::Io(_) => "Storage",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            StoreError::NotFound { .. } | StoreError::Atlas(AtlasError::UnknownStudy(_)) => 404,
            StoreError::Conflict(_) => 409,
            StoreError::Backend(_) => 502,
            StoreError::Io(_) | StoreError::Atlas(AtlasError::InconsistentInputs(_)) => 500,
            _ => 400,
        }
    }

    /// `{"error": kind, "message": text}` plus a `report` for invalid corpora.
    pub fn to_json(&self) -> Value {
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let StoreError::InvalidCorpus(report) = self {
            body["report"] = serde_json::to_value(report).unwrap_or(Value::Null);
        }
        body
    }
}

pub fn topic_error_kind(e: &TopicError) -> &'static str {
    match e {
        TopicError::PromptTooLarge { .. } => "PromptTooLarge",
        TopicError::MalformedModelResponse(_) => "MalformedModelResponse",
        TopicError::EmptyText => "EmptyText",
        TopicError::EmptyModel => "EmptyModel",
        TopicError::InvalidConfig(_) => "InvalidConfig",
    }
}

/// Current UTC time in RFC 3339, the only clock read in the workspace.
pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Compact JSON as served and printed: struct fields in declaration order,
/// maps in key order, so equal values give equal bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("serializable value")
}
