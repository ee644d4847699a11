//! Self-contained bundle documents: one corpus with every run, the active
//! atlas version, its layout, and the latest stability report.

use evatlas_core::layout::MapLayout;
use evatlas_core::topic::{ResponseWarning, RunConfig};
use evatlas_core::{AssignmentTable, Corpus, StabilityReport, TopicModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::StoreError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunError {
    pub kind: String,
    pub message: String,
}

impl RunError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }

    /// Failures of the remote model rather than of the request.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self.kind.as_str(),
            "LlmUnavailable" | "LlmRequest" | "MalformedModelResponse"
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub corpus_id: String,
    pub status: RunStatus,
    pub config: RunConfig,
    /// Digest of the model (timestamp masked) and assignments; equal for
    /// equal outputs.
    pub digest: Option<String>,
    pub model: Option<TopicModel>,
    pub assignments: Option<AssignmentTable>,
    #[serde(default)]
    pub warnings: Vec<ResponseWarning>,
    /// Verbatim LLM reply, kept even when parsing failed.
    pub raw_reply: Option<String>,
    pub error: Option<RunError>,
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format_version: u32,
    pub corpus: Corpus,
    pub runs: Vec<RunRecord>,
    pub active_run: Option<String>,
    pub atlas_version: Option<String>,
    pub layout: Option<MapLayout>,
    pub stability: Option<StabilityReport>,
}

impl Bundle {
    /// Parses a bundle document, rejecting format versions this build does
    /// not know.
    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let raw: Value =
            serde_json::from_str(text).map_err(|e| StoreError::BadRequest(format!("bundle: {e}")))?;
        let version = raw
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| StoreError::BadRequest("bundle: missing format_version".into()))?;
        if version > u64::from(FORMAT_VERSION) {
            return Err(StoreError::BadRequest(format!(
                "bundle format_version {version} is newer than supported version {FORMAT_VERSION}"
            )));
        }
        serde_json::from_value(raw).map_err(|e| StoreError::BadRequest(format!("bundle: {e}")))
    }

    pub fn run(&self, run_id: &str) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.run_id == run_id)
    }
}

/// The bundle as a JSON value with every timestamp field nulled, for
/// comparing bundles from different sessions.
pub fn masked(bundle: &Bundle) -> Value {
    let mut value = serde_json::to_value(bundle).expect("bundle serializes");
    mask_timestamps(&mut value);
    value
}

fn mask_timestamps(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if matches!(key.as_str(), "timestamp" | "created_at" | "ingested_at") {
                    *v = Value::Null;
                } else {
                    mask_timestamps(v);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(mask_timestamps),
        _ => {}
    }
}
