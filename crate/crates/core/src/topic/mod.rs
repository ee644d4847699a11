//! Topic models over a corpus: the shared types, the LLM prompt/reply
//! contract, the deterministic lexical backend and descriptor-based
//! assignment.

mod assign;
mod kmeans;
mod lexical;
mod prompt;
mod response;
pub mod tokenize;
mod vector;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Study};

pub use assign::assign_studies;
pub use lexical::{extract_topics_lexical, LexicalBackend};
pub use prompt::{build_topic_prompt, INSTRUCTION_PREFIX};
pub use response::{parse_topic_response, ParsedResponse, ResponseWarning};

/// Reserved topic for studies that share no vocabulary with any topic.
/// It never appears in [`TopicModel::topics`] and is not counted against
/// the configured topic range.
pub const UNCLASSIFIED_ID: &str = "unclassified";
pub const UNCLASSIFIED_LABEL: &str = "Unclassified";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopicError {
    #[error("serialized study records need {size} characters, budget is {budget}")]
    PromptTooLarge { size: usize, budget: usize },
    #[error("model reply has no parseable structured block: {0}")]
    MalformedModelResponse(String),
    #[error("no study has text in the configured fields")]
    EmptyText,
    #[error("topic model has no topics")]
    EmptyModel,
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Llm,
    Lexical,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Llm => "llm",
            Backend::Lexical => "lexical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Title,
    Abstract,
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.min..=self.max).contains(&n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub backend: Backend,
    pub topic_range: CountRange,
    pub subtopic_range: CountRange,
    pub seed: u64,
    /// Sampling temperature; only sent to the LLM backend.
    pub temperature: f64,
    pub text_fields: Vec<TextField>,
    /// Model identifier for the LLM backend.
    pub model: Option<String>,
    /// Primary plus alternates listed per assignment.
    pub candidates: usize,
    /// An alternate scoring at least this fraction of the primary is shown
    /// as a co-label.
    pub co_label_ratio: f64,
    /// Character budget for serialized study records in the prompt.
    pub prompt_budget: usize,
    /// Abstract length kept when the budget overflows.
    pub abstract_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Lexical,
            topic_range: CountRange::new(6, 8),
            subtopic_range: CountRange::new(2, 3),
            seed: 0,
            temperature: 0.0,
            text_fields: alloc::vec![TextField::Title, TextField::Abstract],
            model: None,
            candidates: 3,
            co_label_ratio: 0.8,
            prompt_budget: 300_000,
            abstract_cap: 600,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TopicError> {
        let bad = |msg: &str| Err(TopicError::InvalidConfig(msg.into()));
        if self.topic_range.min == 0 || self.topic_range.min > self.topic_range.max {
            return bad("topic_range must satisfy 1 <= min <= max");
        }
        if self.subtopic_range.min == 0 || self.subtopic_range.min > self.subtopic_range.max {
            return bad("subtopic_range must satisfy 1 <= min <= max");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if self.text_fields.is_empty() {
            return bad("text_fields must name at least one field");
        }
        if self.candidates == 0 {
            return bad("candidates must be >= 1");
        }
        Ok(())
    }

    /// Concatenation of the configured text fields of a study.
    pub fn study_text(&self, study: &Study) -> String {
        let mut text = String::new();
        for field in &self.text_fields {
            let part = match field {
                TextField::Title => &study.title,
                TextField::Abstract => &study.abstract_text,
            };
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(part);
        }
        text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtopic {
    pub subtopic_id: String,
    pub label: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub label: String,
    pub description: String,
    pub subtopics: Vec<Subtopic>,
    pub palette_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub backend: Backend,
    pub model: Option<String>,
    pub seed: u64,
    pub temperature: Option<f64>,
    /// Stamped by the caller; the core never reads a clock.
    pub timestamp: Option<String>,
    pub text_fields: Vec<TextField>,
}

impl RunMeta {
    pub fn from_config(config: &RunConfig) -> Self {
        let llm = config.backend == Backend::Llm;
        Self {
            backend: config.backend,
            model: if llm { config.model.clone() } else { None },
            seed: config.seed,
            temperature: if llm { Some(config.temperature) } else { None },
            timestamp: None,
            text_fields: config.text_fields.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: Vec<Topic>,
    pub run_meta: RunMeta,
}

impl TopicModel {
    pub fn topic(&self, topic_id: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }

    pub fn topic_index(&self, topic_id: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.topic_id == topic_id)
    }

    /// Label for a topic id, including the reserved unclassified topic.
    pub fn label_of(&self, topic_id: &str) -> Option<&str> {
        if topic_id == UNCLASSIFIED_ID {
            return Some(UNCLASSIFIED_LABEL);
        }
        self.topic(topic_id).map(|t| t.label.as_str())
    }

    /// Parent topic of a subtopic id.
    pub fn subtopic_parent(&self, subtopic_id: &str) -> Option<&Topic> {
        self.topics
            .iter()
            .find(|t| t.subtopics.iter().any(|s| s.subtopic_id == subtopic_id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternate {
    pub topic_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub study_id: String,
    pub topic_id: String,
    pub subtopic_id: Option<String>,
    pub score: f64,
    /// Ranked best-first, primary excluded.
    pub alternates: Vec<Alternate>,
}

impl Assignment {
    /// Alternates strong enough to be shown next to the primary topic.
    pub fn co_labels(&self, ratio: f64) -> impl Iterator<Item = &Alternate> {
        let floor = ratio * self.score;
        self.alternates
            .iter()
            .filter(move |a| a.score > 0.0 && a.score >= floor)
    }
}

/// One assignment per study, in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentTable {
    pub assignments: Vec<Assignment>,
}

impl AssignmentTable {
    pub fn get(&self, study_id: &str) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.study_id == study_id)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Output of one topic-model run.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicRun {
    pub model: TopicModel,
    pub assignments: AssignmentTable,
    pub warnings: Vec<ResponseWarning>,
}

/// A topic-model implementation that runs without external calls.
///
/// The remote LLM backend needs a network client and lives in the `evatlas`
/// crate; it uses [`build_topic_prompt`] and [`parse_topic_response`] around
/// its request.
pub trait TopicBackend {
    fn name(&self) -> &'static str;
    fn run(&self, corpus: &Corpus, config: &RunConfig) -> Result<TopicRun, TopicError>;
}

/// Sorts `(index, score)` candidates best-first with ties to the lower index.
pub(crate) fn rank_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}
