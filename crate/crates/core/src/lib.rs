//! Core of the evidence atlas: turns a coded systematic-review table into a
//! topic model, an immutable queryable atlas, and a deterministic map layout.
//!
//! Everything here is a pure transformation over in-memory values, so the
//! crate is `no_std` and only needs `alloc`. Clocks, files, HTTP and the
//! remote LLM call live in the `evatlas` companion crate.
//!
//! Pipeline:
//!
//! 1. [`corpus::parse_corpus`] reads the CSV into a [`corpus::Corpus`] and
//!    infers which coded columns are facets.
//! 2. [`topic`] produces a [`topic::TopicModel`] and an
//!    [`topic::AssignmentTable`], either from an LLM reply
//!    ([`topic::parse_topic_response`]) or the lexical backend
//!    ([`topic::extract_topics_lexical`]).
//! 3. [`atlas::EvidenceAtlas::build`] joins the three and indexes facets.
//! 4. [`query`] and [`layout`] run against the atlas; [`stability`] compares
//!    repeated topic runs.
#![no_std]

extern crate alloc;

pub mod atlas;
pub mod bitset;
pub mod corpus;
pub mod digest;
pub mod layout;
pub mod query;
pub mod stability;
pub mod text;
pub mod topic;

pub use atlas::{AtlasError, EvidenceAtlas, StudyDetail};
pub use corpus::{
    parse_corpus, validate_corpus, Corpus, FeatureDef, FeatureKind, IngestConfig, IngestError,
    Study, ValidationReport,
};
pub use layout::{compute_layout, minimap_frame, LayoutConfig, LayoutError, MapLayout};
pub use query::{FilterState, QueryError};
pub use stability::{adjusted_rand_index, Partition, StabilityError, StabilityReport};
pub use topic::{
    assign_studies, build_topic_prompt, extract_topics_lexical, parse_topic_response, Assignment,
    AssignmentTable, Backend, RunConfig, Topic, TopicError, TopicModel,
};
