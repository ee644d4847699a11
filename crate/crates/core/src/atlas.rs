//! The evidence atlas: corpus, active topic model and assignments joined
//! with an inverted index over facet values and topics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::corpus::{Corpus, FeatureKind, Study};
use crate::digest::ContentDigest;
use crate::text::value_key;
use crate::topic::{AssignmentTable, TopicModel, UNCLASSIFIED_ID, UNCLASSIFIED_LABEL};

pub const DEFAULT_CO_LABEL_RATIO: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AtlasError {
    #[error("inconsistent atlas inputs: {0}")]
    InconsistentInputs(String),
    #[error("unknown study `{0}`")]
    UnknownStudy(String),
}

#[derive(Debug, Clone)]
pub struct FacetValueIndex {
    pub display: String,
    pub members: BitSet,
}

#[derive(Debug, Clone)]
pub struct FacetIndex {
    pub name: String,
    pub kind: FeatureKind,
    /// Values in schema order.
    pub values: Vec<FacetValueIndex>,
    /// Case-folded value key to position in `values`.
    by_key: BTreeMap<String, usize>,
}

impl FacetIndex {
    pub fn value(&self, raw: &str) -> Option<&FacetValueIndex> {
        self.by_key.get(&value_key(raw)).map(|&i| &self.values[i])
    }
}

#[derive(Debug, Clone)]
pub struct TopicIndex {
    pub topic_id: String,
    pub label: String,
    pub palette_index: Option<u32>,
    pub members: BitSet,
    pub subtopics: Vec<(String, String, BitSet)>,
}

/// Immutable join of corpus, topic model and assignments. Studies are
/// addressed by ordinal: their position in study-id order.
#[derive(Debug, Clone)]
pub struct EvidenceAtlas {
    corpus: Arc<Corpus>,
    model: TopicModel,
    assignments: AssignmentTable,
    version: String,
    co_label_ratio: f64,
    /// ordinal -> corpus index
    order: Vec<usize>,
    ordinal_of: BTreeMap<String, usize>,
    /// ordinal -> assignment index
    assignment_of: Vec<usize>,
    facets: Vec<FacetIndex>,
    /// Model topics in order, then the unclassified topic when non-empty.
    topics: Vec<TopicIndex>,
}

impl EvidenceAtlas {
    pub fn build(
        corpus: Arc<Corpus>,
        model: TopicModel,
        assignments: AssignmentTable,
    ) -> Result<Self, AtlasError> {
        Self::build_with_ratio(corpus, model, assignments, DEFAULT_CO_LABEL_RATIO)
    }

    pub fn build_with_ratio(
        corpus: Arc<Corpus>,
        model: TopicModel,
        assignments: AssignmentTable,
        co_label_ratio: f64,
    ) -> Result<Self, AtlasError> {
        let bad = |msg: String| Err(AtlasError::InconsistentInputs(msg));
        let n = corpus.studies.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| corpus.studies[a].id.cmp(&corpus.studies[b].id));
        let mut ordinal_of = BTreeMap::new();
        for (ordinal, &ci) in order.iter().enumerate() {
            if ordinal_of.insert(corpus.studies[ci].id.clone(), ordinal).is_some() {
                return bad(format!("duplicate study id `{}`", corpus.studies[ci].id));
            }
        }

        let mut assignment_of = alloc::vec![usize::MAX; n];
        for (ai, a) in assignments.assignments.iter().enumerate() {
            let Some(&ordinal) = ordinal_of.get(&a.study_id) else {
                return bad(format!("assignment for unknown study `{}`", a.study_id));
            };
            if assignment_of[ordinal] != usize::MAX {
                return bad(format!("study `{}` assigned twice", a.study_id));
            }
            assignment_of[ordinal] = ai;
        }
        if let Some(ordinal) = assignment_of.iter().position(|&a| a == usize::MAX) {
            let id = &corpus.studies[order[ordinal]].id;
            return bad(format!("study `{id}` has no assignment"));
        }

        let mut topics: Vec<TopicIndex> = model
            .topics
            .iter()
            .map(|t| TopicIndex {
                topic_id: t.topic_id.clone(),
                label: t.label.clone(),
                palette_index: Some(t.palette_index),
                members: BitSet::empty(n),
                subtopics: t
                    .subtopics
                    .iter()
                    .map(|s| (s.subtopic_id.clone(), s.label.clone(), BitSet::empty(n)))
                    .collect(),
            })
            .collect();
        let mut unclassified = BitSet::empty(n);
        for (ordinal, &ai) in assignment_of.iter().enumerate() {
            let a = &assignments.assignments[ai];
            if a.topic_id == UNCLASSIFIED_ID {
                if a.subtopic_id.is_some() {
                    return bad(format!("unclassified study `{}` has a subtopic", a.study_id));
                }
                unclassified.insert(ordinal);
                continue;
            }
            let Some(topic) = topics.iter_mut().find(|t| t.topic_id == a.topic_id) else {
                return bad(format!("unknown topic `{}`", a.topic_id));
            };
            topic.members.insert(ordinal);
            if let Some(sub_id) = &a.subtopic_id {
                let Some(sub) = topic.subtopics.iter_mut().find(|s| &s.0 == sub_id) else {
                    return bad(format!("subtopic `{sub_id}` is not under `{}`", a.topic_id));
                };
                sub.2.insert(ordinal);
            }
        }
        if !unclassified.is_empty() {
            topics.push(TopicIndex {
                topic_id: UNCLASSIFIED_ID.to_string(),
                label: UNCLASSIFIED_LABEL.to_string(),
                palette_index: None,
                members: unclassified,
                subtopics: Vec::new(),
            });
        }

        let facets = corpus
            .facets()
            .map(|def| {
                let by_key: BTreeMap<String, usize> = def
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (value_key(v), i))
                    .collect();
                let mut values: Vec<FacetValueIndex> = def
                    .values
                    .iter()
                    .map(|v| FacetValueIndex {
                        display: v.clone(),
                        members: BitSet::empty(n),
                    })
                    .collect();
                for (ordinal, &ci) in order.iter().enumerate() {
                    if let Some(study_values) = corpus.studies[ci].features.get(&def.name) {
                        for v in study_values {
                            if let Some(&i) = by_key.get(&value_key(v)) {
                                values[i].members.insert(ordinal);
                            }
                        }
                    }
                }
                FacetIndex {
                    name: def.name.clone(),
                    kind: def.kind,
                    values,
                    by_key,
                }
            })
            .collect();

        let version = atlas_version(&corpus, &model, &assignments);
        Ok(Self {
            corpus,
            model,
            assignments,
            version,
            co_label_ratio,
            order,
            ordinal_of,
            assignment_of,
            facets,
            topics,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn corpus_arc(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn model(&self) -> &TopicModel {
        &self.model
    }

    pub fn assignments(&self) -> &AssignmentTable {
        &self.assignments
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Study at an ordinal (study-id order).
    pub fn study(&self, ordinal: usize) -> &Study {
        &self.corpus.studies[self.order[ordinal]]
    }

    pub fn ordinal(&self, study_id: &str) -> Option<usize> {
        self.ordinal_of.get(study_id).copied()
    }

    pub fn assignment(&self, ordinal: usize) -> &crate::topic::Assignment {
        &self.assignments.assignments[self.assignment_of[ordinal]]
    }

    pub fn facets(&self) -> &[FacetIndex] {
        &self.facets
    }

    pub fn facet(&self, name: &str) -> Option<&FacetIndex> {
        self.facets.iter().find(|f| f.name == name)
    }

    /// Model topics in order, plus the unclassified topic when it has
    /// members.
    pub fn topics(&self) -> &[TopicIndex] {
        &self.topics
    }

    pub fn topic(&self, topic_id: &str) -> Option<&TopicIndex> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }

    /// `(topic id, members)` for a subtopic id.
    pub fn subtopic(&self, subtopic_id: &str) -> Option<(&TopicIndex, &BitSet)> {
        self.topics.iter().find_map(|t| {
            t.subtopics
                .iter()
                .find(|s| s.0 == subtopic_id)
                .map(|s| (t, &s.2))
        })
    }

    /// Study counts per topic; they sum to the corpus size.
    pub fn topic_counts(&self) -> Vec<(&str, usize)> {
        self.topics
            .iter()
            .map(|t| (t.topic_id.as_str(), t.members.count()))
            .collect()
    }

    pub fn study_detail(&self, study_id: &str) -> Result<StudyDetail, AtlasError> {
        let ordinal = self
            .ordinal(study_id)
            .ok_or_else(|| AtlasError::UnknownStudy(study_id.to_string()))?;
        let study = self.study(ordinal);
        let a = self.assignment(ordinal);
        let label = |id: &str| self.model.label_of(id).unwrap_or(id).to_string();
        let scored = |alt: &crate::topic::Alternate| TopicScore {
            topic_id: alt.topic_id.clone(),
            label: label(&alt.topic_id),
            score: alt.score,
        };
        let subtopic_label = a.subtopic_id.as_ref().and_then(|sid| {
            self.model
                .topics
                .iter()
                .flat_map(|t| &t.subtopics)
                .find(|s| &s.subtopic_id == sid)
                .map(|s| s.label.clone())
        });
        Ok(StudyDetail {
            study_id: study.id.clone(),
            title: study.title.clone(),
            authors: study.authors.clone(),
            year: study.year,
            abstract_text: study.abstract_text.clone(),
            features: study.features.clone(),
            primary: PrimaryTopic {
                topic_id: a.topic_id.clone(),
                label: label(&a.topic_id),
                subtopic_id: a.subtopic_id.clone(),
                subtopic_label,
                score: a.score,
            },
            co_labels: a.co_labels(self.co_label_ratio).map(scored).collect(),
            alternates: a.alternates.iter().map(scored).collect(),
        })
    }
}

fn atlas_version(corpus: &Corpus, model: &TopicModel, assignments: &AssignmentTable) -> String {
    let mut model = model.clone();
    model.run_meta.timestamp = None;
    let mut d = ContentDigest::new();
    d.field(&corpus.corpus_id)
        .bytes(&serde_json::to_vec(&model).unwrap_or_default())
        .bytes(&serde_json::to_vec(assignments).unwrap_or_default());
    d.finish("a-")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScore {
    pub topic_id: String,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryTopic {
    pub topic_id: String,
    pub label: String,
    pub subtopic_id: Option<String>,
    pub subtopic_label: Option<String>,
    pub score: f64,
}

/// Everything the detail panel shows for one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDetail {
    pub study_id: String,
    pub title: String,
    pub authors: String,
    pub year: Option<i32>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub features: BTreeMap<String, alloc::collections::BTreeSet<String>>,
    pub primary: PrimaryTopic,
    /// Alternates close enough to the primary score to show as extra labels.
    pub co_labels: Vec<TopicScore>,
    pub alternates: Vec<TopicScore>,
}
