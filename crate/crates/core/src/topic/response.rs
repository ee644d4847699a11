//! Lenient parsing of LLM topic replies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::assign::{assign_studies, descriptor_scores};
use super::{
    rank_scores, Alternate, Assignment, AssignmentTable, RunConfig, RunMeta, Subtopic, Topic,
    TopicError, TopicModel, TopicRun,
};
use crate::corpus::Corpus;

/// Problems that do not stop a reply from being used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseWarning {
    TopicCountOutOfRange {
        count: usize,
        min: usize,
        max: usize,
    },
    SubtopicCountOutOfRange {
        topic_id: String,
        count: usize,
        min: usize,
        max: usize,
    },
    EmptyLabel {
        topic_id: String,
    },
    UnknownStudy {
        study_id: String,
    },
    DuplicateAssignment {
        study_id: String,
    },
    /// Studies the reply did not place, assigned by descriptor similarity.
    LocallyAssigned {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub model: TopicModel,
    /// `None` when the reply carried no per-study assignments at all.
    pub assignments: Option<AssignmentTable>,
    pub warnings: Vec<ResponseWarning>,
}

impl ParsedResponse {
    pub fn needs_local_assignment(&self) -> bool {
        self.assignments.is_none()
    }

    /// Fills in assignments by descriptor similarity when the reply had none.
    pub fn complete(self, corpus: &Corpus, config: &RunConfig) -> TopicRun {
        let mut warnings = self.warnings;
        let assignments = match self.assignments {
            Some(table) => table,
            None => {
                warnings.push(ResponseWarning::LocallyAssigned {
                    count: corpus.studies.len(),
                });
                assign_studies(corpus, &self.model, config)
            }
        };
        TopicRun {
            model: self.model,
            assignments,
            warnings,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReplyDoc {
    Wrapped { topics: Vec<RawTopic> },
    Bare(Vec<RawTopic>),
}

#[derive(Deserialize)]
struct RawTopic {
    #[serde(default, alias = "name", alias = "topic", alias = "title")]
    label: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    subtopics: Vec<RawSubtopic>,
    #[serde(default, alias = "studies", alias = "assigned_study_ids", alias = "study_id_list")]
    study_ids: Vec<RawId>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSubtopic {
    Name(String),
    Full {
        #[serde(default, alias = "name", alias = "subtopic", alias = "title")]
        label: String,
        #[serde(default)]
        description: String,
        #[serde(default, alias = "studies")]
        study_ids: Vec<RawId>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(i64),
}

impl RawId {
    fn into_string(self) -> String {
        match self {
            RawId::Text(s) => s.trim().to_string(),
            RawId::Number(n) => n.to_string(),
        }
    }
}

fn try_parse(candidate: &str) -> Option<Vec<RawTopic>> {
    let mut stream = serde_json::Deserializer::from_str(candidate).into_iter::<ReplyDoc>();
    match stream.next() {
        Some(Ok(ReplyDoc::Wrapped { topics })) | Some(Ok(ReplyDoc::Bare(topics))) => Some(topics),
        _ => None,
    }
}

/// First structured block: fenced code blocks in order, then any bare JSON
/// value embedded in the prose.
fn extract_block(reply: &str) -> Option<Vec<RawTopic>> {
    for (i, segment) in reply.split("```").enumerate() {
        if i % 2 == 0 {
            continue;
        }
        let body = match segment.find(['{', '[']) {
            Some(start) => &segment[start..],
            None => continue,
        };
        if let Some(topics) = try_parse(body) {
            return Some(topics);
        }
    }
    reply
        .match_indices(['{', '['])
        .find_map(|(pos, _)| try_parse(&reply[pos..]))
}

/// Parses a raw LLM reply into a topic model.
///
/// Out-of-range topic or subtopic counts, unknown study ids and duplicate
/// placements are reported as warnings. Studies the reply leaves out are
/// assigned locally; when the reply assigns nobody, `assignments` is `None`
/// and [`ParsedResponse::complete`] does the local assignment.
pub fn parse_topic_response(
    response_text: &str,
    corpus: &Corpus,
    config: &RunConfig,
) -> Result<ParsedResponse, TopicError> {
    let raw_topics = extract_block(response_text).ok_or_else(|| {
        TopicError::MalformedModelResponse("no JSON topic list found in the reply".into())
    })?;
    if raw_topics.is_empty() {
        return Err(TopicError::MalformedModelResponse("topic list is empty".into()));
    }

    let mut warnings = Vec::new();
    let n_studies = corpus.studies.len();
    let range = config.topic_range;
    let too_few_studies = n_studies < range.min && raw_topics.len() <= range.max;
    if !range.contains(raw_topics.len()) && !too_few_studies {
        warnings.push(ResponseWarning::TopicCountOutOfRange {
            count: raw_topics.len(),
            min: range.min,
            max: range.max,
        });
    }

    // (topic index, subtopic id) per study, first placement wins
    let mut placed: BTreeMap<String, (usize, Option<String>)> = BTreeMap::new();
    let mut place = |warnings: &mut Vec<ResponseWarning>, id: String, topic: usize, sub: Option<&str>| {
        if corpus.study(&id).is_none() {
            warnings.push(ResponseWarning::UnknownStudy { study_id: id });
            return;
        }
        match placed.get_mut(&id) {
            None => {
                placed.insert(id, (topic, sub.map(String::from)));
            }
            Some(existing) if existing.0 == topic => {
                if existing.1.is_none() {
                    existing.1 = sub.map(String::from);
                } else if sub.is_some() && existing.1.as_deref() != sub {
                    warnings.push(ResponseWarning::DuplicateAssignment { study_id: id });
                }
            }
            Some(_) => warnings.push(ResponseWarning::DuplicateAssignment { study_id: id }),
        }
    };

    let mut topics = Vec::with_capacity(raw_topics.len());
    for (t, raw) in raw_topics.into_iter().enumerate() {
        let topic_id = format!("T{}", t + 1);
        let mut label = raw.label.trim().to_string();
        if label.is_empty() {
            warnings.push(ResponseWarning::EmptyLabel {
                topic_id: topic_id.clone(),
            });
            label = format!("Topic {}", t + 1);
        }
        for id in raw.study_ids {
            place(&mut warnings, id.into_string(), t, None);
        }
        let mut subtopics = Vec::with_capacity(raw.subtopics.len());
        for (s, raw_sub) in raw.subtopics.into_iter().enumerate() {
            let subtopic_id = format!("{topic_id}.{}", s + 1);
            let (sub_label, description, ids) = match raw_sub {
                RawSubtopic::Name(name) => (name, String::new(), Vec::new()),
                RawSubtopic::Full {
                    label,
                    description,
                    study_ids,
                } => (label, description, study_ids),
            };
            for id in ids {
                place(&mut warnings, id.into_string(), t, Some(&subtopic_id));
            }
            let sub_label = sub_label.trim();
            subtopics.push(Subtopic {
                label: if sub_label.is_empty() {
                    format!("Subtopic {}", s + 1)
                } else {
                    sub_label.to_string()
                },
                subtopic_id,
                description,
            });
        }
        if !config.subtopic_range.contains(subtopics.len()) {
            warnings.push(ResponseWarning::SubtopicCountOutOfRange {
                topic_id: topic_id.clone(),
                count: subtopics.len(),
                min: config.subtopic_range.min,
                max: config.subtopic_range.max,
            });
        }
        topics.push(Topic {
            topic_id,
            label,
            description: raw.description,
            subtopics,
            palette_index: t as u32,
        });
    }

    let model = TopicModel {
        topics,
        run_meta: RunMeta::from_config(config),
    };
    if placed.is_empty() {
        return Ok(ParsedResponse {
            model,
            assignments: None,
            warnings,
        });
    }

    let local = assign_studies(corpus, &model, config);
    let scores = descriptor_scores(corpus, &model, config);
    let mut missing = 0;
    let assignments = corpus
        .studies
        .iter()
        .enumerate()
        .map(|(i, study)| match placed.remove(&study.id) {
            Some((topic, subtopic_id)) => Assignment {
                study_id: study.id.clone(),
                topic_id: model.topics[topic].topic_id.clone(),
                subtopic_id,
                score: 1.0,
                alternates: rank_scores(&scores[i])
                    .into_iter()
                    .filter(|&t| t != topic)
                    .take(config.candidates.saturating_sub(1))
                    .map(|t| Alternate {
                        topic_id: model.topics[t].topic_id.clone(),
                        score: scores[i][t],
                    })
                    .collect(),
            },
            None => {
                missing += 1;
                local.assignments[i].clone()
            }
        })
        .collect();
    if missing > 0 {
        warnings.push(ResponseWarning::LocallyAssigned { count: missing });
    }
    Ok(ParsedResponse {
        model,
        assignments: Some(AssignmentTable { assignments }),
        warnings,
    })
}
