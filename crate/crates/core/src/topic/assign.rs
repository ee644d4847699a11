use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::tokenize::tokenize;
use super::vector::{cosine, SparseVec, Vocabulary};
use super::{
    rank_scores, Alternate, Assignment, AssignmentTable, RunConfig, Topic, TopicModel,
    UNCLASSIFIED_ID,
};
use crate::corpus::Corpus;

/// Label, description and subtopic labels of a topic as one text.
pub(crate) fn descriptor_text(topic: &Topic) -> String {
    let mut text = String::new();
    text.push_str(&topic.label);
    text.push('\n');
    text.push_str(&topic.description);
    for sub in &topic.subtopics {
        text.push('\n');
        text.push_str(&sub.label);
    }
    text
}

/// Cosine between each study's term counts and each topic descriptor, in
/// corpus order.
pub(crate) fn descriptor_scores(corpus: &Corpus, topics: &TopicModel, config: &RunConfig) -> Vec<Vec<f64>> {
    let study_tokens: Vec<Vec<String>> = corpus
        .studies
        .iter()
        .map(|s| tokenize(&config.study_text(s)))
        .collect();
    let topic_tokens: Vec<Vec<String>> = topics
        .topics
        .iter()
        .map(|t| tokenize(&descriptor_text(t)))
        .collect();
    let vocab = Vocabulary::from_documents(
        study_tokens
            .iter()
            .chain(&topic_tokens)
            .map(Vec::as_slice),
    );
    let topic_vecs: Vec<SparseVec> = topic_tokens
        .iter()
        .map(|t| SparseVec::counts(t, &vocab))
        .collect();
    study_tokens
        .iter()
        .map(|tokens| {
            let v = SparseVec::counts(tokens, &vocab);
            topic_vecs.iter().map(|t| cosine(&v, t)).collect()
        })
        .collect()
}

/// Assigns every study to the topic whose descriptor it is most similar to.
///
/// Ties go to the lower topic index; a study with zero similarity to every
/// topic goes to the reserved unclassified topic with score 0 and no
/// alternates. Subtopics are left unset.
pub fn assign_studies(corpus: &Corpus, topics: &TopicModel, config: &RunConfig) -> AssignmentTable {
    let scores = descriptor_scores(corpus, topics, config);
    let assignments = corpus
        .studies
        .iter()
        .zip(&scores)
        .map(|(study, s)| {
            let ranked = rank_scores(s);
            match ranked.first() {
                Some(&best) if s[best] > 0.0 => Assignment {
                    study_id: study.id.clone(),
                    topic_id: topics.topics[best].topic_id.clone(),
                    subtopic_id: None,
                    score: s[best],
                    alternates: ranked[1..]
                        .iter()
                        .take(config.candidates.saturating_sub(1))
                        .map(|&t| Alternate {
                            topic_id: topics.topics[t].topic_id.clone(),
                            score: s[t],
                        })
                        .collect(),
                },
                _ => Assignment {
                    study_id: study.id.clone(),
                    topic_id: UNCLASSIFIED_ID.to_string(),
                    subtopic_id: None,
                    score: 0.0,
                    alternates: Vec::new(),
                },
            }
        })
        .collect();
    AssignmentTable { assignments }
}
