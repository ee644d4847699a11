//! Deterministic lexical topic backend: TF-IDF, seeded spherical k-means
//! with k picked by silhouette, class-based term weights for labels.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::kmeans::{silhouette, similarity_matrix, spherical_kmeans, Clustering};
use super::tokenize::tokenize;
use super::vector::{tfidf, SparseVec, Vocabulary};
use super::{
    rank_scores, Alternate, Assignment, AssignmentTable, RunConfig, RunMeta, Subtopic, Topic,
    TopicBackend, TopicError, TopicModel, TopicRun, UNCLASSIFIED_ID,
};
use crate::corpus::Corpus;

const LABEL_TERMS: usize = 3;
const DESCRIPTION_TERMS: usize = 8;

pub struct LexicalBackend;

impl TopicBackend for LexicalBackend {
    fn name(&self) -> &'static str {
        "lexical"
    }

    fn run(&self, corpus: &Corpus, config: &RunConfig) -> Result<TopicRun, TopicError> {
        let (model, assignments) = extract_topics_lexical(corpus, config)?;
        Ok(TopicRun {
            model,
            assignments,
            warnings: Vec::new(),
        })
    }
}

/// Documents in canonical order: sorted by token text, then study id, so the
/// clustering does not depend on row order.
struct DocSet {
    /// Corpus index of each canonical document.
    corpus_index: Vec<usize>,
    counts: Vec<SparseVec>,
    weighted: Vec<SparseVec>,
    vocab: Vocabulary,
}

fn build_docs(corpus: &Corpus, config: &RunConfig) -> Result<DocSet, TopicError> {
    let mut docs: Vec<(String, usize, Vec<String>)> = corpus
        .studies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let tokens = tokenize(&config.study_text(s));
            (tokens.join(" "), i, tokens)
        })
        .filter(|(_, _, t)| !t.is_empty())
        .collect();
    if docs.is_empty() {
        return Err(TopicError::EmptyText);
    }
    docs.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| corpus.studies[a.1].id.cmp(&corpus.studies[b.1].id))
    });
    let vocab = Vocabulary::from_documents(docs.iter().map(|d| d.2.as_slice()));
    let counts: Vec<SparseVec> = docs
        .iter()
        .map(|d| SparseVec::counts(&d.2, &vocab))
        .collect();
    let weighted = tfidf(&counts, vocab.len());
    Ok(DocSet {
        corpus_index: docs.iter().map(|d| d.1).collect(),
        counts,
        weighted,
        vocab,
    })
}

fn distinct_documents(counts: &[SparseVec]) -> usize {
    counts
        .iter()
        .map(|c| {
            c.0.iter()
                .map(|&(t, w)| (t, w.to_bits()))
                .collect::<Vec<_>>()
        })
        .collect::<BTreeSet<_>>()
        .len()
}

/// Tries every k in the allowed range and keeps the best mean silhouette,
/// ties to the smaller k.
fn choose_clustering(docs: &DocSet, config: &RunConfig) -> Clustering {
    let distinct = distinct_documents(&docs.counts);
    let k_max = config.topic_range.max.min(distinct).max(1);
    let k_min = config.topic_range.min.min(k_max);
    let dims = docs.vocab.len();
    if k_min == k_max {
        return spherical_kmeans(&docs.weighted, dims, k_min, config.seed);
    }
    let sim = similarity_matrix(&docs.weighted);
    let mut best: Option<(f64, Clustering)> = None;
    for k in k_min..=k_max {
        let run = spherical_kmeans(&docs.weighted, dims, k, config.seed);
        if run.k() < k {
            continue;
        }
        let score = silhouette(&sim, &run.labels, run.k());
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, run));
        }
    }
    best.map(|(_, c)| c)
        .unwrap_or_else(|| spherical_kmeans(&docs.weighted, dims, k_min, config.seed))
}

/// Cluster order: larger first, ties by earliest canonical member.
fn order_clusters(labels: &[usize], k: usize) -> Vec<usize> {
    let mut size = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &l) in labels.iter().enumerate() {
        size[l] += 1;
        first[l] = first[l].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(first[a].cmp(&first[b])));
    order
}

/// Class-based term weights: term frequency within the class, scaled by
/// `ln(1 + A / f_t)` with `A` the mean class length and `f_t` the term's
/// frequency across all classes. Each class gets its terms best-first,
/// ties by term order.
fn class_term_ranking(classes: &[Vec<usize>], counts: &[SparseVec], dims: usize) -> Vec<Vec<usize>> {
    let mut class_tf = vec![vec![0.0; dims]; classes.len()];
    for (c, members) in classes.iter().enumerate() {
        for &d in members {
            counts[d].add_to(&mut class_tf[c]);
        }
    }
    let mut total_tf = vec![0.0; dims];
    for tf in &class_tf {
        for (t, &w) in tf.iter().enumerate() {
            total_tf[t] += w;
        }
    }
    let words: f64 = total_tf.iter().sum();
    let mean_class_len = words / classes.len().max(1) as f64;
    class_tf
        .iter()
        .map(|tf| {
            let class_len: f64 = tf.iter().sum();
            let mut weights: Vec<(usize, f64)> = tf
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(t, &w)| {
                    (t, (w / class_len) * libm::log(1.0 + mean_class_len / total_tf[t]))
                })
                .collect();
            weights.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            weights.into_iter().map(|(t, _)| t).collect()
        })
        .collect()
}

fn join_terms(vocab: &Vocabulary, terms: &[usize]) -> String {
    let words: Vec<&str> = terms.iter().map(|&t| vocab.term(t)).collect();
    words.join(", ")
}

/// Sub-clusters one topic's members. Returns subtopics plus, per member
/// (in `members` order), the index of its subtopic.
fn subtopics_for(
    topic_id: &str,
    topic_pos: usize,
    members: &[usize],
    parent_terms: &[usize],
    docs: &DocSet,
    config: &RunConfig,
) -> (Vec<Subtopic>, Vec<usize>) {
    let dims = docs.vocab.len();
    let k = config.subtopic_range.min;
    let split = if members.len() >= 4 && k >= 2 {
        let member_docs: Vec<SparseVec> =
            members.iter().map(|&d| docs.weighted[d].clone()).collect();
        let sub_seed = config.seed ^ ((topic_pos as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let run = spherical_kmeans(&member_docs, dims, k, sub_seed);
        (run.k() >= 2).then_some(run)
    } else {
        None
    };
    let parent_label: BTreeSet<usize> = parent_terms.iter().take(LABEL_TERMS).copied().collect();

    let Some(run) = split else {
        // Single subtopic named by the parent's next-best terms.
        let rest: Vec<usize> = parent_terms
            .iter()
            .skip(LABEL_TERMS)
            .take(LABEL_TERMS)
            .copied()
            .collect();
        let label_terms = if rest.is_empty() { parent_terms } else { &rest[..] };
        let sub = Subtopic {
            subtopic_id: format!("{topic_id}.1"),
            label: join_terms(&docs.vocab, &label_terms[..label_terms.len().min(LABEL_TERMS)]),
            description: join_terms(
                &docs.vocab,
                &parent_terms[..parent_terms.len().min(DESCRIPTION_TERMS)],
            ),
        };
        return (vec![sub], vec![0; members.len()]);
    };

    let order = order_clusters(&run.labels, run.k());
    let mut rank_of = vec![0; run.k()];
    for (rank, &c) in order.iter().enumerate() {
        rank_of[c] = rank;
    }
    let member_sub: Vec<usize> = run.labels.iter().map(|&l| rank_of[l]).collect();
    let classes: Vec<Vec<usize>> = (0..run.k())
        .map(|rank| {
            members
                .iter()
                .zip(&member_sub)
                .filter(|(_, &s)| s == rank)
                .map(|(&d, _)| d)
                .collect()
        })
        .collect();
    let rankings = class_term_ranking(&classes, &docs.counts, dims);
    let subs = rankings
        .iter()
        .enumerate()
        .map(|(rank, terms)| {
            let fresh: Vec<usize> = terms
                .iter()
                .filter(|t| !parent_label.contains(t))
                .copied()
                .collect();
            let label_terms = if fresh.is_empty() { terms } else { &fresh };
            Subtopic {
                subtopic_id: format!("{topic_id}.{}", rank + 1),
                label: join_terms(&docs.vocab, &label_terms[..label_terms.len().min(LABEL_TERMS)]),
                description: join_terms(&docs.vocab, &terms[..terms.len().min(DESCRIPTION_TERMS)]),
            }
        })
        .collect();
    (subs, member_sub)
}

/// Lexical topic model and assignments; byte-identical output for equal
/// `(corpus, config)`.
pub fn extract_topics_lexical(
    corpus: &Corpus,
    config: &RunConfig,
) -> Result<(TopicModel, AssignmentTable), TopicError> {
    config.validate()?;
    let docs = build_docs(corpus, config)?;
    let clustering = choose_clustering(&docs, config);
    let order = order_clusters(&clustering.labels, clustering.k());
    let centroids: Vec<&Vec<f64>> = order.iter().map(|&c| &clustering.centroids[c]).collect();
    let k = centroids.len();

    // Scores against the ordered centroids; the primary is the best score
    // with ties to the lower topic index.
    let scores: Vec<Vec<f64>> = docs
        .weighted
        .iter()
        .map(|d| centroids.iter().map(|c| d.dot_dense(c).clamp(0.0, 1.0)).collect())
        .collect();
    let ranked: Vec<Vec<usize>> = scores.iter().map(|s| rank_scores(s)).collect();
    let classes: Vec<Vec<usize>> = (0..k)
        .map(|t| (0..docs.counts.len()).filter(|&d| ranked[d][0] == t).collect())
        .collect();
    let rankings = class_term_ranking(&classes, &docs.counts, docs.vocab.len());

    let mut topics = Vec::with_capacity(k);
    let mut doc_subtopic: Vec<Option<String>> = vec![None; docs.counts.len()];
    for (t, terms) in rankings.iter().enumerate() {
        let topic_id = format!("T{}", t + 1);
        let (subtopics, member_sub) =
            subtopics_for(&topic_id, t, &classes[t], terms, &docs, config);
        for (&d, &s) in classes[t].iter().zip(&member_sub) {
            doc_subtopic[d] = Some(subtopics[s].subtopic_id.clone());
        }
        topics.push(Topic {
            topic_id,
            label: join_terms(&docs.vocab, &terms[..terms.len().min(LABEL_TERMS)]),
            description: join_terms(&docs.vocab, &terms[..terms.len().min(DESCRIPTION_TERMS)]),
            subtopics,
            palette_index: t as u32,
        });
    }

    let mut by_corpus: Vec<Option<usize>> = vec![None; corpus.studies.len()];
    for (d, &ci) in docs.corpus_index.iter().enumerate() {
        by_corpus[ci] = Some(d);
    }
    let assignments = corpus
        .studies
        .iter()
        .zip(&by_corpus)
        .map(|(study, doc)| match *doc {
            Some(d) => {
                let primary = ranked[d][0];
                Assignment {
                    study_id: study.id.clone(),
                    topic_id: topics[primary].topic_id.clone(),
                    subtopic_id: doc_subtopic[d].clone(),
                    score: scores[d][primary],
                    alternates: ranked[d][1..]
                        .iter()
                        .take(config.candidates - 1)
                        .map(|&t| Alternate {
                            topic_id: topics[t].topic_id.clone(),
                            score: scores[d][t],
                        })
                        .collect(),
                }
            }
            None => Assignment {
                study_id: study.id.clone(),
                topic_id: UNCLASSIFIED_ID.to_string(),
                subtopic_id: None,
                score: 0.0,
                alternates: Vec::new(),
            },
        })
        .collect();

    Ok((
        TopicModel {
            topics,
            run_meta: RunMeta::from_config(config),
        },
        AssignmentTable { assignments },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Provenance, Study};
    use crate::topic::CountRange;
    use alloc::collections::BTreeMap;

    fn corpus_of(abstracts: &[&str]) -> Corpus {
        Corpus {
            corpus_id: "c".into(),
            studies: abstracts
                .iter()
                .enumerate()
                .map(|(i, a)| Study {
                    id: format!("S{:02}", i + 1),
                    title: String::new(),
                    authors: String::new(),
                    year: None,
                    abstract_text: a.to_string(),
                    features: BTreeMap::new(),
                })
                .collect(),
            schema: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn empty_text_errors() {
        let corpus = corpus_of(&["", "the of and"]);
        assert_eq!(
            extract_topics_lexical(&corpus, &RunConfig::default()).unwrap_err(),
            TopicError::EmptyText
        );
    }

    #[test]
    fn textless_study_is_unclassified() {
        let corpus = corpus_of(&["robots tutoring math", "", "robots tutoring math"]);
        let config = RunConfig {
            topic_range: CountRange::new(1, 1),
            ..RunConfig::default()
        };
        let (model, table) = extract_topics_lexical(&corpus, &config).unwrap();
        assert_eq!(model.topics.len(), 1);
        assert_eq!(table.assignments[1].topic_id, UNCLASSIFIED_ID);
        assert_eq!(table.assignments[1].score, 0.0);
        assert_eq!(table.assignments[0].topic_id, "T1");
    }

    #[test]
    fn fewer_distinct_documents_than_range() {
        let corpus = corpus_of(&["alpha beta", "gamma delta", "alpha beta"]);
        let (model, table) = extract_topics_lexical(&corpus, &RunConfig::default()).unwrap();
        assert_eq!(model.topics.len(), 2);
        assert_eq!(table.assignments[0].topic_id, table.assignments[2].topic_id);
        assert_ne!(table.assignments[0].topic_id, table.assignments[1].topic_id);
    }

    #[test]
    fn topics_sorted_by_size_with_subtopics() {
        let mut abstracts = Vec::new();
        for i in 0..6 {
            abstracts.push(if i % 2 == 0 {
                "virtual reality headset immersion presence"
            } else {
                "virtual reality augmented overlay presence"
            });
        }
        abstracts.extend(["scaffolding hints feedback"; 3]);
        let corpus = corpus_of(&abstracts);
        let config = RunConfig {
            topic_range: CountRange::new(2, 2),
            ..RunConfig::default()
        };
        let (model, table) = extract_topics_lexical(&corpus, &config).unwrap();
        assert_eq!(model.topics[0].topic_id, "T1");
        let t1_members = table.assignments.iter().filter(|a| a.topic_id == "T1").count();
        assert_eq!(t1_members, 6);
        assert_eq!(model.topics[0].subtopics.len(), 2);
        // fewer than four members: a single subtopic
        assert_eq!(model.topics[1].subtopics.len(), 1);
        assert!(model.topics[1].label.contains("scaffolding"));
        for a in &table.assignments {
            assert!(a.score > 0.0 && a.score <= 1.0);
            assert!(a.alternates.iter().all(|alt| alt.score <= a.score));
            assert!(a.subtopic_id.as_deref().unwrap().starts_with(&a.topic_id));
        }
    }
}
