//! Linear-scan reference implementations of the query operations, written
//! directly against the corpus and assignment table, plus generators for
//! random filter states.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use evatlas_core::corpus::FeatureKind;
use evatlas_core::query::{FacetCounts, GapMatrix, SummaryStats};
use evatlas_core::topic::UNCLASSIFIED_ID;
use evatlas_core::{AssignmentTable, Corpus, FilterState, Study, TopicModel};
use rand::seq::IndexedRandom;
use rand::Rng;

pub struct Oracle<'a> {
    pub corpus: &'a Corpus,
    pub model: &'a TopicModel,
    pub assignments: &'a AssignmentTable,
}

fn same(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

impl<'a> Oracle<'a> {
    fn sorted_studies(&self) -> Vec<&'a Study> {
        let mut v: Vec<&Study> = self.corpus.studies.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    fn topic_of(&self, s: &Study) -> (&'a str, Option<&'a str>) {
        let a = self
            .assignments
            .assignments
            .iter()
            .find(|a| a.study_id == s.id)
            .expect("every study assigned");
        (a.topic_id.as_str(), a.subtopic_id.as_deref())
    }

    fn has_value(s: &Study, facet: &str, value: &str) -> bool {
        s.features
            .get(facet)
            .is_some_and(|vs| vs.iter().any(|v| same(v, value)))
    }

    /// Whether `s` passes `fs`, ignoring the topic dimension and the named
    /// facets when asked.
    fn passes(&self, s: &Study, fs: &FilterState, skip_topics: bool, skip: &[&str]) -> bool {
        if !skip_topics && (!fs.topic_ids.is_empty() || !fs.subtopic_ids.is_empty()) {
            let (t, sub) = self.topic_of(s);
            let hit = fs.topic_ids.contains(t) || sub.is_some_and(|sub| fs.subtopic_ids.contains(sub));
            if !hit {
                return false;
            }
        }
        for (facet, values) in &fs.facet_selections {
            if skip.contains(&facet.as_str()) || values.is_empty() {
                continue;
            }
            if !values.iter().any(|v| Self::has_value(s, facet, v)) {
                return false;
            }
        }
        true
    }

    pub fn topic_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.model.topics.iter().map(|t| t.topic_id.clone()).collect();
        if self
            .assignments
            .assignments
            .iter()
            .any(|a| a.topic_id == UNCLASSIFIED_ID)
        {
            ids.push(UNCLASSIFIED_ID.into());
        }
        ids
    }

    pub fn facet_names(&self) -> Vec<String> {
        self.corpus
            .schema
            .iter()
            .filter(|f| matches!(f.kind, FeatureKind::Categorical | FeatureKind::MultiCategorical))
            .map(|f| f.name.clone())
            .collect()
    }

    fn facet_values(&self, facet: &str) -> Vec<String> {
        self.corpus
            .schema
            .iter()
            .find(|f| f.name == facet)
            .map(|f| f.values.clone())
            .unwrap_or_default()
    }

    pub fn evaluate(&self, fs: &FilterState) -> Vec<String> {
        self.sorted_studies()
            .into_iter()
            .filter(|s| self.passes(s, fs, false, &[]))
            .map(|s| s.id.clone())
            .collect()
    }

    pub fn counts(&self, fs: &FilterState) -> FacetCounts {
        let studies = self.sorted_studies();
        let mut out = FacetCounts::default();
        for t in self.topic_ids() {
            let n = studies
                .iter()
                .filter(|s| self.passes(s, fs, true, &[]) && self.topic_of(s).0 == t)
                .count();
            out.topics.insert(t, n);
        }
        for t in &self.model.topics {
            for sub in &t.subtopics {
                let n = studies
                    .iter()
                    .filter(|s| {
                        self.passes(s, fs, true, &[]) && self.topic_of(s).1 == Some(sub.subtopic_id.as_str())
                    })
                    .count();
                out.subtopics.insert(sub.subtopic_id.clone(), n);
            }
        }
        for facet in self.facet_names() {
            let mut per_value = BTreeMap::new();
            for v in self.facet_values(&facet) {
                let n = studies
                    .iter()
                    .filter(|s| self.passes(s, fs, false, &[&facet]) && Self::has_value(s, &facet, &v))
                    .count();
                per_value.insert(v, n);
            }
            out.facets.insert(facet, per_value);
        }
        out
    }

    fn axis(&self, name: &str) -> Vec<String> {
        if name == "topic" {
            self.topic_ids()
        } else {
            self.facet_values(name)
        }
    }

    fn on_axis(&self, s: &Study, axis: &str, value: &str) -> bool {
        if axis == "topic" {
            self.topic_of(s).0 == value
        } else {
            Self::has_value(s, axis, value)
        }
    }

    pub fn gaps(&self, row: &str, col: &str, fs: &FilterState) -> GapMatrix {
        let studies = self.sorted_studies();
        let skip_topics = row == "topic" || col == "topic";
        let rows = self.axis(row);
        let cols = self.axis(col);
        let counts: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| {
                        studies
                            .iter()
                            .filter(|s| {
                                self.passes(s, fs, skip_topics, &[row, col])
                                    && self.on_axis(s, row, r)
                                    && self.on_axis(s, col, c)
                            })
                            .count()
                    })
                    .collect()
            })
            .collect();
        let gaps = counts.iter().map(|r| r.iter().map(|&c| c == 0).collect()).collect();
        GapMatrix {
            row_facet: row.into(),
            col_facet: col.into(),
            rows,
            cols,
            counts,
            gaps,
        }
    }

    pub fn summary(&self, fs: &FilterState) -> SummaryStats {
        let matched: Vec<&Study> = self
            .sorted_studies()
            .into_iter()
            .filter(|s| self.passes(s, fs, false, &[]))
            .collect();
        let per_topic = self
            .topic_ids()
            .into_iter()
            .map(|t| {
                let n = matched.iter().filter(|s| self.topic_of(s).0 == t).count();
                (t, n)
            })
            .collect();
        let years: Vec<i32> = matched.iter().filter_map(|s| s.year).collect();
        let mut hist = BTreeMap::new();
        if let (Some(&lo), Some(&hi)) = (years.iter().min(), years.iter().max()) {
            for y in lo..=hi {
                hist.insert(y, years.iter().filter(|&&v| v == y).count());
            }
        }
        SummaryStats {
            total: matched.len(),
            per_topic,
            year_histogram: hist,
            unknown_year: matched.len() - years.len(),
            filter: fs.clone().canonical(),
        }
    }

    /// A random filter touching each dimension with moderate probability.
    /// Selected facet values sometimes change case, which must not matter.
    pub fn random_filter(&self, rng: &mut impl Rng) -> FilterState {
        let mut fs = FilterState::default();
        let topics = self.topic_ids();
        if rng.random_bool(0.4) {
            for _ in 0..rng.random_range(1..=2) {
                fs.topic_ids.insert(topics.choose(rng).unwrap().clone());
            }
        }
        let subs: Vec<&str> = self
            .model
            .topics
            .iter()
            .flat_map(|t| t.subtopics.iter().map(|s| s.subtopic_id.as_str()))
            .collect();
        if !subs.is_empty() && rng.random_bool(0.25) {
            fs.subtopic_ids.insert((*subs.choose(rng).unwrap()).into());
        }
        for facet in self.facet_names() {
            let values = self.facet_values(&facet);
            if values.is_empty() || !rng.random_bool(0.35) {
                continue;
            }
            let chosen: BTreeSet<String> = (0..rng.random_range(1..=2))
                .map(|_| {
                    let v = values.choose(rng).unwrap();
                    if rng.random_bool(0.2) {
                        v.to_uppercase()
                    } else {
                        v.clone()
                    }
                })
                .collect();
            fs.facet_selections.insert(facet, chosen);
        }
        fs
    }
}

pub const AGENT_TYPES: [&str; 3] = ["Pedagogical", "Conversational", "Multiple roles"];
pub const GRADES: [&str; 3] = ["primary", "lower secondary", "upper secondary"];
const WORDS: [&str; 12] = [
    "scaffolding", "dialogue", "motivation", "virtual", "teaching", "feedback",
    "gesture", "emotion", "reading", "assessment", "presence", "rapport",
];

/// A small coded CSV drawn from `rng`: optional years, sometimes-missing
/// agent type, and a multi-valued grade level.
pub fn random_csv(rng: &mut impl Rng, rows: usize) -> String {
    let mut out = String::from("id,title,authors,year,abstract,Agent Type,Grade Level\n");
    for i in 0..rows {
        let words: Vec<&str> = (0..3).map(|_| *WORDS.choose(rng).unwrap()).collect();
        let year = if rng.random_bool(0.85) {
            rng.random_range(2003..=2023).to_string()
        } else {
            String::new()
        };
        let agent = if rng.random_bool(0.85) {
            AGENT_TYPES.choose(rng).unwrap().to_string()
        } else {
            String::new()
        };
        let grades: BTreeSet<&str> = (0..rng.random_range(0..=2))
            .map(|_| *GRADES.choose(rng).unwrap())
            .collect();
        let grades: Vec<&str> = grades.into_iter().collect();
        out.push_str(&format!(
            "s{i:03},{},A,{year},\"{}\",{agent},{}\n",
            words.join(" "),
            words.join(" "),
            grades.join("; ")
        ));
    }
    out
}

/// A topic model with one to four topics (each with up to two subtopics)
/// and an assignment for every study, some left unclassified.
pub fn random_model(rng: &mut impl Rng, corpus: &Corpus) -> (TopicModel, AssignmentTable) {
    use evatlas_core::topic::{Assignment, RunMeta, Subtopic, Topic};
    use evatlas_core::RunConfig;

    let k = rng.random_range(1..=4);
    let topics: Vec<Topic> = (1..=k)
        .map(|i| Topic {
            topic_id: format!("T{i}"),
            label: format!("topic {i}"),
            description: String::new(),
            subtopics: (1..=rng.random_range(0..=2))
                .map(|j| Subtopic {
                    subtopic_id: format!("T{i}.{j}"),
                    label: format!("sub {i}.{j}"),
                    description: String::new(),
                })
                .collect(),
            palette_index: i as u32 - 1,
        })
        .collect();
    let assignments = corpus
        .studies
        .iter()
        .map(|s| {
            let pick = rng.random_range(0..=k);
            if pick == k {
                return Assignment {
                    study_id: s.id.clone(),
                    topic_id: UNCLASSIFIED_ID.into(),
                    subtopic_id: None,
                    score: 0.0,
                    alternates: Vec::new(),
                };
            }
            let t = &topics[pick];
            let subtopic_id = if !t.subtopics.is_empty() && rng.random_bool(0.7) {
                Some(t.subtopics.choose(rng).unwrap().subtopic_id.clone())
            } else {
                None
            };
            Assignment {
                study_id: s.id.clone(),
                topic_id: t.topic_id.clone(),
                subtopic_id,
                score: 1.0,
                alternates: Vec::new(),
            }
        })
        .collect();
    let model = TopicModel {
        topics,
        run_meta: RunMeta::from_config(&RunConfig::default()),
    };
    (model, AssignmentTable { assignments })
}
