//! Faceted queries over an atlas: filtering, disjunctive facet counts,
//! button availability, gap matrices and summary statistics.
//!
//! Selections are OR-ed within a dimension and AND-ed across dimensions.
//! Topics and subtopics together form one dimension. A study without a
//! value for a facet never matches a selection on that facet.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::EvidenceAtlas;
use crate::bitset::BitSet;
use crate::topic::UNCLASSIFIED_ID;

/// Pseudo-facet naming the primary topic in gap matrices.
pub const TOPIC_AXIS: &str = "topic";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("unknown facet `{0}`")]
    UnknownFacet(String),
    #[error("facet `{facet}` has no value `{value}`")]
    UnknownValue { facet: String, value: String },
    #[error("unknown topic or subtopic `{0}`")]
    UnknownTopic(String),
    #[error("gap matrix needs two different facets, got `{0}` twice")]
    SameFacet(String),
}

/// Filter selections. Serializes canonically: keys and values sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterState {
    pub topic_ids: BTreeSet<String>,
    pub subtopic_ids: BTreeSet<String>,
    pub facet_selections: BTreeMap<String, BTreeSet<String>>,
}

impl FilterState {
    /// Drops facets with empty selections, which constrain nothing.
    pub fn canonical(mut self) -> Self {
        self.facet_selections.retain(|_, v| !v.is_empty());
        self
    }

    pub fn with_topic(mut self, topic_id: &str) -> Self {
        self.topic_ids.insert(topic_id.into());
        self
    }

    pub fn with_subtopic(mut self, subtopic_id: &str) -> Self {
        self.subtopic_ids.insert(subtopic_id.into());
        self
    }

    pub fn with_value(mut self, facet: &str, value: &str) -> Self {
        self.facet_selections
            .entry(facet.into())
            .or_default()
            .insert(value.into());
        self
    }

    fn without_topics(&self) -> Self {
        Self {
            topic_ids: BTreeSet::new(),
            subtopic_ids: BTreeSet::new(),
            facet_selections: self.facet_selections.clone(),
        }
    }

    fn without_facet(&self, facet: &str) -> Self {
        let mut fs = self.clone();
        fs.facet_selections.remove(facet);
        fs
    }

    fn without_axis(&self, axis: &str) -> Self {
        if axis == TOPIC_AXIS {
            self.without_topics()
        } else {
            self.without_facet(axis)
        }
    }
}

/// Union of a dimension's selected member sets.
fn union_of<'a>(n: usize, sets: impl Iterator<Item = &'a BitSet>) -> BitSet {
    let mut out = BitSet::empty(n);
    for s in sets {
        out.union_with(s);
    }
    out
}

/// Checks every referenced name and returns the matching set.
fn matching(atlas: &EvidenceAtlas, fs: &FilterState) -> Result<BitSet, QueryError> {
    let n = atlas.len();
    let mut result = BitSet::full(n);

    if !fs.topic_ids.is_empty() || !fs.subtopic_ids.is_empty() {
        let mut dim = BitSet::empty(n);
        for id in &fs.topic_ids {
            match atlas.topic(id) {
                Some(t) => dim.union_with(&t.members),
                None if id == UNCLASSIFIED_ID => {}
                None => return Err(QueryError::UnknownTopic(id.clone())),
            }
        }
        for id in &fs.subtopic_ids {
            let (_, members) = atlas
                .subtopic(id)
                .ok_or_else(|| QueryError::UnknownTopic(id.clone()))?;
            dim.union_with(members);
        }
        result.intersect_with(&dim);
    }

    for (name, values) in &fs.facet_selections {
        let facet = atlas
            .facet(name)
            .ok_or_else(|| QueryError::UnknownFacet(name.clone()))?;
        if values.is_empty() {
            continue;
        }
        let mut sets = Vec::with_capacity(values.len());
        for v in values {
            let value = facet.value(v).ok_or_else(|| QueryError::UnknownValue {
                facet: name.clone(),
                value: v.clone(),
            })?;
            sets.push(&value.members);
        }
        result.intersect_with(&union_of(n, sets.into_iter()));
    }
    Ok(result)
}

/// Study ids matching the filter, in id order.
pub fn evaluate_filter(atlas: &EvidenceAtlas, fs: &FilterState) -> Result<Vec<String>, QueryError> {
    let set = matching(atlas, fs)?;
    Ok(set.iter().map(|o| atlas.study(o).id.clone()).collect())
}

/// Per-value counts for every dimension. Keys are topic ids, subtopic ids
/// and facet value display forms.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DimensionTally<T> {
    pub topics: BTreeMap<String, T>,
    pub subtopics: BTreeMap<String, T>,
    pub facets: BTreeMap<String, BTreeMap<String, T>>,
}

pub type FacetCounts = DimensionTally<usize>;
pub type FacetAvailability = DimensionTally<bool>;

impl<T> DimensionTally<T> {
    fn map<U>(&self, f: impl Fn(&T) -> U) -> DimensionTally<U> {
        DimensionTally {
            topics: self.topics.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
            subtopics: self.subtopics.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
            facets: self
                .facets
                .iter()
                .map(|(name, values)| {
                    (
                        name.clone(),
                        values.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
                    )
                })
                .collect(),
        }
    }
}

/// Disjunctive facet counts: each dimension is counted against the filter
/// with that dimension's own selections removed, so selecting one value
/// leaves its siblings' counts unchanged.
pub fn facet_counts(atlas: &EvidenceAtlas, fs: &FilterState) -> Result<FacetCounts, QueryError> {
    let unconstrained = matching(atlas, fs)?;
    let topic_base = matching(atlas, &fs.without_topics())?;
    let mut counts = FacetCounts::default();
    for t in atlas.topics() {
        counts
            .topics
            .insert(t.topic_id.clone(), topic_base.intersection_count(&t.members));
        for (sub_id, _, members) in &t.subtopics {
            counts
                .subtopics
                .insert(sub_id.clone(), topic_base.intersection_count(members));
        }
    }
    for facet in atlas.facets() {
        let base = if fs
            .facet_selections
            .get(&facet.name)
            .is_some_and(|v| !v.is_empty())
        {
            matching(atlas, &fs.without_facet(&facet.name))?
        } else {
            unconstrained.clone()
        };
        counts.facets.insert(
            facet.name.clone(),
            facet
                .values
                .iter()
                .map(|v| (v.display.clone(), base.intersection_count(&v.members)))
                .collect(),
        );
    }
    Ok(counts)
}

/// A filter button is active when selecting it would match something.
pub fn facet_availability(
    atlas: &EvidenceAtlas,
    fs: &FilterState,
) -> Result<FacetAvailability, QueryError> {
    Ok(facet_counts(atlas, fs)?.map(|&c| c > 0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapMatrix {
    pub row_facet: String,
    pub col_facet: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `counts[r][c]`
    pub counts: Vec<Vec<usize>>,
    /// Cells with no matching study.
    pub gaps: Vec<Vec<bool>>,
}

/// Axis values with their member sets: a facet's values, or the topics.
fn axis<'a>(atlas: &'a EvidenceAtlas, name: &str) -> Result<Vec<(String, &'a BitSet)>, QueryError> {
    if name == TOPIC_AXIS {
        return Ok(atlas
            .topics()
            .iter()
            .map(|t| (t.topic_id.clone(), &t.members))
            .collect());
    }
    let facet = atlas
        .facet(name)
        .ok_or_else(|| QueryError::UnknownFacet(name.to_string()))?;
    Ok(facet
        .values
        .iter()
        .map(|v| (v.display.clone(), &v.members))
        .collect())
}

/// Cross-tabulates two facets (or a facet and the topic axis) over the
/// ambient filter minus both axes' own selections.
pub fn gap_matrix(
    atlas: &EvidenceAtlas,
    row_facet: &str,
    col_facet: &str,
    fs: &FilterState,
) -> Result<GapMatrix, QueryError> {
    if row_facet == col_facet {
        return Err(QueryError::SameFacet(row_facet.to_string()));
    }
    let rows = axis(atlas, row_facet)?;
    let cols = axis(atlas, col_facet)?;
    matching(atlas, fs)?;
    let ambient = matching(atlas, &fs.without_axis(row_facet).without_axis(col_facet))?;
    let mut counts = Vec::with_capacity(rows.len());
    for (_, row_members) in &rows {
        let mut in_row = ambient.clone();
        in_row.intersect_with(row_members);
        counts.push(
            cols.iter()
                .map(|(_, col_members)| in_row.intersection_count(col_members))
                .collect::<Vec<_>>(),
        );
    }
    let gaps = counts
        .iter()
        .map(|r| r.iter().map(|&c| c == 0).collect())
        .collect();
    Ok(GapMatrix {
        row_facet: row_facet.to_string(),
        col_facet: col_facet.to_string(),
        rows: rows.into_iter().map(|r| r.0).collect(),
        cols: cols.into_iter().map(|c| c.0).collect(),
        counts,
        gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub total: usize,
    pub per_topic: BTreeMap<String, usize>,
    /// Contiguous single-year bins from the earliest to the latest known
    /// year among matching studies.
    pub year_histogram: BTreeMap<i32, usize>,
    pub unknown_year: usize,
    pub filter: FilterState,
}

pub fn summary_stats(atlas: &EvidenceAtlas, fs: &FilterState) -> Result<SummaryStats, QueryError> {
    let set = matching(atlas, fs)?;
    let per_topic = atlas
        .topics()
        .iter()
        .map(|t| (t.topic_id.clone(), set.intersection_count(&t.members)))
        .collect();
    let mut years: BTreeMap<i32, usize> = BTreeMap::new();
    let mut unknown_year = 0;
    for o in set.iter() {
        match atlas.study(o).year {
            Some(y) => *years.entry(y).or_default() += 1,
            None => unknown_year += 1,
        }
    }
    if let (Some(&lo), Some(&hi)) = (years.keys().next(), years.keys().next_back()) {
        for y in lo..=hi {
            years.entry(y).or_default();
        }
    }
    Ok(SummaryStats {
        total: set.count(),
        per_topic,
        year_histogram: years,
        unknown_year,
        filter: fs.clone().canonical(),
    })
}

/// Everything one UI interaction needs, computed against one atlas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub atlas_version: String,
    pub study_ids: Vec<String>,
    pub counts: FacetCounts,
    pub availability: FacetAvailability,
    pub stats: SummaryStats,
}

pub fn run_query(atlas: &EvidenceAtlas, fs: &FilterState) -> Result<QueryResult, QueryError> {
    let counts = facet_counts(atlas, fs)?;
    Ok(QueryResult {
        atlas_version: atlas.version().to_string(),
        study_ids: evaluate_filter(atlas, fs)?,
        availability: counts.map(|&c| c > 0),
        counts,
        stats: summary_stats(atlas, fs)?,
    })
}
