//! Agreement between repeated topic-model runs over one corpus.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topic::{AssignmentTable, TopicModel, UNCLASSIFIED_ID, UNCLASSIFIED_LABEL};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StabilityError {
    #[error("runs cover different study sets")]
    DomainMismatch,
    #[error("need at least {needed} runs, got {got}")]
    TooFewRuns { needed: usize, got: usize },
}

/// Study id to cluster key. Keys are opaque; the unclassified topic is an
/// ordinary cluster here.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Partition(pub BTreeMap<String, String>);

impl Partition {
    pub fn from_assignments(table: &AssignmentTable) -> Self {
        Self(
            table
                .assignments
                .iter()
                .map(|a| (a.study_id.clone(), a.topic_id.clone()))
                .collect(),
        )
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self(
            pairs
                .into_iter()
                .map(|(s, c)| (s.to_string(), c.to_string()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn same_domain(&self, other: &Partition) -> bool {
        self.0.len() == other.0.len() && self.0.keys().eq(other.0.keys())
    }

    /// Members of each cluster key.
    pub fn clusters(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (study, cluster) in &self.0 {
            out.entry(cluster.as_str()).or_default().insert(study.as_str());
        }
        out
    }
}

fn pairs(n: usize) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Adjusted Rand index from the contingency table of the two partitions.
///
/// When the expected and maximum index coincide (both partitions all one
/// cluster, or all singletons, or fewer than two studies) the partitions
/// are identical and the result is 1.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64, StabilityError> {
    if !a.same_domain(b) {
        return Err(StabilityError::DomainMismatch);
    }
    let mut table: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&str, usize> = BTreeMap::new();
    for ((_, ka), (_, kb)) in a.0.iter().zip(&b.0) {
        *table.entry((ka, kb)).or_default() += 1;
        *rows.entry(ka).or_default() += 1;
        *cols.entry(kb).or_default() += 1;
    }
    // Scaled by 2·C(n,2) so every term is an integer and the result is a
    // single division.
    let index: i128 = table.values().map(|&n| pairs(n)).sum();
    let sum_rows: i128 = rows.values().map(|&n| pairs(n)).sum();
    let sum_cols: i128 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(a.len());
    let numerator = 2 * total * index - 2 * sum_rows * sum_cols;
    let denominator = total * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols;
    if denominator == 0 {
        return Ok(1.0);
    }
    Ok(numerator as f64 / denominator as f64)
}

fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn members<'a>(model: &'a TopicModel, table: &'a AssignmentTable) -> Vec<(&'a str, BTreeSet<&'a str>)> {
    model
        .topics
        .iter()
        .map(|t| {
            let set = table
                .assignments
                .iter()
                .filter(|a| a.topic_id == t.topic_id)
                .map(|a| a.study_id.as_str())
                .collect();
            (t.topic_id.as_str(), set)
        })
        .collect()
}

/// Greedy maximum-Jaccard matching of the two runs' topics by member set.
///
/// Pairs are taken best-first, ties by lower reference index and then
/// lower other index. Topics left without a positive-overlap partner map
/// to `None`.
pub fn align_topic_labels(
    reference: (&TopicModel, &AssignmentTable),
    other: (&TopicModel, &AssignmentTable),
) -> Result<BTreeMap<String, Option<String>>, StabilityError> {
    let pa = Partition::from_assignments(reference.1);
    let pb = Partition::from_assignments(other.1);
    if !pa.same_domain(&pb) {
        return Err(StabilityError::DomainMismatch);
    }
    let ref_members = members(reference.0, reference.1);
    let other_members = members(other.0, other.1);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, (_, a)) in ref_members.iter().enumerate() {
        for (j, (_, b)) in other_members.iter().enumerate() {
            let overlap = a.intersection(b).count();
            if overlap > 0 {
                candidates.push((jaccard(a, b), i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut mapping: BTreeMap<String, Option<String>> = ref_members
        .iter()
        .map(|(id, _)| (id.to_string(), None))
        .collect();
    let mut used_ref = vec![false; ref_members.len()];
    let mut used_other = vec![false; other_members.len()];
    for (_, i, j) in candidates {
        if used_ref[i] || used_other[j] {
            continue;
        }
        used_ref[i] = true;
        used_other[j] = true;
        mapping.insert(ref_members[i].0.to_string(), Some(other_members[j].0.to_string()));
    }
    Ok(mapping)
}

/// Fraction of runs placing each unordered study pair in one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoAssignment {
    /// Sorted study ids; row/column order of the matrix.
    pub study_ids: Vec<String>,
    /// Upper triangle, row-major, `i < j`.
    pub frequencies: Vec<f64>,
    pub runs: usize,
}

impl CoAssignment {
    fn offset(&self, i: usize, j: usize) -> usize {
        let n = self.study_ids.len();
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Frequency for two study positions; 1 on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => 1.0,
            core::cmp::Ordering::Less => self.frequencies[self.offset(i, j)],
            core::cmp::Ordering::Greater => self.frequencies[self.offset(j, i)],
        }
    }

    pub fn summary(&self) -> CoAssignmentSummary {
        let n = self.frequencies.len();
        if n == 0 {
            return CoAssignmentSummary {
                mean: 0.0,
                fraction_binary: 1.0,
            };
        }
        let binary = self
            .frequencies
            .iter()
            .filter(|&&f| f == 0.0 || f == 1.0)
            .count();
        CoAssignmentSummary {
            mean: self.frequencies.iter().sum::<f64>() / n as f64,
            fraction_binary: binary as f64 / n as f64,
        }
    }
}

pub fn co_assignment_matrix(runs: &[Partition]) -> Result<CoAssignment, StabilityError> {
    let first = runs.first().ok_or(StabilityError::TooFewRuns { needed: 1, got: 0 })?;
    if runs.iter().any(|r| !r.same_domain(first)) {
        return Err(StabilityError::DomainMismatch);
    }
    let study_ids: Vec<String> = first.0.keys().cloned().collect();
    let n = study_ids.len();
    let mut together = vec![0u32; n * n.saturating_sub(1) / 2];
    for run in runs {
        // Partition keys iterate in the same sorted order as study_ids.
        let keys: Vec<&str> = run.0.values().map(String::as_str).collect();
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if keys[i] == keys[j] {
                    together[k] += 1;
                }
                k += 1;
            }
        }
    }
    let r = runs.len() as f64;
    Ok(CoAssignment {
        study_ids,
        frequencies: together.into_iter().map(|c| c as f64 / r).collect(),
        runs: runs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoAssignmentSummary {
    pub mean: f64,
    /// Share of pairs always or never placed together.
    pub fraction_binary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPersistence {
    pub topic_id: String,
    pub label: String,
    /// Best Jaccard overlap with any cluster of each later run.
    pub best_jaccard: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub run_ids: Vec<String>,
    pub ari: Vec<Vec<f64>>,
    pub mean_ari: f64,
    pub co_assignment: CoAssignmentSummary,
    /// One entry per non-empty cluster of the first (reference) run.
    pub persistence: Vec<TopicPersistence>,
}

/// A run as `(run id, model, assignments)`.
pub type RunRef<'a> = (&'a str, &'a TopicModel, &'a AssignmentTable);

pub fn stability_report(runs: &[RunRef<'_>]) -> Result<StabilityReport, StabilityError> {
    if runs.len() < 2 {
        return Err(StabilityError::TooFewRuns {
            needed: 2,
            got: runs.len(),
        });
    }
    let partitions: Vec<Partition> = runs
        .iter()
        .map(|(_, _, t)| Partition::from_assignments(t))
        .collect();
    let n = runs.len();
    let mut ari = vec![vec![1.0; n]; n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = adjusted_rand_index(&partitions[i], &partitions[j])?;
            ari[i][j] = v;
            ari[j][i] = v;
            sum += v;
        }
    }
    let co = co_assignment_matrix(&partitions)?;

    let (_, ref_model, _) = runs[0];
    let ref_clusters = partitions[0].clusters();
    let mut ordered: Vec<(&str, &str)> = ref_model
        .topics
        .iter()
        .map(|t| (t.topic_id.as_str(), t.label.as_str()))
        .collect();
    ordered.push((UNCLASSIFIED_ID, UNCLASSIFIED_LABEL));
    let other_clusters: Vec<_> = partitions[1..].iter().map(Partition::clusters).collect();
    let persistence = ordered
        .into_iter()
        .filter_map(|(id, label)| {
            let set = ref_clusters.get(id)?;
            Some(TopicPersistence {
                topic_id: id.to_string(),
                label: label.to_string(),
                best_jaccard: other_clusters
                    .iter()
                    .map(|clusters| {
                        clusters
                            .values()
                            .map(|other| jaccard(set, other))
                            .fold(0.0, f64::max)
                    })
                    .collect(),
            })
        })
        .collect();

    Ok(StabilityReport {
        run_ids: runs.iter().map(|(id, _, _)| id.to_string()).collect(),
        ari,
        mean_ari: sum / pairs(n) as f64,
        co_assignment: co.summary(),
        persistence,
    })
}
