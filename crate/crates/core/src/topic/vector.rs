//! Sparse term vectors and TF-IDF weighting.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Terms in lexicographic order, so term ids do not depend on document
/// order.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut index = BTreeMap::new();
        for doc in docs {
            for token in doc {
                index.entry(token.clone()).or_insert(0);
            }
        }
        let terms: Vec<String> = index.keys().cloned().collect();
        for (i, term) in terms.iter().enumerate() {
            index.insert(term.clone(), i);
        }
        Self { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// `(term id, weight)` pairs sorted by term id, no zero weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec(pub Vec<(usize, f64)>);

impl SparseVec {
    /// Raw term counts of a token list; tokens outside the vocabulary are
    /// skipped.
    pub fn counts(tokens: &[String], vocab: &Vocabulary) -> Self {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(id) = vocab.id(t) {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        Self(counts.into_iter().collect())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|(_, w)| w * w).sum())
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for (_, w) in &mut self.0 {
                *w /= n;
            }
        }
        self
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.0.len() && j < other.0.len() {
            let (a, wa) = self.0[i];
            let (b, wb) = other.0[j];
            match a.cmp(&b) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    acc += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.0.iter().map(|&(t, w)| w * dense[t]).sum()
    }

    pub fn add_to(&self, dense: &mut [f64]) {
        for &(t, w) in &self.0 {
            dense[t] += w;
        }
    }
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        (a.dot(b) / denom).clamp(0.0, 1.0)
    }
}

/// L2-normalized TF-IDF rows with smoothed idf `ln((1+n)/(1+df)) + 1`.
pub fn tfidf(counts: &[SparseVec], vocab_len: usize) -> Vec<SparseVec> {
    let n = counts.len() as f64;
    let mut df = vec![0usize; vocab_len];
    for doc in counts {
        for &(t, _) in &doc.0 {
            df[t] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| libm::log((1.0 + n) / (1.0 + d as f64)) + 1.0)
        .collect();
    counts
        .iter()
        .map(|doc| {
            SparseVec(doc.0.iter().map(|&(t, c)| (t, c * idf[t])).collect()).normalized()
        })
        .collect()
}
