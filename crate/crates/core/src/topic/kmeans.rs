//! Seeded spherical k-means over unit-length sparse vectors, plus the
//! cosine silhouette used to pick k.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vector::SparseVec;

const MAX_ITERS: usize = 100;
const RESTARTS: u64 = 4;

#[derive(Debug, Clone)]
pub struct Clustering {
    /// Cluster of each document, `0..k`.
    pub labels: Vec<usize>,
    /// Unit-length dense centroids.
    pub centroids: Vec<Vec<f64>>,
    /// Sum over documents of the cosine to their centroid.
    pub objective: f64,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn normalize_dense(v: &mut [f64]) {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum());
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn best_centroid(doc: &SparseVec, centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let s = doc.dot_dense(centroid);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// k-means++ seeding on the sphere, where squared distance is `2 - 2cos`.
/// Returns fewer than `k` centers when fewer distinct documents exist.
fn seed_centers(docs: &[SparseVec], dims: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dense = |d: &SparseVec| {
        let mut v = vec![0.0; dims];
        d.add_to(&mut v);
        v
    };
    let mut centers = vec![dense(&docs[rng.random_range(0..docs.len())])];
    let mut dist: Vec<f64> = docs
        .iter()
        .map(|d| (2.0 - 2.0 * d.dot_dense(&centers[0])).max(0.0))
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        if total <= 1e-12 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = dist.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in dist.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let center = dense(&docs[pick]);
        for (i, d) in docs.iter().enumerate() {
            let nd = (2.0 - 2.0 * d.dot_dense(&center)).max(0.0);
            if nd < dist[i] {
                dist[i] = nd;
            }
        }
        centers.push(center);
    }
    centers
}

fn lloyd(docs: &[SparseVec], dims: usize, mut centroids: Vec<Vec<f64>>) -> Clustering {
    let mut labels: Vec<usize> = docs.iter().map(|d| best_centroid(d, &centroids).0).collect();
    for _ in 0..MAX_ITERS {
        let k = centroids.len();
        let mut sums = vec![vec![0.0; dims]; k];
        let mut sizes = vec![0usize; k];
        for (d, &l) in docs.iter().zip(&labels) {
            d.add_to(&mut sums[l]);
            sizes[l] += 1;
        }
        // An emptied cluster takes the document worst served by its own
        // centroid among clusters that can spare one.
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let donor = (0..docs.len())
                .filter(|&i| sizes[labels[i]] > 1)
                .map(|i| (i, docs[i].dot_dense(&centroids[labels[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
                    Some((_, bs)) if bs <= s => best,
                    _ => Some((i, s)),
                });
            if let Some((i, _)) = donor {
                let old = labels[i];
                sizes[old] -= 1;
                for &(t, w) in &docs[i].0 {
                    sums[old][t] -= w;
                }
                labels[i] = c;
                sizes[c] = 1;
                docs[i].add_to(&mut sums[c]);
            }
        }
        let keep: Vec<usize> = (0..k).filter(|&c| sizes[c] > 0).collect();
        centroids = keep
            .iter()
            .map(|&c| {
                let mut v = core::mem::take(&mut sums[c]);
                normalize_dense(&mut v);
                v
            })
            .collect();
        let next: Vec<usize> = docs.iter().map(|d| best_centroid(d, &centroids).0).collect();
        let stable = keep.len() == k && next == labels;
        labels = next;
        if stable {
            break;
        }
    }
    // Drop clusters that ended up empty after the last reassignment.
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.contains(&0) {
        let remap: Vec<Option<usize>> = {
            let mut next = 0;
            sizes
                .iter()
                .map(|&s| {
                    (s > 0).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        centroids = centroids
            .into_iter()
            .zip(&sizes)
            .filter(|(_, &s)| s > 0)
            .map(|(c, _)| c)
            .collect();
        labels = labels.iter().map(|&l| remap[l].unwrap()).collect();
    }
    let objective = docs
        .iter()
        .zip(&labels)
        .map(|(d, &l)| d.dot_dense(&centroids[l]))
        .sum();
    Clustering {
        labels,
        centroids,
        objective,
    }
}

/// Best of several seeded restarts by total cosine to centroids; earlier
/// restarts win ties.
pub fn spherical_kmeans(docs: &[SparseVec], dims: usize, k: usize, seed: u64) -> Clustering {
    assert!(!docs.is_empty() && k > 0);
    let mut best: Option<Clustering> = None;
    for restart in 0..RESTARTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ restart.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let centers = seed_centers(docs, dims, k, &mut rng);
        let run = lloyd(docs, dims, centers);
        let better = match &best {
            None => true,
            Some(b) => {
                run.k() > b.k() || (run.k() == b.k() && run.objective > b.objective + 1e-12)
            }
        };
        if better {
            best = Some(run);
        }
    }
    best.unwrap()
}

/// Pairwise cosine similarities of unit-length documents.
pub fn similarity_matrix(docs: &[SparseVec]) -> Vec<Vec<f64>> {
    let n = docs.len();
    let mut sim = vec![vec![0.0; n]; n];
    for i in 0..n {
        sim[i][i] = 1.0;
        for j in (i + 1)..n {
            let s = docs[i].dot(&docs[j]);
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }
    sim
}

/// Mean silhouette under cosine distance `1 - cos`. Singleton clusters
/// score 0.
pub fn silhouette(sim: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    if n == 0 || k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut sizes = vec![0usize; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += 1.0 - sim[i][j];
                sizes[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if sizes[own] == 0 {
            continue;
        }
        let a = sums[own] / sizes[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if b.is_finite() && denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}
