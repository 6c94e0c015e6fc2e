//! Qualitative audit of a gradient through its pole neighborhoods.
//!
//! The top vocabulary neighbors of +beta (or -beta) are clustered with
//! k-means over k in [2, 8]; k is chosen by mean silhouette under cosine
//! distance (the range comes from the pipeline being reproduced, the
//! selection rule is this crate's documented choice and is recorded in the
//! report). Clusters are ordered by centroid-gradient alignment and
//! members by cosine to their centroid.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::freq::FrequencyTable;
use crate::gradient::{derive_seed, SemanticGradient};
use crate::linalg::{self, Mat};

/// Restarts per k; best inertia wins, ties to the earliest restart.
pub const KMEANS_RESTARTS: usize = 50;

const MAX_LLOYD_ITERS: usize = 100;

/// Which end of the gradient to audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    Positive,
    Negative,
}

impl Pole {
    pub fn sign(self) -> f64 {
        match self {
            Pole::Positive => 1.0,
            Pole::Negative => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Pole::Positive => "+",
            Pole::Negative => "-",
        }
    }
}

/// Vocabulary filter applied before neighbor ranking. The default drops
/// everything but lowercase alphabetic tokens of length >= 2; a frequency
/// floor can exclude rare junk from web-scale vocabularies.
#[derive(Debug, Clone)]
pub struct NeighborFilter<'a> {
    pub alphabetic_only: bool,
    pub min_len: usize,
    pub freq_floor: Option<(&'a FrequencyTable, f64)>,
}

impl Default for NeighborFilter<'_> {
    fn default() -> Self {
        NeighborFilter {
            alphabetic_only: true,
            min_len: 2,
            freq_floor: None,
        }
    }
}

impl NeighborFilter<'_> {
    fn keeps(&self, token: &str) -> bool {
        if token.chars().count() < self.min_len {
            return false;
        }
        if self.alphabetic_only
            && !(token.chars().all(|c| c.is_alphabetic()) && token == token.to_lowercase())
        {
            return false;
        }
        if let Some((freq, floor)) = self.freq_floor {
            if freq.probability(token) < floor {
                return false;
            }
        }
        true
    }
}

/// Ranked neighbor list for one pole.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborList {
    /// (token, cosine with pole * beta), descending.
    pub neighbors: Vec<(String, f64)>,
    /// Fewer tokens passed the filter than were requested.
    pub short_of_request: bool,
}

/// Top-`n` vocabulary tokens by cosine with `pole * beta`.
pub fn pole_neighbors(
    space: &EmbeddingSpace,
    g: &SemanticGradient,
    pole: Pole,
    n: usize,
    filter: &NeighborFilter,
) -> Result<NeighborList> {
    if n < 1 {
        return Err(Error::InvalidInput("neighbor count must be >= 1".to_string()));
    }
    if g.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: g.dim(),
        });
    }
    let sign = pole.sign();
    let mut scored: Vec<(String, f64)> = space
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| filter.keeps(t))
        .map(|(i, t)| {
            let row = space.row(i);
            let mut dot = 0.0f64;
            let mut nrm = 0.0f64;
            for (&v, &b) in row.iter().zip(&g.beta) {
                dot += v as f64 * b;
                nrm += v as f64 * v as f64;
            }
            let cos = if nrm > 0.0 { sign * dot / nrm.sqrt() } else { 0.0 };
            (t.clone(), cos)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let short = scored.len() < n;
    scored.truncate(n);
    Ok(NeighborList {
        neighbors: scored,
        short_of_request: short,
    })
}

/// One cluster in a pole report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterGroup {
    pub size: usize,
    /// Centroid dotted with pole * beta; the ordering key.
    pub alignment: f64,
    /// (token, cosine to centroid), descending.
    pub members: Vec<(String, f64)>,
}

/// Silhouette (or skip note) for one k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub silhouette: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Pole audit: clusters of the top neighbors, ordered by alignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub gradient: String,
    pub pole: Pole,
    /// `None` only for the degenerate single-cluster report.
    pub k_chosen: Option<usize>,
    pub clusters: Vec<ClusterGroup>,
    pub selection_scores: Vec<KSelection>,
    /// Records the documented selection rule and seeding.
    pub method: String,
}

/// Clusters `tokens` (already ranked pole neighbors) in embedding space.
///
/// k-means++ seeding, [`KMEANS_RESTARTS`] restarts per k, deterministic for
/// a given `seed`. A k whose best run collapses below k nonempty clusters
/// is skipped; if every k collapses the report degenerates to one cluster.
pub fn cluster_pole(
    space: &EmbeddingSpace,
    tokens: &[String],
    g: &SemanticGradient,
    pole: Pole,
    k_range: (usize, usize),
    seed: u64,
) -> Result<ClusterReport> {
    let (k_lo, k_hi) = k_range;
    if k_lo < 1 || k_hi < k_lo {
        return Err(Error::InvalidInput(format!("bad k range {k_lo}..={k_hi}")));
    }
    if tokens.len() < k_hi {
        return Err(Error::InvalidInput(format!(
            "{} tokens cannot support k up to {k_hi}",
            tokens.len()
        )));
    }
    let n = tokens.len();
    let d = space.dim();
    let mut points = Mat::zeros(n, d);
    for (i, t) in tokens.iter().enumerate() {
        let row = space.vector(t).ok_or_else(|| Error::Validation {
            id: t.clone(),
            message: "token not in vocabulary".to_string(),
        })?;
        for (j, &v) in row.iter().enumerate() {
            points.set(i, j, v as f64);
        }
    }

    // Pairwise cosine distances for the silhouette criterion.
    let norms: Vec<f64> = (0..n).map(|i| linalg::norm(points.row(i))).collect();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let denom = norms[i] * norms[j];
            let cos = if denom > 0.0 {
                linalg::dot(points.row(i), points.row(j)) / denom
            } else {
                0.0
            };
            let dv = 1.0 - cos;
            dist[i * n + j] = dv;
            dist[j * n + i] = dv;
        }
    }

    let mut selection_scores = Vec::new();
    let mut best: Option<(f64, usize, Vec<usize>)> = None; // (silhouette, k, labels)
    for k in k_lo..=k_hi {
        let runs: Vec<Option<KmeansRun>> = (0..KMEANS_RESTARTS)
            .into_par_iter()
            .map(|r| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("k{k}r{r}")));
                lloyd(&points, k, &mut rng)
            })
            .collect();
        let mut best_run: Option<&KmeansRun> = None;
        for run in runs.iter().flatten() {
            let better = match best_run {
                None => true,
                Some(b) => run.inertia < b.inertia,
            };
            if better {
                best_run = Some(run);
            }
        }
        match best_run {
            None => {
                selection_scores.push(KSelection {
                    k,
                    silhouette: None,
                    note: Some("skipped: clusters collapsed".to_string()),
                });
            }
            Some(run) => {
                let sil = mean_silhouette(&run.labels, k, &dist, n);
                selection_scores.push(KSelection {
                    k,
                    silhouette: Some(sil),
                    note: None,
                });
                let better = match &best {
                    None => true,
                    Some((s, _, _)) => sil > *s,
                };
                if better {
                    best = Some((sil, k, run.labels.clone()));
                }
            }
        }
    }

    let method = format!(
        "k-means++ with {KMEANS_RESTARTS} restarts; k by mean silhouette (cosine distance); \
         members by cosine to centroid; seed {seed}"
    );

    let (k_chosen, labels) = match best {
        Some((_, k, labels)) => (Some(k), labels),
        // Degenerate: a single cluster holding everything.
        None => (None, vec![0usize; n]),
    };
    let n_clusters = k_chosen.unwrap_or(1);
    let clusters = build_groups(&points, tokens, &labels, n_clusters, &g.beta, pole);

    Ok(ClusterReport {
        gradient: g.name.clone(),
        pole,
        k_chosen,
        clusters,
        selection_scores,
        method,
    })
}

struct KmeansRun {
    labels: Vec<usize>,
    inertia: f64,
}

/// Lloyd iterations from a k-means++ start. Returns `None` when the final
/// partition has fewer than `k` nonempty clusters.
fn lloyd(points: &Mat, k: usize, rng: &mut ChaCha8Rng) -> Option<KmeansRun> {
    let n = points.rows;
    let d = points.cols;
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut labels = vec![usize::MAX; n];

    for _ in 0..MAX_LLOYD_ITERS {
        // Assignment.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = sq_dist(points.row(i), centroids.row(c));
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Update.
        let mut sums = vec![0.0f64; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = labels[i];
            counts[c] += 1;
            for (s, &v) in sums[c * d..(c + 1) * d].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids.set(c, j, sums[c * d + j] / counts[c] as f64);
                }
            }
        }
        // Re-seed empty clusters on the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let mut far_i = 0usize;
                let mut far_d = -1.0f64;
                for i in 0..n {
                    let dd = sq_dist(points.row(i), centroids.row(labels[i]));
                    if dd > far_d {
                        far_d = dd;
                        far_i = i;
                    }
                }
                for j in 0..d {
                    centroids.set(c, j, points.get(far_i, j));
                }
            }
        }
    }

    let mut counts = vec![0usize; k];
    let mut inertia = 0.0f64;
    for i in 0..n {
        counts[labels[i]] += 1;
        inertia += sq_dist(points.row(i), centroids.row(labels[i]));
    }
    if counts.iter().any(|&c| c == 0) {
        return None;
    }
    Some(KmeansRun { labels, inertia })
}

/// k-means++: first centroid uniform, the rest sampled proportionally to
/// squared distance from the nearest chosen centroid.
fn kmeans_pp_init(points: &Mat, k: usize, rng: &mut ChaCha8Rng) -> Mat {
    let n = points.rows;
    let d = points.cols;
    let mut centroids = Mat::zeros(k, d);
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));

    let mut min_d: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &dd) in min_d.iter().enumerate() {
                target -= dd;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass at zero distance: every point duplicates a
            // centroid; any choice collapses, pick deterministically.
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for i in 0..n {
            let dd = sq_dist(points.row(i), centroids.row(c));
            if dd < min_d[i] {
                min_d[i] = dd;
            }
        }
    }
    centroids
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let dl = x - y;
        acc += dl * dl;
    }
    acc
}

/// Mean silhouette under a precomputed distance matrix. Singletons score 0.
fn mean_silhouette(labels: &[usize], k: usize, dist: &[f64], n: usize) -> f64 {
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0f64;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] <= 1 {
            continue; // s(i) = 0
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist[i * n + j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && sizes[c] > 0 {
                b = b.min(sums[c] / sizes[c] as f64);
            }
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

fn build_groups(
    points: &Mat,
    tokens: &[String],
    labels: &[usize],
    k: usize,
    beta: &[f64],
    pole: Pole,
) -> Vec<ClusterGroup> {
    let n = points.rows;
    let d = points.cols;
    let sign = pole.sign();
    let mut groups = Vec::with_capacity(k);
    for c in 0..k {
        let idxs: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        if idxs.is_empty() {
            continue;
        }
        let mut centroid = vec![0.0f64; d];
        for &i in &idxs {
            for (ce, &v) in centroid.iter_mut().zip(points.row(i)) {
                *ce += v;
            }
        }
        for ce in centroid.iter_mut() {
            *ce /= idxs.len() as f64;
        }
        let alignment = sign * linalg::dot(&centroid, beta);
        let mut members: Vec<(String, f64)> = idxs
            .iter()
            .map(|&i| {
                (
                    tokens[i].clone(),
                    linalg::cosine(points.row(i), &centroid),
                )
            })
            .collect();
        members.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        groups.push(ClusterGroup {
            size: idxs.len(),
            alignment,
            members,
        });
    }
    groups.sort_by(|a, b| {
        b.alignment
            .partial_cmp(&a.alignment)
            .unwrap()
            .then_with(|| b.size.cmp(&a.size))
            .then_with(|| a.members[0].0.cmp(&b.members[0].0))
    });
    groups
}
