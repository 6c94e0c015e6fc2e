//! Semantic gradients: K selection, fitting, back-projection, persistence.
//!
//! A gradient is the unit-normalized back-projection of the PCA-space
//! regression coefficients into the embedding space. The PCA width K is
//! either imposed (so published K values can be replicated exactly) or
//! chosen by a sweep that scores each K by out-of-fold fit times bootstrap
//! direction stability. All randomness flows from a per-construct seed
//! derived from (master seed, construct name), so independent constructs
//! can be fitted concurrently with reproducible results.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::doc::{DocumentMatrix, EmbedConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ols::{fit_ols, OlsCore, RegressionStats};
use crate::pca::{fit_pca, PcaModel};
use crate::stats;

/// Grid cap for document corpora.
pub const CORPUS_K_MAX: usize = 120;

/// Grid cap for item sets (small samples overfit at higher K).
pub const ITEM_K_CAP: usize = 30;

/// Unit direction in embedding space with its fit metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticGradient {
    pub name: String,
    /// Unit vector in the embedding space.
    pub beta: Vec<f64>,
    pub stats: RegressionStats,
    pub provenance: Provenance,
    /// Set once a shared mean direction has been removed.
    #[serde(default)]
    pub orthogonalized: bool,
}

impl SemanticGradient {
    pub fn dim(&self) -> usize {
        self.beta.len()
    }
}

/// Where a gradient came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub embedding_digest: String,
    pub embed_config: EmbedConfig,
    /// Fixed-K or sweep note, human readable.
    pub selection: String,
    pub rank_deficient: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// How to choose K for a fit.
#[derive(Debug, Clone)]
pub enum GradientConfig {
    FixedK(usize),
    Sweep(SweepSettings),
}

/// Sweep hyperparameters. The per-construct seed is derived from
/// `master_seed` and the construct name.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub grid: Vec<usize>,
    pub folds: usize,
    pub bootstraps: usize,
    pub master_seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            grid: sweep_grid(CORPUS_K_MAX),
            folds: 5,
            bootstraps: 20,
            master_seed: 0,
        }
    }
}

/// Even grid {2, 4, ..., k_max}.
pub fn sweep_grid(k_max: usize) -> Vec<usize> {
    (2..=k_max).step_by(2).collect()
}

/// Grid for an N-item scale: {2, 4, ..., min(N - 2, 30)}.
pub fn item_sweep_grid(n_items: usize) -> Vec<usize> {
    sweep_grid(n_items.saturating_sub(2).min(ITEM_K_CAP))
}

/// Stable sub-seed from a master seed and a label (construct name, fold
/// tag, bootstrap index). SHA-256 based so it does not depend on hasher
/// state or platform.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update([0u8]);
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

/// Deterministic cross-validation folds: a seeded shuffle of `0..n` cut
/// into `folds` contiguous chunks.
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let folds = folds.clamp(2, n.max(2));
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    (0..folds)
        .map(|f| {
            let lo = f * n / folds;
            let hi = (f + 1) * n / folds;
            idx[lo..hi].to_vec()
        })
        .collect()
}

/// Deterministic resample of `n` row indices with replacement.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// One row of the sweep score table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KScore {
    pub k: usize,
    /// Mean out-of-fold Pearson(predicted, observed), clamped at 0.
    pub fit_score: Option<f64>,
    /// Mean cosine between the full-data gradient and bootstrap gradients.
    pub stability: Option<f64>,
    /// fit_score * stability; the selection criterion.
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Outcome of [`sweep_k`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepResult {
    pub selected_k: usize,
    pub table: Vec<KScore>,
}

/// Scores every feasible K on the grid and picks the argmax of
/// fit x stability (ties to the smallest K). Infeasible K values are kept
/// in the table with a note. Fully deterministic given `seed`.
pub fn sweep_k(
    doc: &DocumentMatrix,
    grid: &[usize],
    folds: usize,
    bootstraps: usize,
    seed: u64,
) -> Result<SweepResult> {
    let n = doc.n();
    let d = doc.dim();
    if grid.is_empty() {
        return Err(Error::SweepFailed {
            message: "empty K grid".to_string(),
        });
    }

    // Deduplicate while preserving order.
    let mut ordered: Vec<usize> = Vec::new();
    for &k in grid {
        if !ordered.contains(&k) {
            ordered.push(k);
        }
    }

    let fold_sets = cv_folds(n, folds, derive_seed(seed, "cv"));
    let max_fold = fold_sets.iter().map(Vec::len).max().unwrap_or(0);
    let min_train = n - max_fold;
    let k_max = n
        .saturating_sub(2)
        .min(d)
        .min(min_train.saturating_sub(2));

    let feasible: Vec<usize> = ordered.iter().copied().filter(|&k| k >= 1 && k <= k_max).collect();
    if feasible.is_empty() {
        return Err(Error::SweepFailed {
            message: format!("no K on the grid is feasible for n={n}, dim={d}"),
        });
    }
    let k_cap = *feasible.iter().max().unwrap();

    // Full-data reference gradients at every feasible K, from one shared
    // decomposition (leading components of the k_cap fit are identical to a
    // direct fit at K).
    let x_full = doc.to_f64();
    let pca_full = fit_pca(&x_full, k_cap)?;
    let t_full = pca_full.transform(&x_full);
    let core_full = OlsCore::new(&t_full, &doc.y)?;
    let full_units: HashMap<usize, Option<Vec<f64>>> = feasible
        .iter()
        .map(|&k| {
            let (_, beta, _) = core_full.solve_leading(k);
            (k, unit_back_projection(&beta, &pca_full))
        })
        .collect();

    // Out-of-fold fit per (fold, K).
    let fold_scores: Vec<Vec<f64>> = fold_sets
        .par_iter()
        .map(|test_idx| {
            let mut in_test = vec![false; n];
            for &i in test_idx {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let (x_tr, y_tr) = doc.subset_f64(&train);
            let zeros = vec![0.0; feasible.len()];
            let pca_f = match fit_pca(&x_tr, k_cap) {
                Ok(p) => p,
                Err(_) => return zeros,
            };
            let t_tr = pca_f.transform(&x_tr);
            let core = match OlsCore::new(&t_tr, &y_tr) {
                Ok(c) => c,
                Err(_) => return zeros,
            };
            let (x_te, y_te) = doc.subset_f64(test_idx);
            let t_te = pca_f.transform(&x_te);
            feasible
                .iter()
                .map(|&k| {
                    let (alpha, beta, _) = core.solve_leading(k);
                    let yhat: Vec<f64> = (0..t_te.rows)
                        .map(|r| alpha + linalg::dot(&t_te.row(r)[..k], &beta))
                        .collect();
                    stats::pearson(&yhat, &y_te).unwrap_or(0.0)
                })
                .collect()
        })
        .collect();

    // Bootstrap direction stability per (resample, K).
    let boot_cosines: Vec<Vec<f64>> = (0..bootstraps)
        .into_par_iter()
        .map(|b| {
            let idx = bootstrap_indices(n, derive_seed(seed, &format!("boot{b}")));
            let (x_b, y_b) = doc.subset_f64(&idx);
            let zeros = vec![0.0; feasible.len()];
            let pca_b = match fit_pca(&x_b, k_cap) {
                Ok(p) => p,
                Err(_) => return zeros,
            };
            let t_b = pca_b.transform(&x_b);
            let core = match OlsCore::new(&t_b, &y_b) {
                Ok(c) => c,
                Err(_) => return zeros,
            };
            feasible
                .iter()
                .map(|&k| {
                    let (_, beta, _) = core.solve_leading(k);
                    match (unit_back_projection(&beta, &pca_b), &full_units[&k]) {
                        (Some(u), Some(f)) => linalg::dot(&u, f),
                        _ => 0.0,
                    }
                })
                .collect()
        })
        .collect();

    let mut table = Vec::with_capacity(ordered.len());
    let mut selected: Option<(usize, f64)> = None;
    for &k in &ordered {
        let Some(ki) = feasible.iter().position(|&f| f == k) else {
            table.push(KScore {
                k,
                fit_score: None,
                stability: None,
                score: None,
                note: Some(format!("skipped: infeasible for n={n} (max K {k_max})")),
            });
            continue;
        };
        let fit_mean = fold_scores.iter().map(|f| f[ki]).sum::<f64>() / fold_scores.len() as f64;
        let fit_score = fit_mean.max(0.0);
        let stability = if bootstraps == 0 {
            1.0
        } else {
            boot_cosines.iter().map(|b| b[ki]).sum::<f64>() / bootstraps as f64
        };
        let score = fit_score * stability;
        table.push(KScore {
            k,
            fit_score: Some(fit_score),
            stability: Some(stability),
            score: Some(score),
            note: None,
        });
        let better = match selected {
            None => true,
            Some((_, best)) => score > best,
        };
        if better {
            selected = Some((k, score));
        }
    }

    Ok(SweepResult {
        selected_k: selected.unwrap().0,
        table,
    })
}

/// Back-projects PCA-space coefficients to a unit embedding-space vector
/// using the leading components of `pca`.
pub fn back_project(beta_k: &[f64], pca: &PcaModel) -> Result<Vec<f64>> {
    if beta_k.is_empty() || beta_k.len() > pca.k() {
        return Err(Error::InvalidInput(format!(
            "coefficient length {} does not fit a {}-component model",
            beta_k.len(),
            pca.k()
        )));
    }
    match unit_back_projection(beta_k, pca) {
        Some(v) => Ok(v),
        None => Err(Error::DegenerateGradient),
    }
}

fn unit_back_projection(beta_k: &[f64], pca: &PcaModel) -> Option<Vec<f64>> {
    let d = pca.dim();
    let mut out = vec![0.0f64; d];
    for (i, &b) in beta_k.iter().enumerate() {
        let comp = pca.components.row(i);
        for j in 0..d {
            out[j] += b * comp[j];
        }
    }
    if linalg::normalize(&mut out) < 1e-300 {
        None
    } else {
        Some(out)
    }
}

/// Fits one gradient, returning the sweep table when a sweep ran.
pub fn fit_gradient_detailed(
    doc: &DocumentMatrix,
    config: &GradientConfig,
    name: &str,
) -> Result<(SemanticGradient, Option<SweepResult>)> {
    let (k, sweep, selection) = match config {
        GradientConfig::FixedK(k) => (*k, None, format!("fixed K={k}")),
        GradientConfig::Sweep(s) => {
            let seed = derive_seed(s.master_seed, name);
            let result = sweep_k(doc, &s.grid, s.folds, s.bootstraps, seed)?;
            let note = format!(
                "sweep selected K={} (grid of {}, folds={}, bootstraps={}, master_seed={})",
                result.selected_k,
                s.grid.len(),
                s.folds,
                s.bootstraps,
                s.master_seed
            );
            (result.selected_k, Some(result), note)
        }
    };

    let x = doc.to_f64();
    let pca = fit_pca(&x, k)?;
    let t = pca.transform(&x);
    let ols = fit_ols(&t, &doc.y)?;
    let beta = back_project(&ols.coefficients, &pca)?;

    let mut warnings = Vec::new();
    if ols.rank_deficient {
        warnings.push("rank-deficient design solved by pseudoinverse".to_string());
    }
    if doc.dropped > 0 {
        warnings.push(format!("{} documents dropped (no in-vocabulary tokens)", doc.dropped));
    }

    let gradient = SemanticGradient {
        name: name.to_string(),
        beta,
        stats: ols.stats,
        provenance: Provenance {
            embedding_digest: doc.embedding_digest.clone(),
            embed_config: doc.embed_config.clone(),
            selection,
            rank_deficient: ols.rank_deficient,
            warnings,
        },
        orthogonalized: false,
    };
    Ok((gradient, sweep))
}

/// Fits one gradient: sweep (unless fixed K) -> PCA -> OLS -> unit
/// back-projection.
pub fn fit_gradient(
    doc: &DocumentMatrix,
    config: &GradientConfig,
    name: &str,
) -> Result<SemanticGradient> {
    fit_gradient_detailed(doc, config, name).map(|(g, _)| g)
}

#[derive(Serialize, Deserialize)]
struct GradientFile {
    name: String,
    dim: usize,
    beta: Vec<f64>,
    stats: RegressionStats,
    provenance: Provenance,
    #[serde(default)]
    orthogonalized: bool,
}

/// Writes a gradient as JSON. Floats survive the round trip exactly.
pub fn save_gradient(gradient: &SemanticGradient, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = GradientFile {
        name: gradient.name.clone(),
        dim: gradient.beta.len(),
        beta: gradient.beta.clone(),
        stats: gradient.stats.clone(),
        provenance: gradient.provenance.clone(),
        orthogonalized: gradient.orthogonalized,
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::InvalidInput(format!("serialize gradient: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Reads a gradient written by [`save_gradient`].
pub fn load_gradient(path: impl AsRef<Path>) -> Result<SemanticGradient> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: GradientFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if file.beta.len() != file.dim {
        return Err(Error::Schema {
            path: path.into(),
            message: format!("dim field {} but {} beta entries", file.dim, file.beta.len()),
        });
    }
    Ok(SemanticGradient {
        name: file.name,
        beta: file.beta,
        stats: file.stats,
        provenance: file.provenance,
        orthogonalized: file.orthogonalized,
    })
}
