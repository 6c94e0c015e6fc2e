//! Documents to vectors: tokenization, SIF weights, and corpus embedding.
//!
//! Document vectors are SIF-weighted means of in-vocabulary token vectors,
//! with two special cases from the pipeline this crate reproduces: a
//! single-token document in "full doc" mode is the token vector verbatim
//! (used for rated word norms), and an optional common-component removal
//! projects the top principal direction of the document matrix out of every
//! row (skipped automatically when every row was a verbatim token vector,
//! because word-level anisotropy removal already covered it).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::freq::FrequencyTable;
use crate::linalg::{self, Mat};

/// Identifier recorded for the built-in tokenizer rule.
pub const TOKENIZER_ID: &str = "unicode-lower-v1";

/// Default SIF smoothing constant.
pub const DEFAULT_SIF_A: f64 = 1e-3;

/// Lowercased Unicode tokens: the text splits on every non-alphanumeric
/// boundary, and standalone punctuation and pure-digit tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .filter(|s| !s.chars().all(|c| c.is_numeric()))
        .map(|s| s.to_lowercase())
        .collect()
}

/// SIF weight `a / (a + p(token))`, in (0, 1].
pub fn sif_weight(freq: &FrequencyTable, token: &str, a: f64) -> f64 {
    assert!(a > 0.0, "SIF smoothing constant must be positive");
    a / (a + freq.probability(token))
}

/// Settings for [`embed_corpus`].
#[derive(Debug, Clone)]
pub struct EmbedOptions {
    pub a: f64,
    /// Single in-vocabulary-token documents become that token's vector.
    pub use_full_doc: bool,
    /// Remove the top principal component of the document matrix.
    pub remove_doc_pc: bool,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            a: DEFAULT_SIF_A,
            use_full_doc: false,
            remove_doc_pc: true,
        }
    }
}

/// How a document matrix was produced; stored alongside it and carried into
/// gradient provenance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbedConfig {
    pub tokenizer: String,
    pub a: f64,
    pub use_full_doc: bool,
    /// Whether the document-level component was actually removed.
    pub doc_pc_removed: bool,
    /// True when removal was requested but skipped because every document
    /// used the verbatim single-token path.
    pub doc_pc_forced_off: bool,
    pub frequency_source: String,
    /// The removed document-level direction, when any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub doc_component: Option<Vec<f64>>,
}

impl EmbedConfig {
    /// Placeholder config for matrices assembled from precomputed rows.
    pub fn precomputed() -> Self {
        EmbedConfig {
            tokenizer: "precomputed".to_string(),
            a: DEFAULT_SIF_A,
            use_full_doc: false,
            doc_pc_removed: false,
            doc_pc_forced_off: false,
            frequency_source: "none".to_string(),
            doc_component: None,
        }
    }
}

/// Embedded corpus: ids, document vectors, and outcomes, row-aligned.
#[derive(Debug, Clone)]
pub struct DocumentMatrix {
    pub ids: Vec<String>,
    x: Vec<f32>,
    dim: usize,
    pub y: Vec<f64>,
    /// Documents dropped for having no in-vocabulary tokens.
    pub dropped: usize,
    pub embed_config: EmbedConfig,
    /// Digest of the embedding space (including its post-processing) the
    /// rows were built from.
    pub embedding_digest: String,
}

impl DocumentMatrix {
    /// Assembles a matrix from precomputed rows. Used by synthetic
    /// pipelines and tests; the same row/outcome invariants apply as for
    /// [`embed_corpus`].
    pub fn from_parts(
        ids: Vec<String>,
        x: Vec<f32>,
        dim: usize,
        y: Vec<f64>,
        embed_config: EmbedConfig,
        embedding_digest: String,
    ) -> Result<Self> {
        if ids.len() != y.len() || ids.len() * dim != x.len() {
            return Err(Error::InvalidInput(format!(
                "inconsistent shapes: {} ids, {} outcomes, {} values for dim {}",
                ids.len(),
                y.len(),
                x.len(),
                dim
            )));
        }
        for (id, &out) in ids.iter().zip(&y) {
            if !out.is_finite() {
                return Err(Error::Validation {
                    id: id.clone(),
                    message: format!("non-finite outcome {out}"),
                });
            }
        }
        check_no_zero_rows(&ids, &x, dim)?;
        Ok(DocumentMatrix {
            ids,
            x,
            dim,
            y,
            dropped: 0,
            embed_config,
            embedding_digest,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Copy of the matrix in `f64` for the fitting pipeline.
    pub fn to_f64(&self) -> Mat {
        Mat {
            rows: self.n(),
            cols: self.dim,
            data: self.x.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Matrix restricted to a row subset, in input order of `rows`.
    pub fn subset_f64(&self, rows: &[usize]) -> (Mat, Vec<f64>) {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        let mut y = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend(self.row(r).iter().map(|&v| v as f64));
            y.push(self.y[r]);
        }
        (
            Mat {
                rows: rows.len(),
                cols: self.dim,
                data,
            },
            y,
        )
    }
}

/// Embeds `(id, text)` documents with aligned outcomes `y`.
///
/// Documents with zero in-vocabulary tokens are dropped from the matrix,
/// ids, and outcomes, and counted in `dropped`. Row order equals input
/// order regardless of the parallel schedule.
pub fn embed_corpus(
    space: &EmbeddingSpace,
    docs: &[(String, String)],
    y: &[f64],
    freq: &FrequencyTable,
    opts: &EmbedOptions,
) -> Result<DocumentMatrix> {
    if docs.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} documents but {} outcomes",
            docs.len(),
            y.len()
        )));
    }
    if docs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 documents, got {}",
            docs.len()
        )));
    }
    for ((id, _), &out) in docs.iter().zip(y) {
        if !out.is_finite() {
            return Err(Error::Validation {
                id: id.clone(),
                message: format!("non-finite outcome {out}"),
            });
        }
    }

    let dim = space.dim();

    enum DocVec {
        Dropped,
        Verbatim(Vec<f32>),
        Weighted(Vec<f32>),
    }

    let embedded: Vec<DocVec> = docs
        .par_iter()
        .map(|(_, text)| {
            let tokens = tokenize(text);
            let in_vocab: Vec<(&str, &[f32])> = tokens
                .iter()
                .filter_map(|t| space.vector(t).map(|v| (t.as_str(), v)))
                .collect();
            if in_vocab.is_empty() {
                return DocVec::Dropped;
            }
            if opts.use_full_doc && in_vocab.len() == 1 {
                return DocVec::Verbatim(in_vocab[0].1.to_vec());
            }
            let weights: Vec<f64> = in_vocab
                .iter()
                .map(|(t, _)| sif_weight(freq, t, opts.a))
                .collect();
            let wsum: f64 = weights.iter().sum();
            let mut row = vec![0.0f64; dim];
            for ((_, vec), w) in in_vocab.iter().zip(&weights) {
                let scale = w / wsum;
                for (acc, &v) in row.iter_mut().zip(*vec) {
                    *acc += scale * v as f64;
                }
            }
            DocVec::Weighted(row.into_iter().map(|v| v as f32).collect())
        })
        .collect();

    let mut ids = Vec::new();
    let mut x: Vec<f32> = Vec::new();
    let mut y_kept = Vec::new();
    let mut dropped = 0usize;
    let mut all_verbatim = true;
    for (i, dv) in embedded.into_iter().enumerate() {
        match dv {
            DocVec::Dropped => dropped += 1,
            DocVec::Verbatim(row) => {
                ids.push(docs[i].0.clone());
                x.extend_from_slice(&row);
                y_kept.push(y[i]);
            }
            DocVec::Weighted(row) => {
                all_verbatim = false;
                ids.push(docs[i].0.clone());
                x.extend_from_slice(&row);
                y_kept.push(y[i]);
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    check_no_zero_rows(&ids, &x, dim)?;

    let forced_off = opts.remove_doc_pc && opts.use_full_doc && all_verbatim;
    let do_removal = opts.remove_doc_pc && !forced_off;
    let mut doc_component = None;
    if do_removal {
        let comp = top_doc_component(&x, ids.len(), dim);
        for row in x.chunks_exact_mut(dim) {
            let mut c = 0.0f64;
            for (v, b) in row.iter().zip(&comp) {
                c += *v as f64 * b;
            }
            for (v, b) in row.iter_mut().zip(&comp) {
                *v = (*v as f64 - c * b) as f32;
            }
        }
        check_no_zero_rows(&ids, &x, dim)?;
        doc_component = Some(comp);
    }

    Ok(DocumentMatrix {
        ids,
        x,
        dim,
        y: y_kept,
        dropped,
        embed_config: EmbedConfig {
            tokenizer: TOKENIZER_ID.to_string(),
            a: opts.a,
            use_full_doc: opts.use_full_doc,
            doc_pc_removed: do_removal,
            doc_pc_forced_off: forced_off,
            frequency_source: freq.source.label(),
            doc_component,
        },
        embedding_digest: space.digest(),
    })
}

/// Top right-singular direction of the (uncentered) document matrix: the
/// common component in the SIF sense, which is removed without centering.
fn top_doc_component(x: &[f32], n: usize, dim: usize) -> Vec<f64> {
    let mut moment = Mat::zeros(dim, dim);
    for row in x.chunks_exact(dim).take(n) {
        for i in 0..dim {
            let xi = row[i] as f64;
            for j in i..dim {
                moment.data[i * dim + j] += xi * row[j] as f64;
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            moment.data[i * dim + j] = moment.data[j * dim + i];
        }
    }
    let (_, vecs) = linalg::symmetric_eigen(&moment);
    let mut comp = vecs.row(0).to_vec();
    linalg::fix_sign(&mut comp);
    comp
}

fn check_no_zero_rows(ids: &[String], x: &[f32], dim: usize) -> Result<()> {
    for (i, row) in x.chunks_exact(dim).enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            return Err(Error::Validation {
                id: ids[i].clone(),
                message: "document vector is identically zero".to_string(),
            });
        }
    }
    Ok(())
}
