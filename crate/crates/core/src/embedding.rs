//! Word-embedding table: text-format loader, anisotropy post-processing,
//! and immutable vector lookups.
//!
//! Storage is row-major `f32` (a million 300-dim rows stay within desk-scale
//! RAM); every reduction accumulates in `f64`. A space is constructed once,
//! optionally post-processed once, and is then safe to share across threads.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Row count per covariance partial; fixed so reductions are deterministic
/// for every thread count.
const COV_CHUNK_ROWS: usize = 4096;

/// What has been done to the raw vectors, including the removed directions.
#[derive(Debug, Clone, Default)]
pub struct Postprocessing {
    pub l2_normalized: bool,
    pub mean_removed: bool,
    pub components_removed: usize,
    /// Removed principal directions, orthonormal rows of length `dim`.
    pub component_basis: Vec<Vec<f64>>,
    /// Column mean subtracted in the centering step.
    pub mean: Vec<f64>,
    pub renormalized: bool,
    /// Which vocabulary the anisotropy removal was fitted on.
    pub fit_vocabulary: String,
}

impl Postprocessing {
    pub fn is_processed(&self) -> bool {
        self.l2_normalized || self.mean_removed || self.components_removed > 0
    }
}

/// Immutable vocabulary -> vector table.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    matrix: Vec<f32>,
    dim: usize,
    pub postprocessing: Postprocessing,
    /// Content hash of the input file (or canonical entry list).
    pub source_digest: String,
    /// Duplicate tokens encountered while loading (first occurrence kept).
    pub duplicates: usize,
}

impl EmbeddingSpace {
    /// Loads the common pretrained-vector text format: one record per line,
    /// token followed by `expected_dim` ASCII floats, single-space
    /// separated, no header.
    pub fn load(path: impl AsRef<Path>, expected_dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = hex_digest(&bytes);
        let reader = BufReader::new(bytes.as_slice());

        let mut tokens = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut matrix: Vec<f32> = Vec::new();
        let mut duplicates = 0usize;

        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap();
            let mut row = Vec::with_capacity(expected_dim);
            for part in parts.by_ref() {
                let v: f32 = part.parse().map_err(|_| {
                    Error::parse(path, lineno, format!("bad float {part:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(path, lineno, format!("non-finite value {part:?}")));
                }
                row.push(v);
            }
            if row.len() != expected_dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {} dimensions, found {}", expected_dim, row.len()),
                ));
            }
            if index.contains_key(token) {
                duplicates += 1;
                continue;
            }
            index.insert(token.to_string(), tokens.len() as u32);
            tokens.push(token.to_string());
            matrix.extend_from_slice(&row);
        }

        if tokens.is_empty() {
            return Err(Error::EmptyInput { path: path.into() });
        }

        Ok(EmbeddingSpace {
            tokens,
            index,
            matrix,
            dim: expected_dim,
            postprocessing: Postprocessing::default(),
            source_digest: digest,
            duplicates,
        })
    }

    /// Builds a raw space from in-memory entries; the digest is computed
    /// over the canonical text serialization so it is stable across runs.
    pub fn from_entries(entries: Vec<(String, Vec<f32>)>, dim: usize) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        let mut matrix = Vec::new();
        let mut duplicates = 0usize;
        let mut canon = String::new();
        for (token, row) in entries {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            canon.push_str(&token);
            for v in &row {
                canon.push(' ');
                canon.push_str(&format!("{v}"));
            }
            canon.push('\n');
            if index.contains_key(&token) {
                duplicates += 1;
                continue;
            }
            index.insert(token.clone(), tokens.len() as u32);
            tokens.push(token);
            matrix.extend_from_slice(&row);
        }
        if tokens.is_empty() {
            return Err(Error::EmptyInput {
                path: "<memory>".into(),
            });
        }
        Ok(EmbeddingSpace {
            tokens,
            index,
            matrix,
            dim,
            postprocessing: Postprocessing::default(),
            source_digest: hex_digest(canon.as_bytes()),
            duplicates,
        })
    }

    /// L2-normalize rows, subtract the column mean, project out the top
    /// `components` principal directions of the centered matrix, and
    /// optionally re-normalize. Rejects spaces that were already processed.
    pub fn preprocess(mut self, components: usize, renormalize: bool) -> Result<Self> {
        if self.postprocessing.is_processed() {
            return Err(Error::AlreadyPreprocessed);
        }
        if components >= self.dim {
            return Err(Error::InvalidComponents {
                components,
                dim: self.dim,
            });
        }
        let dim = self.dim;

        // (a) normalize rows
        let mut degenerate = Vec::new();
        for (i, row) in self.matrix.chunks_exact_mut(dim).enumerate() {
            let norm = row_norm(row);
            if norm < 1e-12 {
                degenerate.push(self.tokens[i].clone());
                continue;
            }
            for v in row.iter_mut() {
                *v = (*v as f64 / norm) as f32;
            }
        }
        if !degenerate.is_empty() {
            return Err(Error::DegenerateRows { tokens: degenerate });
        }

        // (b) subtract the column mean
        let mean = self.column_mean();
        for row in self.matrix.chunks_exact_mut(dim) {
            for (v, m) in row.iter_mut().zip(&mean) {
                *v = (*v as f64 - m) as f32;
            }
        }

        // (c) remove the top principal directions of the (now centered) matrix
        let mut basis: Vec<Vec<f64>> = Vec::new();
        if components > 0 {
            basis = self.top_directions(components);
            self.matrix
                .par_chunks_mut(dim)
                .for_each(|row| project_out(row, &basis));
        }

        // (d) re-normalize so dot products stay cosines downstream
        if renormalize {
            let mut degenerate = Vec::new();
            for (i, row) in self.matrix.chunks_exact_mut(dim).enumerate() {
                let norm = row_norm(row);
                if norm < 1e-12 {
                    degenerate.push(self.tokens[i].clone());
                    continue;
                }
                for v in row.iter_mut() {
                    *v = (*v as f64 / norm) as f32;
                }
            }
            if !degenerate.is_empty() {
                return Err(Error::DegenerateRows { tokens: degenerate });
            }
        }

        self.postprocessing = Postprocessing {
            l2_normalized: true,
            mean_removed: true,
            components_removed: components,
            component_basis: basis,
            mean,
            renormalized: renormalize,
            fit_vocabulary: "full".to_string(),
        };
        Ok(self)
    }

    /// Exact stored row for `token`, or `None` when out of vocabulary.
    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| self.row(i as usize))
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Digest binding downstream artifacts to this space *and* its
    /// post-processing settings, not just the raw input file.
    pub fn digest(&self) -> String {
        let p = &self.postprocessing;
        let tag = format!(
            "{}|l2={}|mean={}|removed={}|renorm={}",
            self.source_digest, p.l2_normalized, p.mean_removed, p.components_removed, p.renormalized
        );
        hex_digest(tag.as_bytes())
    }

    fn column_mean(&self) -> Vec<f64> {
        let dim = self.dim;
        let partials: Vec<Vec<f64>> = self
            .matrix
            .par_chunks(COV_CHUNK_ROWS * dim)
            .map(|chunk| {
                let mut acc = vec![0.0f64; dim];
                for row in chunk.chunks_exact(dim) {
                    for (a, &v) in acc.iter_mut().zip(row) {
                        *a += v as f64;
                    }
                }
                acc
            })
            .collect();
        let mut mean = vec![0.0f64; dim];
        for p in partials {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        let n = self.tokens.len() as f64;
        for m in mean.iter_mut() {
            *m /= n;
        }
        mean
    }

    /// Top-k principal directions of the current matrix (assumed centered),
    /// descending eigenvalue order, each with its first nonzero coordinate
    /// positive.
    fn top_directions(&self, k: usize) -> Vec<Vec<f64>> {
        let dim = self.dim;
        let partials: Vec<Vec<f64>> = self
            .matrix
            .par_chunks(COV_CHUNK_ROWS * dim)
            .map(|chunk| {
                let mut acc = vec![0.0f64; dim * dim];
                for row in chunk.chunks_exact(dim) {
                    for i in 0..dim {
                        let xi = row[i] as f64;
                        for j in i..dim {
                            acc[i * dim + j] += xi * row[j] as f64;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut cov = Mat::zeros(dim, dim);
        for p in partials {
            for (c, v) in cov.data.iter_mut().zip(p) {
                *c += v;
            }
        }
        for i in 0..dim {
            for j in 0..i {
                cov.data[i * dim + j] = cov.data[j * dim + i];
            }
        }
        let (_, vecs) = linalg::symmetric_eigen(&cov);
        (0..k)
            .map(|i| {
                let mut v = vecs.row(i).to_vec();
                linalg::fix_sign(&mut v);
                v
            })
            .collect()
    }
}

fn row_norm(row: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for &v in row {
        acc += v as f64 * v as f64;
    }
    acc.sqrt()
}

fn project_out(row: &mut [f32], basis: &[Vec<f64>]) {
    for u in basis {
        let mut c = 0.0f64;
        for (x, b) in row.iter().zip(u) {
            c += *x as f64 * b;
        }
        for (x, b) in row.iter_mut().zip(u) {
            *x = (*x as f64 - c * b) as f32;
        }
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
