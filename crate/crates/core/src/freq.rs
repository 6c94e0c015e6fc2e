//! Unigram probabilities for SIF weighting.
//!
//! Pretrained vector files ship no frequencies, so the table can come from
//! a sidecar `token count` file, be derived from the analysis corpus
//! itself, or be uniform (which reduces the SIF-weighted mean to a plain
//! mean after weight normalization). The origin is recorded so document
//! matrices can label which variant produced them.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FreqSource {
    Sidecar(String),
    Corpus,
    Uniform,
}

impl FreqSource {
    pub fn label(&self) -> String {
        match self {
            FreqSource::Sidecar(p) => format!("sidecar:{p}"),
            FreqSource::Corpus => "corpus".to_string(),
            FreqSource::Uniform => "uniform".to_string(),
        }
    }
}

/// Token -> unigram probability table with a fallback for unseen tokens.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    probs: HashMap<String, f64>,
    pub total: u64,
    pub fallback_prob: f64,
    pub source: FreqSource,
}

impl FrequencyTable {
    /// Reads a sidecar file of `token whitespace count` lines. Counts for
    /// repeated tokens are summed.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap();
            let count: u64 = parts
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "missing count"))?
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad count"))?;
            if parts.next().is_some() {
                return Err(Error::parse(path, lineno, "trailing fields"));
            }
            *counts.entry(token.to_string()).or_insert(0) += count;
            total += count;
        }
        if total == 0 {
            return Err(Error::EmptyInput { path: path.into() });
        }
        Ok(Self::from_counts(
            counts,
            total,
            FreqSource::Sidecar(path.display().to_string()),
        ))
    }

    /// Derives probabilities from the tokenized analysis corpus.
    pub fn from_corpus<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for doc in docs {
            for token in doc {
                *counts.entry(token.clone()).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Self::uniform();
        }
        Self::from_counts(counts, total, FreqSource::Corpus)
    }

    /// Uniform table: every token maps to the same probability, so the
    /// normalized SIF weights become a plain mean.
    pub fn uniform() -> Self {
        FrequencyTable {
            probs: HashMap::new(),
            total: 0,
            fallback_prob: 1.0,
            source: FreqSource::Uniform,
        }
    }

    fn from_counts(counts: HashMap<String, u64>, total: u64, source: FreqSource) -> Self {
        let probs = counts
            .into_iter()
            .map(|(t, c)| (t, c as f64 / total as f64))
            .collect();
        FrequencyTable {
            probs,
            total,
            // Unseen tokens are treated as rarer than anything observed.
            fallback_prob: 1.0 / (total as f64 + 1.0),
            source,
        }
    }

    pub fn probability(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(self.fallback_prob)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}
