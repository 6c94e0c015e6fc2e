//! Run configuration: a single JSON file with one section per subcommand.
//!
//! Command-line flags (`--seed`, `--threads`, `--out-dir`, `--fixed-k`)
//! override the corresponding config keys. Defaults follow the pipeline
//! settings this tool reproduces: SIF a = 1e-3, one removed anisotropy
//! component, even K grids capped at 120 for corpora and min(N-2, 30) for
//! item scales, 5 folds, 20 bootstraps, top-100 pole neighbors, k-means
//! k in [2, 8].

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

fn default_delimiter() -> String {
    ",".to_string()
}

fn default_components() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_sif_a() -> f64 {
    1e-3
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub frequency: FrequencyConfig,
    #[serde(default = "default_sif_a")]
    pub sif_a: f64,
    /// Field delimiter for all tabular inputs.
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub calibrate_axes: Option<CalibrateConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub project: Option<ProjectConfig>,
    #[serde(default)]
    pub detrend: Option<DetrendConfig>,
    #[serde(default)]
    pub align: Option<AlignConfig>,
    #[serde(default)]
    pub clusters: Option<ClustersConfig>,
    #[serde(default)]
    pub report: Option<ReportConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub path: PathBuf,
    pub dim: usize,
    #[serde(default = "default_components")]
    pub components_removed: usize,
    #[serde(default = "default_true")]
    pub renormalize: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrequencyConfig {
    /// Token counts from a sidecar file.
    Sidecar { path: PathBuf },
    /// Derive unigram probabilities from the analysis corpus itself.
    #[default]
    Corpus,
    /// Constant weight for every token (plain mean).
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub norms_path: PathBuf,
    #[serde(default = "default_word_column")]
    pub word_column: String,
    #[serde(default = "default_norm_min")]
    pub scale_min: f64,
    #[serde(default = "default_norm_max")]
    pub scale_max: f64,
    /// Minimum usable in-vocabulary words per axis.
    #[serde(default = "default_min_words")]
    pub min_words: usize,
    pub axes: Vec<AxisConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_word_column() -> String {
    "word".to_string()
}

fn default_norm_min() -> f64 {
    1.0
}

fn default_norm_max() -> f64 {
    9.0
}

fn default_min_words() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisConfig {
    pub name: String,
    pub column: String,
    /// Impose this K instead of sweeping.
    #[serde(default)]
    pub fixed_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Grid is {2, 4, ..., k_max}, clipped to feasibility per construct.
    #[serde(default = "default_corpus_k_max")]
    pub k_max: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_bootstraps")]
    pub bootstraps: usize,
}

fn default_corpus_k_max() -> usize {
    semgrad::CORPUS_K_MAX
}

fn default_folds() -> usize {
    5
}

fn default_bootstraps() -> usize {
    20
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_max: default_corpus_k_max(),
            folds: default_folds(),
            bootstraps: default_bootstraps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub source: FitSource,
    /// Single in-vocabulary-token documents use the token vector verbatim.
    #[serde(default)]
    pub use_full_doc: bool,
    /// Remove the document-level common component.
    #[serde(default = "default_true")]
    pub remove_doc_pc: bool,
    /// Impose this K for every construct instead of sweeping.
    #[serde(default)]
    pub fixed_k: Option<usize>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitSource {
    /// Delimited `id, text, <outcome>...` file; one gradient per outcome
    /// column (all non-id/text columns when the list is empty).
    Corpus {
        path: PathBuf,
        #[serde(default)]
        outcome_columns: Vec<String>,
    },
    /// Multi-rater emotion corpus; one gradient per emotion.
    Emotions { path: PathBuf, emotions: Vec<String> },
    /// Item bank; one gradient per scale from item-factor correlations.
    ItemBank {
        items_path: PathBuf,
        responses_path: PathBuf,
        /// Scale ids to fit; empty means every facet and domain.
        #[serde(default)]
        scales: Vec<String>,
        #[serde(default = "default_likert_min")]
        scale_min: u8,
        #[serde(default = "default_likert_max")]
        scale_max: u8,
    },
}

fn default_likert_min() -> u8 {
    1
}

fn default_likert_max() -> u8 {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub frame_path: PathBuf,
    /// Directory of gradient JSON files (every `*.json`), or explicit list.
    #[serde(default)]
    pub gradients_dir: Option<PathBuf>,
    #[serde(default)]
    pub gradient_files: Vec<PathBuf>,
    /// Remove the loaded set's mean direction before projecting.
    #[serde(default)]
    pub orthogonalize: bool,
    /// Axis names for the (x, y, color) plot export; defaults to the first
    /// three frame axes.
    #[serde(default)]
    pub plot_axes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetrendConfig {
    /// Placement file written by `project`.
    pub placements_path: PathBuf,
    pub predictor: String,
    pub response: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignConfig {
    pub a_gradients_dir: PathBuf,
    pub b_gradients_dir: PathBuf,
    /// Orthogonalize the a-side against its own mean direction.
    #[serde(default = "default_true")]
    pub orthogonalize_a: bool,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
}

fn default_top_n() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClustersConfig {
    /// Audit the axes of this frame...
    #[serde(default)]
    pub frame_path: Option<PathBuf>,
    /// ...and/or these gradient files.
    #[serde(default)]
    pub gradients_dir: Option<PathBuf>,
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max_clusters")]
    pub k_max: usize,
    #[serde(default = "default_true")]
    pub alphabetic_only: bool,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    /// Drop tokens rarer than this unigram probability (needs a frequency
    /// sidecar).
    #[serde(default)]
    pub min_prob: Option<f64>,
}

fn default_neighbors() -> usize {
    100
}

fn default_k_min() -> usize {
    2
}

fn default_k_max_clusters() -> usize {
    8
}

fn default_min_len() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    /// Directory of cluster JSON files written by `clusters`.
    pub clusters_dir: PathBuf,
    /// Words shown per cluster in the rendered table.
    #[serde(default = "default_top_words")]
    pub top_words: usize,
}

fn default_top_words() -> usize {
    8
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub fixed_k: Option<usize>,
}

impl Config {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("input not found: cannot read config {}", path.display()))?;
        let mut config: Config = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(threads) = overrides.threads {
            config.threads = Some(threads);
        }
        if let Some(out_dir) = &overrides.out_dir {
            config.out_dir = out_dir.clone();
        }
        if let Some(k) = overrides.fixed_k {
            if let Some(cal) = &mut config.calibrate_axes {
                for axis in &mut cal.axes {
                    axis.fixed_k = Some(k);
                }
            }
            if let Some(fit) = &mut config.fit {
                fit.fixed_k = Some(k);
            }
        }
        Ok(config)
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        let bytes = self.delimiter.as_bytes();
        if bytes.len() != 1 {
            anyhow::bail!("delimiter must be a single byte, got {:?}", self.delimiter);
        }
        Ok(bytes[0])
    }
}
