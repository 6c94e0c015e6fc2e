//! Construct gradients in word-embedding spaces.
//!
//! This crate estimates "semantic gradients": unit directions in a fixed
//! word-embedding space along which a continuous outcome increases. The
//! pipeline is documents -> SIF-weighted embedding -> PCA compression ->
//! least-squares fit -> unit-normalized back-projection. Calibrated
//! gradients (for example valence/arousal/dominance axes fitted from rated
//! word norms) form a reference frame onto which other construct gradients
//! are projected as cosine coordinates, optionally after removing a shared
//! mean direction, detrending one axis on another, or auditing a gradient
//! through the nearest-vocabulary clusters at each of its poles.
//!
//! Modules follow the pipeline:
//!
//! - [`embedding`]: load and post-process the word-vector table
//! - [`freq`] / [`doc`]: unigram probabilities, tokenization, document vectors
//! - [`pca`] / [`ols`] / [`gradient`]: the regression core and K selection
//! - [`axes`]: calibrate and persist named reference frames
//! - [`projection`]: coordinates, orthogonalization, detrending, alignment
//! - [`cluster`]: pole-neighborhood k-means audit
//! - [`ingest`]: readers for word norms, rater-agreement corpora, item banks

pub mod axes;
pub mod cluster;
pub mod doc;
pub mod embedding;
pub mod error;
pub mod freq;
pub mod gradient;
pub mod ingest;
pub mod linalg;
pub mod ols;
pub mod pca;
pub mod projection;
pub mod stats;

pub use axes::{
    calibrate_axes, calibrate_axes_detailed, load_frame, load_frame_unchecked, save_frame,
    AxisFrame, AxisSpec, CalibrationDetail,
};
pub use cluster::{
    cluster_pole, pole_neighbors, ClusterGroup, ClusterReport, NeighborFilter, NeighborList, Pole,
};
pub use doc::{embed_corpus, sif_weight, tokenize, DocumentMatrix, EmbedConfig, EmbedOptions};
pub use embedding::EmbeddingSpace;
pub use error::{Error, Result};
pub use freq::FrequencyTable;
pub use gradient::{
    derive_seed, fit_gradient, fit_gradient_detailed, item_sweep_grid, load_gradient,
    save_gradient, sweep_grid, sweep_k, GradientConfig, KScore, SemanticGradient, SweepResult,
    SweepSettings, CORPUS_K_MAX, ITEM_K_CAP,
};
pub use ingest::{
    factor_scores, item_outcomes, load_item_bank, read_corpus, read_emotion_corpus, read_norms,
    Corpus, EmotionCorpus, ItemBank, ItemOutcome, Keyed, NormsSchema, NormsTable,
};
pub use ols::{fit_ols, OlsFit, RegressionStats};
pub use pca::{fit_pca, PcaModel};
pub use projection::{
    align, coordinate_correlation, detrend, mean_direction, orthogonalize, project, AlignEntry,
    AlignResult, ConstructPlacement, DetrendModel,
};
