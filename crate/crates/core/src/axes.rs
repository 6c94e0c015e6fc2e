//! Reference-axis calibration from rated word norms, and frame persistence.
//!
//! Each rated dimension becomes one gradient: in-vocabulary single-token
//! words are embedded verbatim (full-doc mode) and regressed against their
//! ratings. The resulting frame is a coordinate system for projection; the
//! axes are deliberately *not* orthogonalized against each other, so any
//! entanglement between dimensions stays measurable downstream.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc::{embed_corpus, tokenize, EmbedOptions};
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::freq::FrequencyTable;
use crate::gradient::{fit_gradient_detailed, GradientConfig, SemanticGradient, SweepResult};
use crate::ingest::NormsTable;
use crate::linalg;

/// Default minimum in-vocabulary words required per axis.
pub const DEFAULT_MIN_NORM_WORDS: usize = 100;

/// Named, ordered set of calibrated unit gradients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisFrame {
    pub axes: Vec<(String, SemanticGradient)>,
    pub embedding_digest: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AxisFrame {
    pub fn axis(&self, name: &str) -> Option<&SemanticGradient> {
        self.axes.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn names(&self) -> Vec<&str> {
        self.axes.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.axes.first().map(|(_, g)| g.dim())
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (name, g) in &self.axes {
            if !seen.insert(name.clone()) {
                return Err(Error::FrameMismatch {
                    message: format!("duplicate axis name {name:?}"),
                });
            }
            let norm = linalg::norm(&g.beta);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::FrameMismatch {
                    message: format!("axis {name:?} is not unit norm ({norm})"),
                });
            }
            if g.provenance.embedding_digest != self.embedding_digest {
                return Err(Error::FrameMismatch {
                    message: format!("axis {name:?} was fitted on a different embedding"),
                });
            }
        }
        Ok(())
    }
}

/// One axis to calibrate: its name, the norms column feeding it, and how K
/// is chosen.
#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub name: String,
    pub column: String,
    pub config: GradientConfig,
}

/// Calibration output with the per-axis sweep tables and coverage counts.
#[derive(Debug, Clone)]
pub struct CalibrationDetail {
    pub frame: AxisFrame,
    pub sweeps: Vec<(String, Option<SweepResult>)>,
}

/// Calibrates one gradient per axis spec from rated word norms.
///
/// A norm word is used only when it tokenizes to exactly one in-vocabulary
/// token (multi-token entries are excluded, not averaged); exclusion counts
/// go into the frame warnings. Fails when fewer than `min_words` usable
/// words remain for some axis.
pub fn calibrate_axes(
    space: &EmbeddingSpace,
    norms: &NormsTable,
    specs: &[AxisSpec],
    min_words: usize,
) -> Result<AxisFrame> {
    calibrate_axes_detailed(space, norms, specs, min_words).map(|d| d.frame)
}

/// [`calibrate_axes`] plus the per-axis sweep score tables.
pub fn calibrate_axes_detailed(
    space: &EmbeddingSpace,
    norms: &NormsTable,
    specs: &[AxisSpec],
    min_words: usize,
) -> Result<CalibrationDetail> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no axes requested".to_string()));
    }
    let mut axes = Vec::with_capacity(specs.len());
    let mut warnings = Vec::new();
    let mut sweeps = Vec::new();

    for spec in specs {
        let ratings = norms.columns.get(&spec.column).ok_or_else(|| {
            Error::InvalidInput(format!(
                "norms table has no column {:?} for axis {:?}",
                spec.column, spec.name
            ))
        })?;

        let mut docs: Vec<(String, String)> = Vec::new();
        let mut y = Vec::new();
        let mut multi_token = 0usize;
        let mut oov = 0usize;
        for (word, &rating) in norms.words.iter().zip(ratings) {
            let tokens = tokenize(word);
            if tokens.len() != 1 {
                multi_token += 1;
                continue;
            }
            if space.vector(&tokens[0]).is_none() {
                oov += 1;
                continue;
            }
            docs.push((word.clone(), word.clone()));
            y.push(rating);
        }
        if docs.len() < min_words {
            return Err(Error::InsufficientNorms {
                axis: spec.name.clone(),
                found: docs.len(),
                required: min_words,
            });
        }
        warnings.push(format!(
            "axis {}: {} words used, {} multi-token and {} out-of-vocabulary entries excluded",
            spec.name,
            docs.len(),
            multi_token,
            oov
        ));

        // Word-level anisotropy removal already happened in the space, so
        // document-level removal stays off for single-token documents.
        let dm = embed_corpus(
            space,
            &docs,
            &y,
            &FrequencyTable::uniform(),
            &EmbedOptions {
                use_full_doc: true,
                remove_doc_pc: false,
                ..Default::default()
            },
        )?;
        let (gradient, sweep) = fit_gradient_detailed(&dm, &spec.config, &spec.name)?;
        sweeps.push((spec.name.clone(), sweep));
        axes.push((spec.name.clone(), gradient));
    }

    let frame = AxisFrame {
        axes,
        embedding_digest: space.digest(),
        warnings,
    };
    frame.validate()?;
    Ok(CalibrationDetail { frame, sweeps })
}

/// Writes a frame as JSON; beta vectors survive the round trip exactly.
pub fn save_frame(frame: &AxisFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(frame)
        .map_err(|e| Error::InvalidInput(format!("serialize frame: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Reads a frame without binding it to a space (for purely file-to-file
/// pipeline steps).
pub fn load_frame_unchecked(path: impl AsRef<Path>) -> Result<AxisFrame> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let frame: AxisFrame = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    frame.validate()?;
    Ok(frame)
}

/// Reads a frame and checks it was calibrated on `space` (same digest,
/// including post-processing settings). With `override_mismatch` the check
/// becomes a recorded warning instead of an error.
pub fn load_frame(
    path: impl AsRef<Path>,
    space: &EmbeddingSpace,
    override_mismatch: bool,
) -> Result<AxisFrame> {
    let mut frame = load_frame_unchecked(path)?;
    let expected = space.digest();
    if frame.embedding_digest != expected {
        if !override_mismatch {
            return Err(Error::FrameMismatch {
                message: format!(
                    "frame was calibrated on embedding {} but the loaded space is {}",
                    frame.embedding_digest, expected
                ),
            });
        }
        frame.warnings.push(format!(
            "digest override: frame {} used against space {}",
            frame.embedding_digest, expected
        ));
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synthetic_space(v: usize, d: usize, seed: u64) -> EmbeddingSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<(String, Vec<f32>)> = (0..v)
            .map(|i| {
                (
                    format!("word{i}"),
                    (0..d).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
                )
            })
            .collect();
        EmbeddingSpace::from_entries(entries, d).unwrap()
    }

    fn norms_for(space: &EmbeddingSpace, g: &[f64], columns: &[&str]) -> NormsTable {
        let words: Vec<String> = space.tokens().to_vec();
        let ratings: Vec<f64> = words
            .iter()
            .map(|w| {
                let v = space.vector(w).unwrap();
                v.iter().zip(g).map(|(&x, b)| x as f64 * b).sum()
            })
            .collect();
        let mut cols = IndexMap::new();
        for c in columns {
            cols.insert(c.to_string(), ratings.clone());
        }
        NormsTable {
            words,
            columns: cols,
            rejected: 0,
            duplicates: 0,
        }
    }

    #[test]
    fn planted_rating_recovers_axis() {
        let space = synthetic_space(80, 6, 42);
        let mut g = vec![0.3, -0.5, 0.8, 0.1, -0.2, 0.4];
        linalg::normalize(&mut g);
        let norms = norms_for(&space, &g, &["val"]);
        let detail = calibrate_axes_detailed(
            &space,
            &norms,
            &[AxisSpec {
                name: "valence".to_string(),
                column: "val".to_string(),
                config: GradientConfig::FixedK(6),
            }],
            10,
        )
        .unwrap();
        let axis = detail.frame.axis("valence").unwrap();
        let cos: f64 = axis.beta.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!(cos >= 0.999, "cosine {cos}");
    }

    #[test]
    fn identical_ratings_identical_axes() {
        let space = synthetic_space(60, 5, 7);
        let mut g = vec![0.5, 0.5, -0.5, 0.2, 0.1];
        linalg::normalize(&mut g);
        let norms = norms_for(&space, &g, &["a", "b"]);
        let detail = calibrate_axes_detailed(
            &space,
            &norms,
            &[
                AxisSpec {
                    name: "first".to_string(),
                    column: "a".to_string(),
                    config: GradientConfig::FixedK(3),
                },
                AxisSpec {
                    name: "second".to_string(),
                    column: "b".to_string(),
                    config: GradientConfig::FixedK(3),
                },
            ],
            10,
        )
        .unwrap();
        let first = detail.frame.axis("first").unwrap();
        let second = detail.frame.axis("second").unwrap();
        assert_eq!(first.beta, second.beta); // bit-for-bit
    }

    #[test]
    fn insufficient_words_rejected() {
        let space = synthetic_space(30, 4, 9);
        let g = vec![1.0, 0.0, 0.0, 0.0];
        let norms = norms_for(&space, &g, &["v"]);
        assert!(matches!(
            calibrate_axes(
                &space,
                &norms,
                &[AxisSpec {
                    name: "v".to_string(),
                    column: "v".to_string(),
                    config: GradientConfig::FixedK(2),
                }],
                100,
            ),
            Err(Error::InsufficientNorms { found: 30, required: 100, .. })
        ));
    }

    #[test]
    fn multi_token_norms_excluded() {
        let space = synthetic_space(40, 4, 11);
        let g = vec![0.0, 1.0, 0.0, 0.0];
        let mut norms = norms_for(&space, &g, &["v"]);
        norms.words.push("state-of-the-art".to_string());
        norms.columns.get_mut("v").unwrap().push(5.0);
        let detail = calibrate_axes_detailed(
            &space,
            &norms,
            &[AxisSpec {
                name: "v".to_string(),
                column: "v".to_string(),
                config: GradientConfig::FixedK(2),
            }],
            10,
        )
        .unwrap();
        assert!(detail.frame.warnings[0].contains("1 multi-token"));
    }

    #[test]
    fn frame_round_trip_exact() {
        let space = synthetic_space(50, 4, 3);
        let mut g = vec![0.7, -0.1, 0.4, 0.5];
        linalg::normalize(&mut g);
        let norms = norms_for(&space, &g, &["v"]);
        let detail = calibrate_axes_detailed(
            &space,
            &norms,
            &[AxisSpec {
                name: "v".to_string(),
                column: "v".to_string(),
                config: GradientConfig::FixedK(2),
            }],
            10,
        )
        .unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        save_frame(&detail.frame, file.path()).unwrap();
        let loaded = load_frame(file.path(), &space, false).unwrap();
        assert_eq!(
            loaded.axis("v").unwrap().beta,
            detail.frame.axis("v").unwrap().beta
        );
    }

    #[test]
    fn digest_mismatch_and_override() {
        let space = synthetic_space(50, 4, 3);
        let other = synthetic_space(50, 4, 4);
        let mut g = vec![0.7, -0.1, 0.4, 0.5];
        linalg::normalize(&mut g);
        let norms = norms_for(&space, &g, &["v"]);
        let detail = calibrate_axes_detailed(
            &space,
            &norms,
            &[AxisSpec {
                name: "v".to_string(),
                column: "v".to_string(),
                config: GradientConfig::FixedK(2),
            }],
            10,
        )
        .unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        save_frame(&detail.frame, file.path()).unwrap();
        assert!(matches!(
            load_frame(file.path(), &other, false),
            Err(Error::FrameMismatch { .. })
        ));
        let overridden = load_frame(file.path(), &other, true).unwrap();
        assert!(overridden
            .warnings
            .iter()
            .any(|w| w.contains("digest override")));
    }
}
