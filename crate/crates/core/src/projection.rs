//! Placing construct gradients in a reference frame.
//!
//! Coordinates are cosines (unit gradient against unit axis). Before
//! projection a set of related constructs can have its shared mean
//! direction removed; one axis can be detrended on another across a
//! construct set; and two gradient collections can be aligned into a full
//! cosine matrix with per-target most/least tables.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::axes::AxisFrame;
use crate::error::{Error, Result};
use crate::gradient::SemanticGradient;
use crate::linalg;
use crate::stats;

/// Per-construct coordinates on a frame, with optional detrended columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructPlacement {
    pub name: String,
    /// Axis name -> cosine coordinate, in frame order.
    pub coords: IndexMap<String, f64>,
    /// Axis name -> residual after detrending; present only after
    /// [`detrend`] ran over this placement set.
    #[serde(default)]
    pub residuals: IndexMap<String, f64>,
    pub orthogonalized: bool,
}

/// Fitted simple regression of one axis on another across constructs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetrendModel {
    pub predictor: String,
    pub response: String,
    pub slope: f64,
    pub intercept: f64,
    pub fitted_on: String,
}

/// Normalized arithmetic mean of the gradients' unit vectors.
pub fn mean_direction(gradients: &[SemanticGradient]) -> Result<Vec<f64>> {
    if gradients.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "mean direction needs at least 2 gradients, got {}",
            gradients.len()
        )));
    }
    let d = gradients[0].dim();
    for g in gradients {
        if g.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.dim(),
            });
        }
    }
    let mut mean = vec![0.0f64; d];
    for g in gradients {
        for (m, &b) in mean.iter_mut().zip(&g.beta) {
            *m += b;
        }
    }
    for m in mean.iter_mut() {
        *m /= gradients.len() as f64;
    }
    let norm = linalg::normalize(&mut mean);
    if norm < 1e-9 {
        return Err(Error::DegenerateMean { norm });
    }
    Ok(mean)
}

/// Removes the component of `g` along the unit direction `m` and
/// re-normalizes. Rejects near-collinear inputs (|cos| >= 1 - 1e-6).
pub fn orthogonalize(g: &SemanticGradient, m: &[f64]) -> Result<SemanticGradient> {
    if g.dim() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: m.len(),
        });
    }
    let m_norm = linalg::norm(m);
    if (m_norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "direction to remove must be unit norm, got {m_norm}"
        )));
    }
    let cos = linalg::dot(&g.beta, m);
    if cos.abs() >= 1.0 - 1e-6 {
        return Err(Error::Collinear { cos });
    }
    let mut beta: Vec<f64> = g
        .beta
        .iter()
        .zip(m)
        .map(|(&b, &mv)| b - cos * mv)
        .collect();
    linalg::normalize(&mut beta);
    let mut out = g.clone();
    out.beta = beta;
    out.orthogonalized = true;
    Ok(out)
}

/// Cosine coordinates of `g` on every axis of `frame`.
///
/// The gradient must come from the same embedding (digest check) and share
/// the frame's dimensionality.
pub fn project(g: &SemanticGradient, frame: &AxisFrame) -> Result<ConstructPlacement> {
    let frame_dim = frame.dim().ok_or_else(|| Error::FrameMismatch {
        message: "frame has no axes".to_string(),
    })?;
    if g.dim() != frame_dim {
        return Err(Error::DimensionMismatch {
            expected: frame_dim,
            got: g.dim(),
        });
    }
    if g.provenance.embedding_digest != frame.embedding_digest {
        return Err(Error::FrameMismatch {
            message: format!(
                "gradient {:?} embedding {} does not match frame embedding {}",
                g.name, g.provenance.embedding_digest, frame.embedding_digest
            ),
        });
    }
    let coords = frame
        .axes
        .iter()
        .map(|(name, axis)| (name.clone(), linalg::dot(&g.beta, &axis.beta)))
        .collect();
    Ok(ConstructPlacement {
        name: g.name.clone(),
        coords,
        residuals: IndexMap::new(),
        orthogonalized: g.orthogonalized,
    })
}

/// Regresses `response` on `predictor` across the placements and attaches
/// the residual column to every placement.
pub fn detrend(
    placements: &mut [ConstructPlacement],
    predictor: &str,
    response: &str,
) -> Result<DetrendModel> {
    if placements.len() < 3 {
        return Err(Error::DegenerateDetrend {
            message: format!("need at least 3 placements, got {}", placements.len()),
        });
    }
    let mut xs = Vec::with_capacity(placements.len());
    let mut ys = Vec::with_capacity(placements.len());
    for p in placements.iter() {
        let x = p.coords.get(predictor).ok_or_else(|| Error::DegenerateDetrend {
            message: format!("placement {:?} has no {predictor:?} coordinate", p.name),
        })?;
        let y = p.coords.get(response).ok_or_else(|| Error::DegenerateDetrend {
            message: format!("placement {:?} has no {response:?} coordinate", p.name),
        })?;
        xs.push(*x);
        ys.push(*y);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-18 {
        return Err(Error::DegenerateDetrend {
            message: format!("predictor {predictor:?} has zero variance"),
        });
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    for (p, (&x, &y)) in placements.iter_mut().zip(xs.iter().zip(&ys)) {
        p.residuals
            .insert(response.to_string(), y - (slope * x + intercept));
    }
    Ok(DetrendModel {
        predictor: predictor.to_string(),
        response: response.to_string(),
        slope,
        intercept,
        fitted_on: format!("{} constructs", placements.len()),
    })
}

/// Per-target most/least aligned entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignEntry {
    pub b_name: String,
    pub most: Vec<(String, f64)>,
    pub least: Vec<(String, f64)>,
}

/// Full cosine matrix plus top/bottom tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignResult {
    pub a_names: Vec<String>,
    pub b_names: Vec<String>,
    /// matrix[i][j] = a_i . b_j after any orthogonalization of the a side.
    pub matrix: Vec<Vec<f64>>,
    pub table: Vec<AlignEntry>,
    /// Whether the a-list was orthogonalized against its own mean.
    pub a_orthogonalized: bool,
}

/// Cosines between two gradient collections.
///
/// Only the a-list can be orthogonalized (against its own mean direction);
/// the b-list is always used as-is, since removing a mean from a handful
/// of contested constructs would be arbitrary.
pub fn align(
    a: &[SemanticGradient],
    b: &[SemanticGradient],
    orthogonalize_a: bool,
    top_n: usize,
) -> Result<AlignResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("align needs nonempty gradient lists".to_string()));
    }
    let d = a[0].dim();
    for g in a.iter().chain(b) {
        if g.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.dim(),
            });
        }
    }
    let a_used: Vec<SemanticGradient> = if orthogonalize_a {
        let m = mean_direction(a)?;
        a.iter()
            .map(|g| orthogonalize(g, &m))
            .collect::<Result<_>>()?
    } else {
        a.to_vec()
    };

    let matrix: Vec<Vec<f64>> = a_used
        .iter()
        .map(|ga| b.iter().map(|gb| linalg::dot(&ga.beta, &gb.beta)).collect())
        .collect();

    let top_n = top_n.min(a.len());
    let mut table = Vec::with_capacity(b.len());
    for (j, gb) in b.iter().enumerate() {
        let mut scored: Vec<(String, f64)> = a_used
            .iter()
            .enumerate()
            .map(|(i, ga)| (ga.name.clone(), matrix[i][j]))
            .collect();
        scored.sort_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .unwrap()
                .then_with(|| x.0.cmp(&y.0))
        });
        let most = scored[..top_n].to_vec();
        let mut least = scored[scored.len() - top_n..].to_vec();
        least.reverse(); // most negative first
        table.push(AlignEntry {
            b_name: gb.name.clone(),
            most,
            least,
        });
    }

    Ok(AlignResult {
        a_names: a_used.iter().map(|g| g.name.clone()).collect(),
        b_names: b.iter().map(|g| g.name.clone()).collect(),
        matrix,
        table,
        a_orthogonalized: orthogonalize_a,
    })
}

/// Pearson correlation between two coordinate columns of a placement set.
/// `None` when a column is missing or constant.
pub fn coordinate_correlation(
    placements: &[ConstructPlacement],
    axis_a: &str,
    axis_b: &str,
) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in placements {
        xs.push(*p.coords.get(axis_a)?);
        ys.push(*p.coords.get(axis_b)?);
    }
    stats::pearson(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::EmbedConfig;
    use crate::gradient::Provenance;
    use crate::ols::RegressionStats;

    fn gradient(name: &str, beta: Vec<f64>, digest: &str) -> SemanticGradient {
        let mut beta = beta;
        linalg::normalize(&mut beta);
        SemanticGradient {
            name: name.to_string(),
            beta,
            stats: RegressionStats {
                k: 2,
                n: 10,
                r2: 0.5,
                r2_adj: 0.4,
                f: 5.0,
                p: 0.01,
                r: 0.7,
            },
            provenance: Provenance {
                embedding_digest: digest.to_string(),
                embed_config: EmbedConfig::precomputed(),
                selection: "fixed K=2".to_string(),
                rank_deficient: false,
                warnings: vec![],
            },
            orthogonalized: false,
        }
    }

    fn frame(axes: Vec<(&str, Vec<f64>)>, digest: &str) -> AxisFrame {
        AxisFrame {
            axes: axes
                .into_iter()
                .map(|(n, b)| (n.to_string(), gradient(n, b, digest)))
                .collect(),
            embedding_digest: digest.to_string(),
            warnings: vec![],
        }
    }

    #[test]
    fn mean_direction_basic_and_degenerate() {
        let g1 = gradient("a", vec![1.0, 0.0, 0.0], "d");
        let g2 = gradient("b", vec![-1.0, 0.0, 0.0], "d");
        assert!(matches!(
            mean_direction(&[g1.clone(), g2]),
            Err(Error::DegenerateMean { .. })
        ));
        let same = mean_direction(&[g1.clone(), g1.clone(), g1.clone()]).unwrap();
        assert_eq!(same, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn mean_direction_matches_oracle() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let gs: Vec<SemanticGradient> = (0..27)
            .map(|i| {
                let beta: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
                gradient(&format!("g{i}"), beta, "d")
            })
            .collect();
        let got = mean_direction(&gs).unwrap();
        // Oracle: recompute mean then normalize, separately.
        let mut oracle = vec![0.0f64; 10];
        for g in &gs {
            for (o, &b) in oracle.iter_mut().zip(&g.beta) {
                *o += b;
            }
        }
        for o in oracle.iter_mut() {
            *o /= 27.0;
        }
        let n = linalg::norm(&oracle);
        for o in oracle.iter_mut() {
            *o /= n;
        }
        assert!((linalg::norm(&got) - 1.0).abs() < 1e-12);
        for (a, b) in got.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonalize_properties() {
        let g = gradient("g", vec![0.6, 0.8, 0.0], "d");
        let m = vec![1.0, 0.0, 0.0];
        let out = orthogonalize(&g, &m).unwrap();
        assert!(linalg::dot(&out.beta, &m).abs() <= 1e-9);
        assert!((linalg::norm(&out.beta) - 1.0).abs() < 1e-12);
        assert!(out.orthogonalized);
        // Idempotent.
        let twice = orthogonalize(&out, &m).unwrap();
        for (a, b) in out.beta.iter().zip(&twice.beta) {
            assert!((a - b).abs() < 1e-12);
        }
        // Already orthogonal input is unchanged.
        let perp = gradient("p", vec![0.0, 1.0, 0.0], "d");
        let same = orthogonalize(&perp, &m).unwrap();
        for (a, b) in perp.beta.iter().zip(&same.beta) {
            assert!((a - b).abs() < 1e-12);
        }
        // Collinear rejected.
        let par = gradient("c", vec![1.0, 0.0, 0.0], "d");
        assert!(matches!(
            orthogonalize(&par, &m),
            Err(Error::Collinear { .. })
        ));
    }

    #[test]
    fn orthogonalize_stays_in_span() {
        let g = gradient("g", vec![0.3, -0.7, 0.5, 0.2], "d");
        let mut m = vec![0.5, 0.5, -0.5, 0.5];
        linalg::normalize(&mut m);
        let out = orthogonalize(&g, &m).unwrap();
        // Gram-Schmidt oracle: residual outside span{g, m} is zero.
        let mut b1 = g.beta.clone();
        let c = linalg::dot(&m, &b1);
        for (v, &mv) in b1.iter_mut().zip(&m) {
            *v -= c * mv;
        }
        linalg::normalize(&mut b1);
        let in_span = linalg::dot(&out.beta, &b1).powi(2) + linalg::dot(&out.beta, &m).powi(2);
        assert!((in_span - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn project_self_axis_is_one() {
        let f = frame(vec![("v", vec![1.0, 0.0, 0.0]), ("a", vec![0.0, 1.0, 0.0])], "d");
        let g = gradient("v-copy", vec![1.0, 0.0, 0.0], "d");
        let p = project(&g, &f).unwrap();
        assert!((p.coords["v"] - 1.0).abs() < 1e-12);
        assert!(p.coords["a"].abs() < 1e-12);
    }

    #[test]
    fn project_negation_flips_coordinates() {
        let f = frame(vec![("v", vec![1.0, 1.0, 0.0]), ("a", vec![0.0, 1.0, 1.0])], "d");
        let g = gradient("g", vec![0.2, -0.5, 0.8], "d");
        let mut neg = g.clone();
        for v in neg.beta.iter_mut() {
            *v = -*v;
        }
        let p = project(&g, &f).unwrap();
        let pn = project(&neg, &f).unwrap();
        for (name, v) in &p.coords {
            assert!((v + pn.coords[name]).abs() < 1e-12);
            assert!(*v >= -1.0 - 1e-9 && *v <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn project_digest_mismatch_rejected() {
        let f = frame(vec![("v", vec![1.0, 0.0, 0.0])], "d1");
        let g = gradient("g", vec![1.0, 0.0, 0.0], "d2");
        assert!(matches!(project(&g, &f), Err(Error::FrameMismatch { .. })));
    }

    fn placement(name: &str, v: f64, d: f64) -> ConstructPlacement {
        let mut coords = IndexMap::new();
        coords.insert("v".to_string(), v);
        coords.insert("d".to_string(), d);
        ConstructPlacement {
            name: name.to_string(),
            coords,
            residuals: IndexMap::new(),
            orthogonalized: false,
        }
    }

    #[test]
    fn detrend_residual_properties() {
        let mut ps = vec![
            placement("a", 0.5, 0.52),
            placement("b", -0.3, -0.21),
            placement("c", 0.1, 0.15),
            placement("d", -0.5, -0.48),
            placement("e", 0.3, 0.22),
        ];
        let model = detrend(&mut ps, "v", "d").unwrap();
        let resid: Vec<f64> = ps.iter().map(|p| p.residuals["d"]).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        assert!(mean.abs() <= 1e-9);
        let xs: Vec<f64> = ps.iter().map(|p| p.coords["v"]).collect();
        let corr = stats::pearson(&resid, &xs).unwrap_or(0.0);
        assert!(corr.abs() <= 1e-9);
        assert_eq!(model.predictor, "v");
    }

    #[test]
    fn detrend_collinear_gives_zero_residuals() {
        let mut ps = vec![
            placement("a", 0.1, 0.2 * 0.1 + 0.05),
            placement("b", -0.4, 0.2 * -0.4 + 0.05),
            placement("c", 0.7, 0.2 * 0.7 + 0.05),
        ];
        detrend(&mut ps, "v", "d").unwrap();
        for p in &ps {
            assert!(p.residuals["d"].abs() < 1e-12);
        }
    }

    #[test]
    fn detrend_degenerate_cases() {
        let mut two = vec![placement("a", 0.1, 0.2), placement("b", 0.3, 0.1)];
        assert!(matches!(
            detrend(&mut two, "v", "d"),
            Err(Error::DegenerateDetrend { .. })
        ));
        let mut flat = vec![
            placement("a", 0.2, 0.1),
            placement("b", 0.2, -0.4),
            placement("c", 0.2, 0.3),
        ];
        assert!(matches!(
            detrend(&mut flat, "v", "d"),
            Err(Error::DegenerateDetrend { .. })
        ));
    }

    #[test]
    fn align_self_is_identity_diagonal() {
        let gs = vec![
            gradient("a", vec![1.0, 0.2, 0.0], "d"),
            gradient("b", vec![-0.3, 0.8, 0.1], "d"),
            gradient("c", vec![0.1, -0.1, 0.9], "d"),
        ];
        let result = align(&gs, &gs, false, 2).unwrap();
        for i in 0..3 {
            assert!((result.matrix[i][i] - 1.0).abs() < 1e-12);
        }
        // Most-aligned with each b is itself.
        for (j, entry) in result.table.iter().enumerate() {
            assert_eq!(entry.most[0].0, gs[j].name);
            assert_eq!(entry.most.len(), 2);
            assert_eq!(entry.least.len(), 2);
        }
    }

    #[test]
    fn align_orthogonalizes_only_a_side() {
        let a = vec![
            gradient("a1", vec![1.0, 0.1, 0.0], "d"),
            gradient("a2", vec![0.9, -0.1, 0.2], "d"),
            gradient("a3", vec![0.8, 0.3, -0.1], "d"),
        ];
        let b = vec![gradient("b1", vec![1.0, 0.0, 0.0], "d")];
        let plain = align(&a, &b, false, 1).unwrap();
        let orth = align(&a, &b, true, 1).unwrap();
        assert!(orth.a_orthogonalized);
        // Removing the shared direction moves the a-side cosines.
        for i in 0..3 {
            assert!((plain.matrix[i][0] - orth.matrix[i][0]).abs() > 1e-6);
        }
    }
}
