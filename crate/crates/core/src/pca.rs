//! PCA compression for the regression pipeline.
//!
//! Deterministic: the covariance (or Gram, when rows are scarcer than
//! columns) matrix is diagonalized with the Jacobi solver and every
//! component's sign is fixed so repeated runs agree bit-for-bit.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Fitted PCA basis: `transform(x) = components * (x - mean)`.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// K x D orthonormal rows, descending explained variance.
    pub components: Mat,
    /// Sample variance captured per component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.rows
    }

    pub fn dim(&self) -> usize {
        self.components.cols
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        (0..self.k())
            .map(|i| linalg::dot(self.components.row(i), &centered))
            .collect()
    }

    pub fn transform(&self, x: &Mat) -> Mat {
        assert_eq!(x.cols, self.dim());
        let mut out = Mat::zeros(x.rows, self.k());
        for r in 0..x.rows {
            let t = self.transform_row(x.row(r));
            out.row_mut(r).copy_from_slice(&t);
        }
        out
    }
}

/// Fits the top-`k` principal directions of column-centered `x`.
///
/// Requires `1 <= k <= min(n - 2, dim)`. When the centered matrix has rank
/// below `k`, the trailing components are completed deterministically with
/// orthonormalized coordinate axes (explained variance zero).
pub fn fit_pca(x: &Mat, k: usize) -> Result<PcaModel> {
    let n = x.rows;
    let d = x.cols;
    if k < 1 || n < 2 || k > n.saturating_sub(2) || k > d {
        return Err(Error::KOutOfRange { k, n, dim: d });
    }

    let mut mean = vec![0.0f64; d];
    for r in 0..n {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut centered = Mat::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            centered.set(r, c, x.get(r, c) - mean[c]);
        }
    }

    let denom = (n - 1) as f64;
    let (mut values, mut rows) = if n >= d {
        // Covariance route: D x D.
        let mut cov = Mat::zeros(d, d);
        for r in 0..n {
            let row = centered.row(r);
            for i in 0..d {
                let xi = row[i];
                for j in i..d {
                    cov.data[i * d + j] += xi * row[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov.data[i * d + j] = cov.data[j * d + i];
            }
            for j in i..d {
                cov.data[i * d + j] /= denom;
            }
        }
        let (vals, vecs) = linalg::symmetric_eigen(&cov);
        let rows: Vec<Vec<f64>> = (0..k).map(|i| vecs.row(i).to_vec()).collect();
        (vals[..k].to_vec(), rows)
    } else {
        // Gram route: N x N, then map eigenvectors back to feature space.
        let mut gram = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let g = linalg::dot(centered.row(i), centered.row(j)) / denom;
                gram.set(i, j, g);
                gram.set(j, i, g);
            }
        }
        let (vals, vecs) = linalg::symmetric_eigen(&gram);
        let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut values = Vec::with_capacity(k);
        for i in 0..k {
            let lam = vals[i];
            if lam > lmax * 1e-12 && lam > 0.0 {
                let u = vecs.row(i);
                let sigma = (lam * denom).sqrt();
                let mut v = vec![0.0f64; d];
                for (r, &ur) in u.iter().enumerate() {
                    let row = centered.row(r);
                    for (vc, &xc) in v.iter_mut().zip(row) {
                        *vc += ur * xc;
                    }
                }
                for vc in v.iter_mut() {
                    *vc /= sigma;
                }
                linalg::normalize(&mut v);
                rows.push(v);
                values.push(lam);
            } else {
                break;
            }
        }
        (values, rows)
    };

    // Rank-deficient tail: extend with orthonormal filler directions.
    if rows.len() < k {
        linalg::complete_orthonormal(&mut rows, d, k);
        while values.len() < rows.len() {
            values.push(0.0);
        }
    }
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    for row in rows.iter_mut() {
        linalg::fix_sign(row);
    }

    Ok(PcaModel {
        mean,
        components: Mat::from_rows(&rows),
        explained_variance: values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixed_matrix() -> Mat {
        // 6x4 with well-separated spectrum.
        Mat::from_rows(&[
            vec![2.1, -0.3, 0.5, 0.1],
            vec![-1.8, 0.7, -0.2, 0.4],
            vec![3.2, 1.1, 0.9, -0.6],
            vec![-2.5, -1.4, -0.8, 0.3],
            vec![1.4, 2.2, 0.1, -0.2],
            vec![-2.0, -2.1, -0.5, 0.9],
        ])
    }

    #[test]
    fn rank_one_captures_everything() {
        let dir = [0.6, 0.8, 0.0];
        let x = Mat::from_rows(
            &(0..6)
                .map(|i| {
                    let t = i as f64 - 2.5;
                    dir.iter().map(|&d| t * d).collect()
                })
                .collect::<Vec<Vec<f64>>>(),
        );
        let pca = fit_pca(&x, 1).unwrap();
        // Total variance equals the sum of per-column sample variances.
        let total: f64 = (0..3)
            .map(|c| {
                let mean: f64 = (0..6).map(|r| x.get(r, c)).sum::<f64>() / 6.0;
                (0..6).map(|r| (x.get(r, c) - mean).powi(2)).sum::<f64>() / 5.0
            })
            .sum();
        assert_abs_diff_eq!(pca.explained_variance[0], total, epsilon = 1e-9);
    }

    #[test]
    fn components_match_svd_oracle() {
        let x = fixed_matrix();
        let pca = fit_pca(&x, 2).unwrap();

        let mut centered = Vec::new();
        for r in 0..6 {
            for c in 0..4 {
                centered.push(x.get(r, c) - pca.mean[c]);
            }
        }
        let m = nalgebra::DMatrix::from_row_slice(6, 4, &centered);
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        for i in 0..2 {
            let oracle: Vec<f64> = vt.row(i).iter().copied().collect();
            let cos: f64 = pca
                .components
                .row(i)
                .iter()
                .zip(&oracle)
                .map(|(a, b)| a * b)
                .sum();
            assert!(
                cos.abs() >= 1.0 - 1e-9,
                "component {i} disagrees with oracle: cos {cos}"
            );
            // Explained variance = sigma^2 / (n - 1)
            let ev_oracle = svd.singular_values[i].powi(2) / 5.0;
            assert_abs_diff_eq!(pca.explained_variance[i], ev_oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn gram_route_matches_covariance_route_shape() {
        // More columns than rows exercises the Gram path.
        let x = Mat::from_rows(&[
            vec![1.0, 0.2, -0.5, 0.7, 0.1, -0.3, 0.9, 0.0],
            vec![-0.8, 0.5, 0.3, -0.2, 0.6, 0.1, -0.4, 0.2],
            vec![0.3, -0.9, 0.8, 0.1, -0.7, 0.4, 0.2, -0.5],
            vec![-0.1, 0.7, -0.2, -0.9, 0.3, -0.6, 0.5, 0.8],
            vec![0.6, -0.3, 0.1, 0.4, -0.2, 0.8, -0.7, 0.3],
        ])
        .clone();
        let pca = fit_pca(&x, 3).unwrap();
        assert_eq!(pca.k(), 3);
        // Orthonormality.
        for i in 0..3 {
            for j in 0..3 {
                let d = linalg::dot(pca.components.row(i), pca.components.row(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(d, expect, epsilon = 1e-8);
            }
        }
        // Against the SVD oracle.
        let mut centered = Vec::new();
        for r in 0..5 {
            for c in 0..8 {
                centered.push(x.get(r, c) - pca.mean[c]);
            }
        }
        let m = nalgebra::DMatrix::from_row_slice(5, 8, &centered);
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        for i in 0..3 {
            let cos: f64 = pca
                .components
                .row(i)
                .iter()
                .zip(vt.row(i).iter())
                .map(|(a, &b)| a * b)
                .sum();
            assert!(cos.abs() >= 1.0 - 1e-9, "gram component {i}: cos {cos}");
        }
    }

    #[test]
    fn transform_of_mean_is_zero() {
        let x = fixed_matrix();
        let pca = fit_pca(&x, 2).unwrap();
        let t = pca.transform_row(&pca.mean.clone());
        for v in t {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn k_bounds_enforced() {
        let x = fixed_matrix();
        assert!(matches!(fit_pca(&x, 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(fit_pca(&x, 5), Err(Error::KOutOfRange { .. }))); // > n-2
        let wide = Mat::from_rows(&[vec![1.0, 2.0], vec![0.5, 0.1], vec![0.3, 0.9], vec![0.2, 0.4]]);
        assert!(fit_pca(&wide, 2).is_ok());
        assert!(matches!(fit_pca(&wide, 3), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn explained_variance_non_increasing() {
        let x = fixed_matrix();
        let pca = fit_pca(&x, 4).unwrap();
        for w in pca.explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
            assert!(w[1] >= 0.0);
        }
    }
}
