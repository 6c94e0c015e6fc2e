//! Small dense linear-algebra kernels for the fitting pipeline.
//!
//! Plain `f64`, sequential, deterministic: identical inputs give
//! bit-identical outputs regardless of run or thread count. Matrices are
//! row-major. Sizes here are modest (at most the embedding dimension, a few
//! hundred), so a cyclic Jacobi eigensolver is accurate and fast enough.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * v` for a column vector `v`.
    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `v` to unit L2 norm in place; returns the previous norm.
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Negates `row` if its first nonzero coordinate is negative.
///
/// Fixes the sign indeterminacy of eigenvectors so decompositions are
/// reproducible across runs.
pub fn fix_sign(row: &mut [f64]) {
    for &x in row.iter() {
        if x != 0.0 {
            if x < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            return;
        }
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the rows of the returned matrix. The input must be symmetric; only the
/// full dense storage is read.
pub fn symmetric_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(m.rows, m.cols, "symmetric_eigen needs a square matrix");
    let n = m.rows;
    let mut a = m.data.clone();
    // v holds eigenvectors as columns while rotating.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let idx = |r: usize, c: usize| r * n + c;
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[idx(p, q)].abs();
            }
        }
        s
    };

    for sweep in 0..100 {
        let sm = off(&a);
        if sm == 0.0 {
            break;
        }
        // Threshold strategy: rotate only on significant elements during the
        // first sweeps, then on everything.
        let tresh = if sweep < 3 {
            0.2 * sm / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                let g = 100.0 * apq.abs();
                // After a few sweeps, skip rotations on elements that are
                // negligible relative to both diagonal entries.
                if sweep > 3
                    && a[idx(p, p)].abs() + g == a[idx(p, p)].abs()
                    && a[idx(q, q)].abs() + g == a[idx(q, q)].abs()
                {
                    a[idx(p, q)] = 0.0;
                    a[idx(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }
                let h = a[idx(q, q)] - a[idx(p, p)];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let hpq = t * apq;

                a[idx(p, p)] -= hpq;
                a[idx(q, q)] += hpq;
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[idx(r, p)];
                    let arq = a[idx(r, q)];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a[idx(r, p)] = new_rp;
                    a[idx(p, r)] = new_rp;
                    a[idx(r, q)] = new_rq;
                    a[idx(q, r)] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[idx(r, p)];
                    let vrq = v[idx(r, q)];
                    v[idx(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[idx(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigvals: Vec<f64> = (0..n).map(|i| a[idx(i, i)]).collect();
    order.sort_by(|&i, &j| eigvals[j].partial_cmp(&eigvals[i]).unwrap().then(i.cmp(&j)));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (out_row, &src_col) in order.iter().enumerate() {
        values.push(eigvals[src_col]);
        for r in 0..n {
            vectors.set(out_row, r, v[idx(r, src_col)]);
        }
    }
    (values, vectors)
}

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
///
/// Returns `None` when a pivot collapses, i.e. the system is not
/// numerically positive definite.
pub fn cholesky_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 1e-300 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward: L z = b
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * z[k];
        }
        z[i] = sum / l[i * n + i];
    }
    // Backward: L^T x = z
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Minimum-norm solve of symmetric `A x = b` through the eigendecomposition,
/// dropping eigenvalues below `rcond * lambda_max`.
pub fn eigen_pseudo_solve(a: &Mat, b: &[f64], rcond: f64) -> Vec<f64> {
    let (vals, vecs) = symmetric_eigen(a);
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = lmax * rcond;
    let n = b.len();
    let mut x = vec![0.0; n];
    for (i, &lam) in vals.iter().enumerate() {
        if lam <= cutoff || lam <= 0.0 {
            continue;
        }
        let u = vecs.row(i);
        let coef = dot(u, b) / lam;
        for j in 0..n {
            x[j] += coef * u[j];
        }
    }
    x
}

/// Extends `basis` (orthonormal rows of length `dim`) with coordinate axes
/// orthogonalized against it until `count` rows exist. Deterministic.
pub fn complete_orthonormal(basis: &mut Vec<Vec<f64>>, dim: usize, count: usize) {
    let mut axis = 0usize;
    while basis.len() < count && axis < dim {
        let mut cand = vec![0.0; dim];
        cand[axis] = 1.0;
        axis += 1;
        for row in basis.iter() {
            let c = dot(&cand, row);
            for j in 0..dim {
                cand[j] -= c * row[j];
            }
        }
        if normalize(&mut cand) > 1e-8 {
            // Second Gram-Schmidt pass for numerical orthogonality.
            for row in basis.iter() {
                let c = dot(&cand, row);
                for j in 0..dim {
                    cand[j] -= c * row[j];
                }
            }
            normalize(&mut cand);
            basis.push(cand);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // A = Q diag(5, 2, 1) Q^T for a hand-built rotation Q.
        let q = [
            [0.6, 0.8, 0.0],
            [-0.8, 0.6, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let lam = [5.0, 2.0, 1.0];
        let mut a = Mat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for (k, &l) in lam.iter().enumerate() {
                    s += q[i][k] * l * q[j][k];
                }
                a.set(i, j, s);
            }
        }
        let (vals, vecs) = symmetric_eigen(&a);
        assert_abs_diff_eq!(vals[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 1.0, epsilon = 1e-12);
        // Eigenvector of the top eigenvalue matches column 0 of Q up to sign.
        let v0 = vecs.row(0);
        let expected = [0.6, -0.8, 0.0];
        let cos: f64 = dot(v0, &expected);
        assert!(cos.abs() > 1.0 - 1e-12);
    }

    #[test]
    fn jacobi_eigenvectors_orthonormal() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 12;
        let mut a = Mat::zeros(n, n);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let (vals, vecs) = symmetric_eigen(&a);
        for i in 0..n {
            assert!(vals[i] <= vals.get(i.saturating_sub(1)).copied().unwrap_or(f64::INFINITY));
            for j in 0..n {
                let d = dot(vecs.row(i), vecs.row(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(d, expect, epsilon = 1e-10);
            }
            // A v = lambda v
            let av = a.mat_vec(vecs.row(i));
            for j in 0..n {
                assert_abs_diff_eq!(av[j], vals[i] * vecs.row(i)[j], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Mat::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mat_vec(&x_true);
        let x = cholesky_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(x[i], x_true[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(cholesky_solve(&a, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn pseudo_solve_matches_cholesky_on_spd() {
        let a = Mat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let b = [1.0, 4.0];
        let x1 = cholesky_solve(&a, &b).unwrap();
        let x2 = eigen_pseudo_solve(&a, &b, 1e-12);
        assert_abs_diff_eq!(x1[0], x2[0], epsilon = 1e-12);
        assert_abs_diff_eq!(x1[1], x2[1], epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_completion_spans() {
        let mut basis = vec![{
            let mut v = vec![1.0, 1.0, 0.0, 0.0];
            normalize(&mut v);
            v
        }];
        complete_orthonormal(&mut basis, 4, 4);
        assert_eq!(basis.len(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let d = dot(&basis[i], &basis[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(d, expect, epsilon = 1e-10);
            }
        }
    }
}
