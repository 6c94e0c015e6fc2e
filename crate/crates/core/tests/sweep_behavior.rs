//! K-sweep behavior on constructed corpora: planted low-rank signal,
//! pure-noise null, and equality with per-K refits (the sweep internally
//! slices one shared decomposition; refitting each K from scratch must give
//! the same table).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semgrad::doc::{DocumentMatrix, EmbedConfig};
use semgrad::gradient::{bootstrap_indices, cv_folds, derive_seed, sweep_k};
use semgrad::linalg::{self, Mat};
use semgrad::{fit_ols, fit_pca, stats};

/// Documents with per-coordinate variance decaying geometrically, so the
/// leading PCA directions align with the leading coordinates.
fn decaying_matrix(n: usize, d: usize, seed: u64) -> DocumentMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            let scale = 1.6f64.powi(-(j as i32));
            x.push((rng.gen_range(-1.0..1.0) * scale) as f32);
        }
    }
    // Outcome filled in by the caller.
    DocumentMatrix::from_parts(
        (0..n).map(|i| format!("d{i}")).collect(),
        x,
        d,
        vec![0.0; n],
        EmbedConfig::precomputed(),
        "synthetic".to_string(),
    )
    .unwrap()
}

#[test]
fn planted_three_dim_signal_selects_small_k() {
    let n = 160;
    let d = 16;
    let mut dm = decaying_matrix(n, d, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let w = [0.8, -0.6, 0.5];
    for i in 0..n {
        let row = dm.row(i).to_vec();
        let signal: f64 = (0..3).map(|j| w[j] * row[j] as f64).sum();
        dm.y[i] = signal + 0.02 * rng.gen_range(-1.0..1.0);
    }
    let grid = [2usize, 4, 8, 16];
    let result = sweep_k(&dm, &grid, 5, 20, 4242).unwrap();
    assert!(
        result.selected_k == 4 || result.selected_k == 8,
        "selected {} from {:?}",
        result.selected_k,
        result.table
    );
    let score = |k: usize| {
        result
            .table
            .iter()
            .find(|row| row.k == k)
            .and_then(|row| row.score)
            .unwrap()
    };
    assert!(
        score(4) > score(16),
        "score(4)={} vs score(16)={}",
        score(4),
        score(16)
    );
}

#[test]
fn pure_noise_has_no_fit() {
    let n = 200;
    let d = 20;
    let mut dm = decaying_matrix(n, d, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    for i in 0..n {
        dm.y[i] = rng.gen_range(-1.0..1.0);
    }
    let grid: Vec<usize> = (2..=18).step_by(2).collect();
    let result = sweep_k(&dm, &grid, 5, 10, 99).unwrap();
    let max_fit = result
        .table
        .iter()
        .filter_map(|row| row.fit_score)
        .fold(0.0f64, f64::max);
    assert!(max_fit <= 0.15, "noise fit {max_fit}");
}

/// Exhaustive refit oracle: recompute every (context, K) fit from scratch
/// with the public API and the same fold/bootstrap indices; scores must
/// match the sweep table exactly.
#[test]
fn sweep_table_matches_exhaustive_refits() {
    let n = 60;
    let d = 8;
    let mut dm = decaying_matrix(n, d, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..n {
        let row = dm.row(i).to_vec();
        dm.y[i] = 0.7 * row[0] as f64 - 0.4 * row[1] as f64 + 0.1 * rng.gen_range(-1.0..1.0);
    }
    let grid = [2usize, 4, 6];
    let folds = 4;
    let bootstraps = 6;
    let seed = 555;
    let result = sweep_k(&dm, &grid, folds, bootstraps, seed).unwrap();

    let fold_sets = cv_folds(n, folds, derive_seed(seed, "cv"));
    for (ki, &k) in grid.iter().enumerate() {
        // Fit score by direct per-K refits.
        let mut fit_sum = 0.0f64;
        for test_idx in &fold_sets {
            let mut in_test = vec![false; n];
            for &i in test_idx {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let (x_tr, y_tr) = dm.subset_f64(&train);
            let pca = fit_pca(&x_tr, k).unwrap();
            let t_tr = pca.transform(&x_tr);
            let ols = fit_ols(&t_tr, &y_tr).unwrap();
            let (x_te, y_te) = dm.subset_f64(test_idx);
            let t_te = pca.transform(&x_te);
            let yhat: Vec<f64> = (0..t_te.rows)
                .map(|r| ols.intercept + linalg::dot(t_te.row(r), &ols.coefficients))
                .collect();
            fit_sum += stats::pearson(&yhat, &y_te).unwrap_or(0.0);
        }
        let fit_score = (fit_sum / folds as f64).max(0.0);

        // Stability by direct per-K refits.
        let full_x = dm.to_f64();
        let full_pca = fit_pca(&full_x, k).unwrap();
        let full_t = full_pca.transform(&full_x);
        let full_ols = fit_ols(&full_t, &dm.y).unwrap();
        let full_unit = semgrad::gradient::back_project(&full_ols.coefficients, &full_pca).unwrap();
        let mut stab_sum = 0.0f64;
        for b in 0..bootstraps {
            let idx = bootstrap_indices(n, derive_seed(seed, &format!("boot{b}")));
            let (x_b, y_b) = dm.subset_f64(&idx);
            let pca_b = fit_pca(&x_b, k).unwrap();
            let t_b = pca_b.transform(&x_b);
            let ols_b = fit_ols(&t_b, &y_b).unwrap();
            let unit_b = semgrad::gradient::back_project(&ols_b.coefficients, &pca_b).unwrap();
            stab_sum += linalg::dot(&unit_b, &full_unit);
        }
        let stability = stab_sum / bootstraps as f64;

        let row = &result.table[ki];
        let got_fit = row.fit_score.unwrap();
        let got_stab = row.stability.unwrap();
        assert!(
            (got_fit - fit_score).abs() < 1e-12,
            "k={k}: fit {got_fit} vs refit {fit_score}"
        );
        assert!(
            (got_stab - stability).abs() < 1e-12,
            "k={k}: stability {got_stab} vs refit {stability}"
        );
    }
}

#[test]
fn bootstrap_and_fold_helpers_are_deterministic() {
    let f1 = cv_folds(50, 5, 9);
    let f2 = cv_folds(50, 5, 9);
    assert_eq!(f1, f2);
    let all: Vec<usize> = {
        let mut v: Vec<usize> = f1.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    };
    assert_eq!(all, (0..50).collect::<Vec<_>>());

    let b1 = bootstrap_indices(50, 7);
    let b2 = bootstrap_indices(50, 7);
    assert_eq!(b1, b2);
    assert_eq!(b1.len(), 50);
    assert!(b1.iter().all(|&i| i < 50));
}

#[test]
fn subset_extraction_is_aligned() {
    let dm = decaying_matrix(10, 4, 3);
    let (m, y) = dm.subset_f64(&[3, 1, 7]);
    assert_eq!(m.rows, 3);
    assert_eq!(y, vec![dm.y[3], dm.y[1], dm.y[7]]);
    let mat: Mat = dm.to_f64();
    for j in 0..4 {
        assert_eq!(m.get(0, j), mat.get(3, j));
        assert_eq!(m.get(2, j), mat.get(7, j));
    }
}
