//! Special functions and correlation helpers for regression inference.
//!
//! Implemented from scratch so p-values are reproducible bit-for-bit:
//! Lanczos ln-gamma, regularized incomplete beta via Lentz's continued
//! fraction (absolute tolerance 1e-12), and the F-distribution upper tail
//! built on it. Probabilities that underflow 1e-300 are reported as 0.

/// Floor below which probabilities are flushed to zero for display
/// stability.
pub const P_UNDERFLOW: f64 = 1e-300;

/// Natural log of the gamma function, Lanczos approximation (g=7, n=9).
///
/// Roughly 1e-14 relative accuracy, which the 1e-12 absolute target for
/// p-values needs (the shorter classic coefficient set only reaches ~2e-10).
pub fn ln_gamma(z: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if z < 0.5 {
        let s = (std::f64::consts::PI * z).sin();
        if s.abs() < 1e-300 {
            return f64::INFINITY;
        }
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Regularized incomplete beta function I_x(a, b).
///
/// Continued-fraction evaluation (modified Lentz) with the symmetry
/// relation applied so the fraction converges quickly. Absolute tolerance
/// 1e-12.
pub fn betai(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "betai requires positive shape parameters");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 600;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-30;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;

        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper tail P(F > f) for the F distribution with (d1, d2) degrees of
/// freedom. Values below [`P_UNDERFLOW`] are reported as exactly 0.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    assert!(d1 > 0.0 && d2 > 0.0, "degrees of freedom must be positive");
    if f <= 0.0 {
        return 1.0;
    }
    if !f.is_finite() {
        return 0.0;
    }
    let x = d2 / (d2 + d1 * f);
    let p = betai(x, 0.5 * d2, 0.5 * d1);
    if p < P_UNDERFLOW {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

/// Lower tail P(F <= f).
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> f64 {
    assert!(d1 > 0.0 && d2 > 0.0, "degrees of freedom must be positive");
    if f <= 0.0 {
        return 0.0;
    }
    if !f.is_finite() {
        return 1.0;
    }
    betai(d1 * f / (d1 * f + d2), 0.5 * d1, 0.5 * d2).clamp(0.0, 1.0)
}

/// Pearson correlation. Returns `None` when either side has zero variance
/// or fewer than two observations.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let ma = a.iter().sum::<f64>() / nf;
    let mb = b.iter().sum::<f64>() / nf;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for i in 0..n {
        let da = a[i] - ma;
        let db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(5.0), 24.0f64.ln(), epsilon = 1e-10);
        // Gamma(1/2) = sqrt(pi)
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn betai_closed_forms() {
        // I_x(1,1) = x
        assert_abs_diff_eq!(betai(0.37, 1.0, 1.0), 0.37, epsilon = 1e-12);
        // I_x(2,2) = x^2 (3 - 2x)
        let x = 0.3;
        assert_abs_diff_eq!(betai(x, 2.0, 2.0), x * x * (3.0 - 2.0 * x), epsilon = 1e-12);
        // Endpoints
        assert_eq!(betai(0.0, 2.0, 3.0), 0.0);
        assert_eq!(betai(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn betai_symmetry() {
        for &(x, a, b) in &[(0.2, 1.5, 3.0), (0.7, 4.0, 2.5), (0.5, 10.0, 10.0)] {
            let lhs = betai(x, a, b);
            let rhs = 1.0 - betai(1.0 - x, b, a);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn f_cdf_exact_small_dof() {
        // P(F <= 1) with (2, 10) dof is I_{1/6}(1, 5) = 1 - (5/6)^5, exact.
        let expected = 1.0 - (5.0f64 / 6.0).powi(5);
        assert_abs_diff_eq!(f_cdf(1.0, 2.0, 10.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            f_survival(1.0, 2.0, 10.0),
            1.0 - expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn f_survival_limits() {
        assert_eq!(f_survival(0.0, 3.0, 7.0), 1.0);
        assert_eq!(f_survival(f64::INFINITY, 3.0, 7.0), 0.0);
        // Gigantic F underflows to exactly zero.
        assert_eq!(f_survival(1e18, 5.0, 5000.0), 0.0);
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-14);
        let yneg = [8.0, 6.0, 4.0, 2.0];
        assert_abs_diff_eq!(pearson(&x, &yneg).unwrap(), -1.0, epsilon = 1e-14);
        assert!(pearson(&x, &[1.0, 1.0, 1.0, 1.0]).is_none());
    }
}
