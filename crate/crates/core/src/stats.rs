//! Statistical primitives: two-sample Kolmogorov–Smirnov, two-proportion
//! Z-test on error rates, and relative drift severity.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Significance level used by every drift decision unless overridden.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample KS test.
///
/// The statistic is evaluated at every point of the sorted union of both
/// samples, after consuming all copies of that value from each side, so ties
/// never inflate it. The p-value comes from the limiting Kolmogorov
/// distribution at `sqrt(n_a n_b / (n_a + n_b)) * D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput(
            "KS test needs two non-empty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData(
            "KS test needs finite values".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let statistic = ks_statistic_sorted(&a, &b);
    let (n_a, n_b) = (a.len(), b.len());
    let effective = (n_a as f64 * n_b as f64) / (n_a + n_b) as f64;
    let p_value = kolmogorov_survival(effective.sqrt() * statistic);
    Ok(KsResult {
        statistic,
        p_value,
        n_a,
        n_b,
    })
}

/// Statistic over pre-sorted samples.
pub(crate) fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / na - j as f64 / nb).abs();
        if diff > d {
            d = diff;
        }
    }
    d
}

/// `P(K > lambda)` for the Kolmogorov distribution.
///
/// Small arguments use the Jacobi-theta form of the CDF, which converges in a
/// handful of terms there; large arguments use the alternating series.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    const MAX_TERMS: usize = 100;
    const TOL: f64 = 1e-12;
    let p = if lambda < 1.18 {
        let pi = std::f64::consts::PI;
        let w = (2.0 * pi).sqrt() / lambda;
        let factor = -pi * pi / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=MAX_TERMS {
            let odd = (2 * k - 1) as f64;
            let term = (odd * odd * factor).exp();
            sum += term;
            if term < TOL * sum {
                break;
            }
        }
        1.0 - w * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=MAX_TERMS {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < TOL * sum.abs() {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub z: f64,
    /// Two-sided p-value; this is the one compared against alpha.
    pub p_value: f64,
    /// One-sided p-value for an error-rate increase, `P(Z > z)`.
    pub p_value_increase: f64,
    pub pooled_error: f64,
    /// Relative error-rate change; `None` when the training error is zero.
    pub severity: Option<f64>,
    /// Error rate significantly higher on the test side.
    pub drift: bool,
    /// Significant at alpha in either direction.
    pub significant: bool,
    /// Pooled error of 0 or 1: zero variance, no evidence either way.
    pub degenerate: bool,
}

/// Two-proportion Z-test between training and testing error rates:
///
/// `z = (e_test - e_train) / sqrt(e (1 - e) (1/n_train + 1/n_test))`
///
/// with `e` the pooled error rate over both sets. Drift is flagged only when
/// the two-sided p-value is below `alpha` and the test error is the larger one.
pub fn z_test_two_proportion(
    eps_train: f64,
    eps_test: f64,
    n_train: usize,
    n_test: usize,
    alpha: f64,
) -> Result<ZTestResult> {
    for (name, e) in [("eps_train", eps_train), ("eps_test", eps_test)] {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Config(format!("{name} = {e} is not a proportion")));
        }
    }
    if n_train == 0 || n_test == 0 {
        return Err(Error::InsufficientData(
            "Z-test needs non-empty sets".into(),
        ));
    }
    let (nt, ns) = (n_train as f64, n_test as f64);
    let pooled = (eps_train * nt + eps_test * ns) / (nt + ns);
    let severity = drift_severity(eps_train, eps_test);
    let variance = pooled * (1.0 - pooled) * (1.0 / nt + 1.0 / ns);
    if variance <= 0.0 {
        return Ok(ZTestResult {
            z: 0.0,
            p_value: 1.0,
            p_value_increase: 0.5,
            pooled_error: pooled,
            severity,
            drift: false,
            significant: false,
            degenerate: true,
        });
    }
    let z = (eps_test - eps_train) / variance.sqrt();
    let p_value = (2.0 * normal_sf(z.abs())).min(1.0);
    let significant = p_value < alpha;
    Ok(ZTestResult {
        z,
        p_value,
        p_value_increase: normal_sf(z),
        pooled_error: pooled,
        severity,
        drift: significant && eps_test > eps_train,
        significant,
        degenerate: false,
    })
}

/// `(eps_test - eps_train) / eps_train`; undefined (`None`) for a perfect
/// training error.
pub fn drift_severity(eps_train: f64, eps_test: f64) -> Option<f64> {
    (eps_train > 0.0).then(|| (eps_test - eps_train) / eps_train)
}
