//! Goodness-of-fit and interval estimates for win counts.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::stake_model::rational_to_f64;

/// Categories whose expected count falls below this are pooled.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.576;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("fewer than two categories remain after pooling")]
    DegenerateTest,
    #[error("{counts} counts but {probs} expected probabilities")]
    LengthMismatch { counts: usize, probs: usize },
    #[error("counts sum to {actual}, expected {expected}")]
    CountMismatch { expected: u64, actual: u64 },
    #[error("expected probabilities must be non-negative and sum to 1")]
    NotADistribution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofOutcome {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Pearson chi-square test of `counts` against `expected_probs` over `n` draws.
///
/// Categories expecting fewer than five observations are pooled into one
/// residual category; a residual still below five is folded into the retained
/// category with the smallest expectation.
pub fn chi_square_gof(
    counts: &[u64],
    expected_probs: &[BigRational],
    n: u64,
) -> Result<GofOutcome, StatsError> {
    if counts.len() != expected_probs.len() {
        return Err(StatsError::LengthMismatch {
            counts: counts.len(),
            probs: expected_probs.len(),
        });
    }
    let actual: u64 = counts.iter().sum();
    if actual != n {
        return Err(StatsError::CountMismatch {
            expected: n,
            actual,
        });
    }
    let total: BigRational = expected_probs.iter().sum();
    if !total.is_one() || expected_probs.iter().any(|p| p.is_negative()) {
        return Err(StatsError::NotADistribution);
    }

    let n_big = BigRational::from_integer(BigInt::from(n));
    let mut retained: Vec<(f64, f64)> = Vec::new();
    let (mut pool_obs, mut pool_exp, mut pooled_any) = (0.0, 0.0, false);
    for (&o, p) in counts.iter().zip(expected_probs) {
        let e = rational_to_f64(&(p * &n_big));
        if e >= MIN_EXPECTED_COUNT {
            retained.push((o as f64, e));
        } else {
            pool_obs += o as f64;
            pool_exp += e;
            pooled_any = true;
        }
    }
    if pooled_any && (pool_obs > 0.0 || pool_exp > 0.0) {
        if pool_exp >= MIN_EXPECTED_COUNT || retained.is_empty() {
            retained.push((pool_obs, pool_exp));
        } else {
            let smallest = retained
                .iter_mut()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            smallest.0 += pool_obs;
            smallest.1 += pool_exp;
        }
    }
    if retained.len() < 2 {
        return Err(StatsError::DegenerateTest);
    }

    let statistic: f64 = retained.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let df = retained.len() as u64 - 1;
    Ok(GofOutcome {
        statistic,
        df,
        p_value: chi_square_survival(statistic, df),
    })
}

/// `P(X >= statistic)` for a chi-square variable with `df` degrees of freedom.
pub fn chi_square_survival(statistic: f64, df: u64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    if !statistic.is_finite() {
        return 0.0;
    }
    gamma_ur(df as f64 / 2.0, statistic / 2.0)
}

/// 99% interval for a binomial proportion.
///
/// Normal approximation, except at `count` 0 or `n` where the exact
/// Clopper–Pearson bound is used.
pub fn binomial_ci99(count: u64, n: u64) -> (f64, f64) {
    assert!(n > 0 && count <= n, "need 0 <= count <= n, n > 0");
    let tail: f64 = (1.0 - 0.99) / 2.0;
    if count == 0 {
        return (0.0, 1.0 - tail.powf(1.0 / n as f64));
    }
    if count == n {
        return (tail.powf(1.0 / n as f64), 1.0);
    }
    let p = count as f64 / n as f64;
    let half = Z_99 * (p * (1.0 - p) / n as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}
