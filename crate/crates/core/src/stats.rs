//! Order statistics, binomial confidence gates and log-log rate fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};

/// Nearest-rank quantile of `values` (NaN-free; `+∞` allowed).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Some(quantile_sorted(&v, q))
}

/// Nearest-rank quantile of an already sorted, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialGate {
    pub successes: u64,
    pub trials: u64,
    /// Success probability under the null hypothesis `p ≥ p0`.
    pub p0: f64,
    pub level: f64,
    /// `P(X ≤ successes)` for `X ~ Bin(trials, p0)`.
    pub p_value: f64,
    /// Smallest success count that passes.
    pub min_successes: u64,
    pub pass: bool,
}

/// Exact one-sided binomial test of `p ≥ p0`; passes when it does not reject
/// at the given level.
pub fn binomial_gate(successes: u64, trials: u64, p0: f64, level: f64) -> Result<BinomialGate> {
    if trials == 0 || successes > trials {
        return Err(Error::param("trials", format!("need 0 ≤ successes ≤ trials, trials ≥ 1 (got {successes}/{trials})")));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::param("p0", format!("must lie in [0, 1], got {p0}")));
    }
    let bin = Binomial::new(p0, trials).map_err(|e| Error::param("p0", e.to_string()))?;
    let p_value = bin.cdf(successes);
    let min_successes = (0..=trials).find(|&s| bin.cdf(s) > level).unwrap_or(trials);
    Ok(BinomialGate {
        successes,
        trials,
        p0,
        level,
        p_value,
        min_successes,
        pass: p_value > level,
    })
}

/// One-sided Clopper–Pearson lower confidence bound on a success
/// probability at confidence `1 − alpha`.
pub fn clopper_pearson_lower(successes: u64, trials: u64, alpha: f64) -> f64 {
    if successes == 0 || trials == 0 {
        return 0.0;
    }
    let b = Beta::new(successes as f64, (trials - successes + 1) as f64)
        .expect("positive shape parameters");
    b.inverse_cdf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

/// Ordinary least squares of `ln N` on `ln ε`.
///
/// Requires at least four points spanning at least two decades of `ε`.
pub fn rate_regression(eps: &[f64], n: &[f64]) -> Result<RateFit> {
    if eps.len() != n.len() {
        return Err(Error::Dimension {
            expected: eps.len(),
            got: n.len(),
        });
    }
    if eps.len() < 4 {
        return Err(Error::param("eps", format!("need at least 4 points, got {}", eps.len())));
    }
    if eps.iter().chain(n).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::param("eps", "values must be positive and finite"));
    }
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(0.0, f64::max);
    if (hi / lo).log10() < 2.0 - 1e-9 {
        return Err(Error::param("eps", "sweep must span at least two decades"));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (rss / k).sqrt(),
    })
}
