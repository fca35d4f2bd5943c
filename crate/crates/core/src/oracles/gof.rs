//! Pearson χ² goodness of fit against a reference CDF.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Upper tail of χ²_df.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(0.5 * df as f64, 0.5 * x)
}

/// Bisection inverse of a continuous CDF on `[lo, hi]`.
pub fn invert_cdf(cdf: &dyn Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// χ² test of `samples` on `bins` equiprobable cells under `cdf`, with the
/// cell edges found by bisection in `[lo, hi]`.
pub fn chi_square_gof(samples: &[f64], cdf: &dyn Fn(f64) -> f64, bins: usize, lo: f64, hi: f64) -> Result<ChiSquare> {
    if bins < 2 || samples.is_empty() {
        return Err(invalid("need at least two bins and one sample"));
    }
    let edges: Vec<f64> = (1..bins).map(|k| invert_cdf(cdf, k as f64 / bins as f64, lo, hi)).collect();
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let k = edges.partition_point(|e| *e < x);
        counts[k] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let df = bins - 1;
    Ok(ChiSquare { statistic, df, p_value: chi_square_sf(statistic, df) })
}

/// χ² test of observed counts against cell probabilities (which need not
/// sum to one; the remainder is ignored).
pub fn chi_square_counts(counts: &[usize], probs: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(invalid("counts and probabilities must align"));
    }
    let total: usize = counts.iter().sum();
    let mass: f64 = probs.iter().sum();
    let statistic = counts
        .iter()
        .zip(probs)
        .map(|(&c, &pr)| {
            let e = total as f64 * pr / mass;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let df = counts.len() - 1;
    Ok(ChiSquare { statistic, df, p_value: chi_square_sf(statistic, df) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_tail_values() {
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(18.307_038_053_275_146, 10) - 0.05).abs() < 1e-9);
    }
}
