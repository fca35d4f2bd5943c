//! Chain diagnostics: autocorrelation, effective sample size, MCSE.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::DrawStore;

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Sample autocorrelations at lags `0..=max_lag` (empty for a constant
/// series).
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Vec::new();
    }
    (0..=max_lag.min(n - 1))
        .map(|k| {
            let ck: f64 = (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum::<f64>() / n as f64;
            ck / c0
        })
        .collect()
}

/// Effective sample size by Geyer's initial monotone sequence; `None` for a
/// degenerate (constant) chain.
pub fn ess(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let rho = acf(x, n - 1);
    if rho.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while k + 1 < rho.len() {
        let pair = rho[k] + rho[k + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Some((n as f64 / tau).min(n as f64 * (n as f64).log10().max(1.0)))
}

/// Monte Carlo standard error of the mean.
pub fn mcse(x: &[f64]) -> f64 {
    let (_, sd) = mean_sd(x);
    match ess(x) {
        Some(e) => sd / e.sqrt(),
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// `None` flags a degenerate (constant) chain.
    pub ess: Option<f64>,
    pub mcse: f64,
    /// Lags 0..=50.
    pub acf: Vec<f64>,
}

pub fn summarize(name: &str, x: &[f64], max_lag: usize) -> ParameterSummary {
    let (mean, sd) = mean_sd(x);
    let e = ess(x);
    ParameterSummary {
        name: name.to_string(),
        mean,
        sd,
        ess: e,
        mcse: e.map_or(0.0, |e| sd / e.sqrt()),
        acf: acf(x, max_lag),
    }
}

/// Per-column summaries of a draw store (at least 100 draws).
pub fn chain_diagnostics(store: &DrawStore) -> Result<Vec<ParameterSummary>> {
    if store.len() < 100 {
        return Err(Error::InsufficientDraws { needed: 100, have: store.len() });
    }
    let (names, rows) = store.table()?;
    Ok(names
        .iter()
        .enumerate()
        .filter(|(k, _)| rows.iter().all(|r| r[*k].is_finite()))
        .map(|(k, name)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            summarize(name, &col, 50)
        })
        .collect())
}
