//! Final-visit ANCOVA on completed datasets, Rubin pooling and
//! delta-adjusted tipping-point grids.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::PatternedDataset;
use crate::error::{invalid, Error, Result};
use crate::imputation::{generate_mi_sets, ImputationStrategy, ImputedDataset};
use crate::model::{ModelSpec, INTERCEPT};
use crate::sampler::DrawStore;
use crate::special::{norm_sf, t_sf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AncovaFit {
    /// Treatment coefficient.
    pub estimate: f64,
    pub variance: f64,
    /// Residual degrees of freedom `n − k`.
    pub df: f64,
    /// Intercept, treatment, then the covariates.
    pub coefficients: Vec<f64>,
}

/// OLS of `y` on an intercept, the treatment indicator and the covariate
/// columns.
pub fn ancova(y: &[f64], treatment: &[f64], covariates: &[Vec<f64>]) -> Result<AncovaFit> {
    let n = y.len();
    if treatment.len() != n || covariates.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: treatment.len() });
    }
    let k = 2 + covariates.len();
    if n <= k {
        return Err(invalid(format!("{n} subjects cannot support {k} regressors")));
    }
    let x = DMatrix::from_fn(n, k, |i, c| match c {
        0 => 1.0,
        1 => treatment[i],
        _ => covariates[c - 2][i],
    });
    let xtx = x.transpose() * &x;
    let svd = xtx.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::Numerical("ANCOVA design is rank deficient".into()));
    }
    let chol = xtx.cholesky().ok_or_else(|| Error::Numerical("ANCOVA design is rank deficient".into()))?;
    let yv = DVector::from_column_slice(y);
    let coef = chol.solve(&(x.transpose() * &yv));
    let resid = &yv - &x * &coef;
    let df = (n - k) as f64;
    let s2 = resid.norm_squared() / df;
    let inv = chol.inverse();
    Ok(AncovaFit { estimate: coef[1], variance: s2 * inv[(1, 1)], df, coefficients: coef.iter().copied().collect() })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// X covariates entered in the ANCOVA besides the treatment.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Analyze `y_p − x[name]` instead of `y_p`.
    #[serde(default)]
    pub change_from: Option<String>,
}

fn x_column(data: &PatternedDataset, spec: &ModelSpec, name: &str) -> Result<Vec<f64>> {
    let k = spec
        .x_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Spec(format!("'{name}' is not an X covariate")))?;
    Ok(data.subjects.iter().map(|s| s.x[k]).collect())
}

/// Treatment effect at the last visit of one completed dataset.
pub fn ancova_final_visit(
    ds: &ImputedDataset,
    data: &PatternedDataset,
    spec: &ModelSpec,
    cfg: &AnalysisConfig,
) -> Result<AncovaFit> {
    let trt = spec.require_treatment()?;
    if ds.ids.len() != data.n_tot() || ds.ids.iter().zip(&data.subjects).any(|(a, b)| *a != b.id) {
        return Err(Error::Data("imputed dataset does not match the subjects".into()));
    }
    let mut y = ds.visit(spec.p - 1);
    if let Some(base) = &cfg.change_from {
        for (v, b) in y.iter_mut().zip(x_column(data, spec, base)?) {
            *v -= b;
        }
    }
    let g = x_column(data, spec, &spec.x_names[trt])?;
    let covs = cfg
        .covariates
        .iter()
        .map(|name| {
            if name == INTERCEPT || Some(name) == spec.treatment.as_ref() {
                Err(Error::Spec(format!("'{name}' cannot be an ANCOVA covariate")))
            } else {
                x_column(data, spec, name)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ancova(&y, &g, &covs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiResult {
    pub estimates: Vec<f64>,
    pub variances: Vec<f64>,
    pub q_bar: f64,
    pub u_bar: f64,
    pub between: f64,
    pub total: f64,
    pub df: f64,
    pub df_complete: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl MiResult {
    pub fn m(&self) -> usize {
        self.estimates.len()
    }
}

/// Rubin's large-sample degrees of freedom `(m−1)(1 + 1/r)²`.
pub fn rubin_classical_df(m: usize, u_bar: f64, between: f64) -> f64 {
    if between == 0.0 {
        return f64::INFINITY;
    }
    let r = (1.0 + 1.0 / m as f64) * between / u_bar;
    (m as f64 - 1.0) * (1.0 + 1.0 / r).powi(2)
}

/// Barnard–Rubin degrees of freedom; `df_complete` may be infinite.
pub fn barnard_rubin_df(m: usize, u_bar: f64, between: f64, df_complete: f64) -> f64 {
    if between == 0.0 {
        return df_complete;
    }
    let total = u_bar + (1.0 + 1.0 / m as f64) * between;
    let lambda = (1.0 + 1.0 / m as f64) * between / total;
    let df_old = (m as f64 - 1.0) / (lambda * lambda);
    if df_complete.is_infinite() {
        return df_old;
    }
    let df_obs = (df_complete + 1.0) / (df_complete + 3.0) * df_complete * (1.0 - lambda);
    1.0 / (1.0 / df_old + 1.0 / df_obs)
}

/// Pools `(estimate, variance)` pairs.
pub fn rubin_pool(results: &[(f64, f64)], df_complete: f64) -> Result<MiResult> {
    let m = results.len();
    if m < 2 {
        return Err(invalid(format!("pooling needs at least 2 imputations, got {m}")));
    }
    if !(df_complete > 0.0) {
        return Err(invalid("complete-data df must be positive"));
    }
    if results.iter().any(|(q, u)| !q.is_finite() || !u.is_finite() || *u < 0.0) {
        return Err(invalid("estimates must be finite with non-negative variances"));
    }
    let mf = m as f64;
    let q_bar = results.iter().map(|r| r.0).sum::<f64>() / mf;
    let u_bar = results.iter().map(|r| r.1).sum::<f64>() / mf;
    let between = results.iter().map(|r| (r.0 - q_bar).powi(2)).sum::<f64>() / (mf - 1.0);
    let total = (mf * u_bar + (mf + 1.0) * between) / mf;
    if !(total > 0.0) {
        return Err(Error::Numerical("pooled variance is zero".into()));
    }
    let df = barnard_rubin_df(m, u_bar, between, df_complete);
    let t_stat = q_bar / total.sqrt();
    let p_value = if df.is_infinite() { 2.0 * norm_sf(t_stat.abs()) } else { 2.0 * t_sf(t_stat.abs(), df) };
    Ok(MiResult {
        estimates: results.iter().map(|r| r.0).collect(),
        variances: results.iter().map(|r| r.1).collect(),
        q_bar,
        u_bar,
        between,
        total,
        df,
        df_complete,
        t_stat,
        p_value: p_value.min(1.0),
    })
}

/// ANCOVA on every dataset, then pooling with the OLS residual df.
pub fn analyze_mi(
    sets: &[ImputedDataset],
    data: &PatternedDataset,
    spec: &ModelSpec,
    cfg: &AnalysisConfig,
) -> Result<MiResult> {
    let fits = sets.iter().map(|ds| ancova_final_visit(ds, data, spec, cfg)).collect::<Result<Vec<_>>>()?;
    let df_complete = fits.first().map_or(f64::NAN, |f| f.df);
    let pairs: Vec<(f64, f64)> = fits.iter().map(|f| (f.estimate, f.variance)).collect();
    rubin_pool(&pairs, df_complete)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TippingGrid {
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    /// `cells[a][b]` is the analysis at `(delta0[a], delta1[b])`.
    pub cells: Vec<Vec<MiResult>>,
    pub alpha: f64,
}

impl TippingGrid {
    /// First treated-arm offset along each control-arm row whose p-value
    /// exceeds `alpha`.
    pub fn boundary(&self) -> Vec<Option<f64>> {
        self.cells
            .iter()
            .map(|row| row.iter().position(|c| c.p_value > self.alpha).map(|k| self.delta1[k]))
            .collect()
    }

    /// `(Δ0, Δ1, −log10 p)` rows.
    pub fn long_table(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.delta0.len() * self.delta1.len());
        for (a, row) in self.cells.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                out.push((self.delta0[a], self.delta1[b], -c.p_value.log10()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TippingConfig {
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub conditional: bool,
}

fn default_alpha() -> f64 {
    0.05
}

/// Delta-adjusted MI over a grid of per-arm offsets. Every cell reuses the
/// same draws and random streams.
pub fn tipping_point(
    store: &DrawStore,
    data: &PatternedDataset,
    spec: &ModelSpec,
    cfg: &TippingConfig,
    analysis: &AnalysisConfig,
) -> Result<TippingGrid> {
    if cfg.delta0.is_empty() || cfg.delta1.is_empty() {
        return Err(invalid("tipping grids must be non-empty"));
    }
    if cfg.delta0.iter().chain(&cfg.delta1).any(|v| !v.is_finite()) {
        return Err(invalid("tipping grids must be finite"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(invalid("alpha must lie in (0, 1)"));
    }
    let cells = cfg
        .delta0
        .iter()
        .map(|&d0| {
            cfg.delta1
                .iter()
                .map(|&d1| {
                    let strategy = ImputationStrategy::delta(d0, d1, cfg.conditional);
                    let sets = generate_mi_sets(store, data, spec, &strategy, cfg.m, cfg.seed)?;
                    analyze_mi(&sets, data, spec, analysis)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TippingGrid { delta0: cfg.delta0.clone(), delta1: cfg.delta1.clone(), cells, alpha: cfg.alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_pooling() {
        let r = rubin_pool(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], 50.0).unwrap();
        assert_eq!(r.q_bar, 2.0);
        assert_eq!(r.between, 1.0);
        assert!((r.total - 7.0 / 3.0).abs() < 1e-15);
        assert!(r.df > 0.0 && r.df <= 50.0);
    }

    #[test]
    fn identical_imputations() {
        let r = rubin_pool(&[(1.5, 0.4); 5], 37.0).unwrap();
        assert_eq!(r.between, 0.0);
        assert_eq!(r.total, r.u_bar);
        assert_eq!(r.df, 37.0);
    }

    #[test]
    fn single_imputation_rejected() {
        assert!(rubin_pool(&[(1.0, 1.0)], 10.0).is_err());
    }

    #[test]
    fn two_group_t_test() {
        let y = [1.0, 2.0, 3.0, 5.0, 6.0, 10.0];
        let g = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = ancova(&y, &g, &[]).unwrap();
        assert!((fit.estimate - 5.0).abs() < 1e-12);
        // pooled variance (2 + 14)/4 = 4, SE² = 4(1/3 + 1/3)
        assert!((fit.variance - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(fit.df, 4.0);
    }

    #[test]
    fn rank_deficient_design() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let g = [0.0, 0.0, 1.0, 1.0];
        assert!(ancova(&y, &g, &[g.to_vec()]).is_err());
    }
}
