//! Synthetic longitudinal trials with known parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{PatternedDataset, Subject};
use crate::distributions::{gamma_rate, standard_normal, Dof};
use crate::error::{invalid, Result};
use crate::model::{ModelSpec, Variant, INTERCEPT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DropoutMechanism {
    /// Everyone completes.
    None,
    /// Leave before visit `j ≥ 2` with probability
    /// `logistic(intercept + slope · y_{j−1})`.
    MarHazard { intercept: f64, slope: f64 },
    /// As above but driven by the unobserved `y_j`.
    MnarShift { intercept: f64, slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub n_tot: usize,
    /// Full-scale coefficients, visits by X covariates. Columns are the
    /// intercept, then `n_baseline` standard-normal covariates, then the
    /// 0/1 treatment when `treatment` is set.
    pub alpha: Vec<Vec<f64>>,
    pub n_baseline: usize,
    pub treatment: bool,
    /// Effects of standard-normal time-varying covariates.
    pub eta: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    /// `None` is the infinite-df sentinel.
    pub nu: Option<f64>,
    pub dropout: DropoutMechanism,
    /// Probability that a visit before the last observation is missing.
    pub intermittent_rate: f64,
}

/// Generated data with the complete outcomes kept for checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub data: PatternedDataset,
    /// Complete outcomes by subject id order of generation.
    pub complete: Vec<(String, Vec<f64>)>,
    pub alpha: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub psi: DVector<f64>,
    pub eta: DVector<f64>,
    pub nu: Dof,
}

impl SyntheticScenario {
    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    pub fn x_names(&self) -> Vec<String> {
        let mut names = vec![INTERCEPT.to_string()];
        names.extend((1..=self.n_baseline).map(|k| format!("base{k}")));
        if self.treatment {
            names.push("trt".into());
        }
        names
    }

    pub fn z_names(&self) -> Vec<String> {
        (1..=self.eta.len()).map(|k| format!("tv{k}")).collect()
    }

    /// Model layout matching the generated columns.
    pub fn spec(&self, variant: Variant) -> ModelSpec {
        ModelSpec {
            variant,
            p: self.p(),
            x_names: self.x_names(),
            z_names: self.z_names(),
            intercept: true,
            treatment: self.treatment.then(|| "trt".to_string()),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.p();
        let q = 1 + self.n_baseline + usize::from(self.treatment);
        if p == 0 || self.sigma.iter().any(|r| r.len() != p) {
            return Err(invalid("sigma must be square and non-empty"));
        }
        if self.alpha.len() != p || self.alpha.iter().any(|r| r.len() != q) {
            return Err(invalid(format!("alpha must be {p} x {q}")));
        }
        if self.psi.len() != p {
            return Err(invalid("psi must have one entry per visit"));
        }
        if !(0.0..1.0).contains(&self.intermittent_rate) {
            return Err(invalid("intermittent_rate must lie in [0, 1)"));
        }
        if let Some(nu) = self.nu {
            if !(nu > 0.0) {
                return Err(invalid("nu must be positive"));
            }
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws one trial: covariates, complete ST outcomes, dropout and
/// intermittent gaps.
pub fn generate_scenario<R: Rng + ?Sized>(s: &SyntheticScenario, rng: &mut R) -> Result<Scenario> {
    s.validate()?;
    let p = s.p();
    let q = 1 + s.n_baseline + usize::from(s.treatment);
    let r = s.eta.len();
    let alpha = DMatrix::from_fn(p, q, |j, k| s.alpha[j][k]);
    let sigma = DMatrix::from_fn(p, p, |i, j| s.sigma[i][j]);
    let psi = DVector::from_column_slice(&s.psi);
    let eta = DVector::from_column_slice(&s.eta);
    let chol = sigma.clone().cholesky().ok_or_else(|| invalid("sigma is not positive definite"))?;
    let l = chol.l();
    let width = (s.n_tot.max(1) as f64).log10().floor() as usize + 1;
    let mut subjects = Vec::with_capacity(s.n_tot);
    let mut complete = Vec::with_capacity(s.n_tot);
    for i in 0..s.n_tot {
        let id = format!("S{:0width$}", i + 1, width = width);
        let mut x = vec![1.0];
        x.extend((0..s.n_baseline).map(|_| standard_normal(rng)));
        if s.treatment {
            x.push(if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
        }
        let xv = DVector::from_column_slice(&x);
        let z = DMatrix::from_fn(p, r, |_, _| standard_normal(rng));
        let d = match s.nu {
            Some(nu) => gamma_rate(rng, 0.5 * nu, 0.5 * nu),
            None => 1.0,
        };
        let w = standard_normal(rng).abs() / d.sqrt();
        let e = DVector::from_fn(p, |_, _| standard_normal(rng));
        let eps = &l * e / d.sqrt();
        let mean = &alpha * &xv + if r > 0 { &z * &eta } else { DVector::zeros(p) };
        let y: Vec<f64> = (0..p).map(|j| mean[j] + psi[j] * w + eps[j]).collect();
        let mut last = p;
        for j in 1..p {
            let hazard = match s.dropout {
                DropoutMechanism::None => 0.0,
                DropoutMechanism::MarHazard { intercept, slope } => logistic(intercept + slope * y[j - 1]),
                DropoutMechanism::MnarShift { intercept, slope } => logistic(intercept + slope * y[j]),
            };
            if hazard > 0.0 && rng.random::<f64>() < hazard {
                last = j;
                break;
            }
        }
        let mut obs: Vec<Option<f64>> = (0..p).map(|j| (j < last).then_some(y[j])).collect();
        if s.intermittent_rate > 0.0 {
            for cell in obs.iter_mut().take(last.saturating_sub(1)) {
                if rng.random::<f64>() < s.intermittent_rate {
                    *cell = None;
                }
            }
        }
        subjects.push(Subject { id: id.clone(), x: xv, z, y: obs });
        complete.push((id, y));
    }
    let data = PatternedDataset::new(p, s.x_names(), s.z_names(), subjects)?;
    Ok(Scenario {
        data,
        complete,
        alpha,
        sigma,
        psi,
        eta,
        nu: s.nu.map_or(Dof::Infinite, Dof::Finite),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> SyntheticScenario {
        SyntheticScenario {
            n_tot: 400,
            alpha: vec![vec![0.0, 1.0], vec![0.5, 1.0], vec![1.0, 1.0]],
            n_baseline: 0,
            treatment: true,
            eta: vec![],
            sigma: vec![vec![1.0, 0.5, 0.3], vec![0.5, 1.0, 0.5], vec![0.3, 0.5, 1.0]],
            psi: vec![1.0, 1.0, 1.0],
            nu: Some(8.0),
            dropout: DropoutMechanism::None,
            intermittent_rate: 0.0,
        }
    }

    #[test]
    fn no_dropout_gives_complete_data() {
        let sc = generate_scenario(&base(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(sc.data.summary().pattern_counts, vec![0, 0, 0, 400]);
    }

    #[test]
    fn hazard_dropout_rate() {
        let mut s = base();
        s.n_tot = 4000;
        s.dropout = DropoutMechanism::MarHazard { intercept: (0.2f64 / 0.8).ln(), slope: 0.0 };
        let sc = generate_scenario(&s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let dropped = sc.data.subjects.iter().filter(|x| x.dropout() < 3).count() as f64;
        let target = 1.0 - 0.8f64.powi(2);
        let se = (target * (1.0 - target) / 4000.0).sqrt();
        assert!((dropped / 4000.0 - target).abs() < 3.0 * se);
    }

    #[test]
    fn seeded_determinism() {
        let a = generate_scenario(&base(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_scenario(&base(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
