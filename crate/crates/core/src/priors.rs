//! Prior densities and hyperprior updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::LdlFactor;
use crate::distributions::gamma_rate;
use crate::error::{invalid, Error, Result};
use crate::special::{digamma_diff, ln_gamma_ratio, trigamma_diff};

/// Radicand below which the KL distance is treated as zero.
const KL_FLOOR: f64 = 1e-15;
/// Rank threshold for eigenvalues of the α prior covariance.
const RANK_TOL: f64 = 1e-10;

/// Prior on the unstructured covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariancePrior {
    /// ρ_j ~ G(1/2, 1/a0²), Σ | ρ ~ W⁻¹(2 n0 diag(ρ), n0 + p − 1).
    HuangWand { n0: f64, a0: f64 },
    /// Σ ~ W⁻¹(scale, n_w) with fixed hyperparameters (normal and t only).
    InverseWishart { n_w: f64, scale: Vec<Vec<f64>> },
    /// Inverse Wishart with `n_w = 0` and zero scale.
    Jeffreys,
}

impl Default for CovariancePrior {
    fn default() -> Self {
        CovariancePrior::HuangWand { n0: 2.0, a0: 1e5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub covariance: CovariancePrior,
    /// Prior mean of α, visits by X covariates; `None` is zero.
    pub alpha0: Option<Vec<Vec<f64>>>,
    /// Prior covariance `M` of α (q × q, possibly rank deficient); `None` is zero.
    pub m_cov: Option<Vec<Vec<f64>>>,
    /// Prior mean of η; `None` is zero.
    pub eta0: Option<Vec<f64>>,
    /// Prior covariance of η; `None` is the flat prior.
    pub v_eta0: Option<Vec<Vec<f64>>>,
    /// PC-prior rate; `None` calibrates so that P(ν < `pc_median`) = 1/2.
    pub pc_lambda: Option<f64>,
    pub pc_median: f64,
    pub nu_l: f64,
    pub nu_m: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            covariance: CovariancePrior::default(),
            alpha0: None,
            m_cov: None,
            eta0: None,
            v_eta0: None,
            pc_lambda: None,
            pc_median: 10.0,
            nu_l: 2.0,
            nu_m: 1000.0,
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{what} must be {nrows} x {ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Prior quantities fixed for a given model layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPrior {
    pub covariance: CovariancePrior,
    pub p: usize,
    pub q: usize,
    pub alpha0: DMatrix<f64>,
    pub m_cov: DMatrix<f64>,
    pub m_rank: usize,
    pub eta0: DVector<f64>,
    /// Prior precision of η; `None` is flat.
    pub eta_precision: Option<DMatrix<f64>>,
    pub pc_lambda: f64,
    pub nu_l: f64,
    pub nu_m: f64,
    fixed_scale: Option<DMatrix<f64>>,
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if let CovariancePrior::HuangWand { n0, a0 } = self.covariance {
            if !(n0 > 0.0) || !(a0 > 0.0) {
                return Err(invalid(format!("Huang-Wand n0 and a0 must be positive, got {n0}, {a0}")));
            }
        }
        if let CovariancePrior::InverseWishart { n_w, .. } = self.covariance {
            if !(n_w >= 0.0) {
                return Err(invalid("inverse-Wishart df must be non-negative"));
            }
        }
        if !(self.nu_l < self.nu_m) || !(self.nu_l >= 0.0) {
            return Err(invalid(format!("need 0 <= nu_l < nu_m, got {} and {}", self.nu_l, self.nu_m)));
        }
        if let Some(l) = self.pc_lambda {
            if !(l > 0.0) {
                return Err(invalid("pc_lambda must be positive"));
            }
        }
        if !(self.pc_median > self.nu_l) {
            return Err(invalid("pc_median must exceed nu_l"));
        }
        Ok(())
    }

    /// Fixes dimensions: `p` visits, `q` X covariates, `r_z` Z covariates.
    pub fn resolve(&self, p: usize, q: usize, r_z: usize) -> Result<ResolvedPrior> {
        self.validate()?;
        let alpha0 = match &self.alpha0 {
            Some(rows) => matrix_from_rows(rows, p, q, "alpha0")?,
            None => DMatrix::zeros(p, q),
        };
        let m_cov = match &self.m_cov {
            Some(rows) => matrix_from_rows(rows, q, q, "m_cov")?,
            None => DMatrix::zeros(q, q),
        };
        if (&m_cov - m_cov.transpose()).amax() > 1e-12 {
            return Err(invalid("m_cov must be symmetric"));
        }
        let m_rank = if q == 0 {
            0
        } else {
            let eig = SymmetricEigen::new(m_cov.clone());
            let scale = eig.eigenvalues.amax().max(1.0);
            if eig.eigenvalues.iter().any(|v| *v < -RANK_TOL * scale) {
                return Err(invalid("m_cov must be positive semi-definite"));
            }
            eig.eigenvalues.iter().filter(|v| **v > RANK_TOL * scale).count()
        };
        let eta0 = match &self.eta0 {
            Some(v) if v.len() == r_z => DVector::from_column_slice(v),
            Some(v) => return Err(Error::DimensionMismatch { expected: r_z, got: v.len() }),
            None => DVector::zeros(r_z),
        };
        let eta_precision = match &self.v_eta0 {
            Some(rows) => {
                let v = matrix_from_rows(rows, r_z, r_z, "v_eta0")?;
                let chol = v.cholesky().ok_or_else(|| invalid("v_eta0 must be positive definite"))?;
                Some(chol.inverse())
            }
            None => None,
        };
        let fixed_scale = match &self.covariance {
            CovariancePrior::InverseWishart { scale, .. } => Some(matrix_from_rows(scale, p, p, "inverse-Wishart scale")?),
            CovariancePrior::Jeffreys => Some(DMatrix::zeros(p, p)),
            CovariancePrior::HuangWand { .. } => None,
        };
        let pc_lambda = match self.pc_lambda {
            Some(l) => l,
            None => pc_lambda_for_median(self.pc_median, p)?,
        };
        Ok(ResolvedPrior {
            covariance: self.covariance.clone(),
            p,
            q,
            alpha0,
            m_cov,
            m_rank,
            eta0,
            eta_precision,
            pc_lambda,
            nu_l: self.nu_l,
            nu_m: self.nu_m,
            fixed_scale,
        })
    }
}

impl ResolvedPrior {
    /// Inverse-Wishart degrees of freedom `n_w`.
    pub fn n_w(&self) -> f64 {
        match &self.covariance {
            CovariancePrior::HuangWand { n0, .. } => n0 + self.p as f64 - 1.0,
            CovariancePrior::InverseWishart { n_w, .. } => *n_w,
            CovariancePrior::Jeffreys => 0.0,
        }
    }

    pub fn has_hyperprior(&self) -> bool {
        matches!(self.covariance, CovariancePrior::HuangWand { .. })
    }

    /// Rank `r` entering the γ exponent: `rank(M) + 1` with a skewness slot.
    pub fn rank_r(&self, skew: bool) -> usize {
        self.m_rank + usize::from(skew)
    }

    /// `A_w`: `2 n0 diag(ρ)` under Huang-Wand, the fixed scale otherwise.
    pub fn a_w(&self, rho: &DVector<f64>) -> DMatrix<f64> {
        match (&self.covariance, &self.fixed_scale) {
            (CovariancePrior::HuangWand { n0, .. }, _) => DMatrix::from_diagonal(&(rho * (2.0 * n0))),
            (_, Some(s)) => s.clone(),
            _ => unreachable!("fixed scale resolved with the covariance prior"),
        }
    }

    /// Leading `(Q + j) × (Q + j)` block of `E` for visit `j` (1-based),
    /// where `Q = q + 1` when `skew` and `q` otherwise.
    pub fn build_e(&self, rho: &DVector<f64>, d_psi_j: f64, j: usize, skew: bool) -> Result<DMatrix<f64>> {
        build_e(&self.m_cov, &self.alpha0, &self.a_w(rho), d_psi_j, j, skew)
    }

    pub fn pc_logpdf(&self, nu: f64) -> f64 {
        pc_prior_logpdf(nu, self.pc_lambda, self.nu_l, self.nu_m, self.p)
    }
}

/// Leading block `E_j` of the induced prior matrix
/// `[M, 0, Mα0'; 0, 4 d_ψ/π², 0; α0 M, 0, α0 M α0' + A_w]`.
pub fn build_e(
    m_cov: &DMatrix<f64>,
    alpha0: &DMatrix<f64>,
    a_w: &DMatrix<f64>,
    d_psi_j: f64,
    j: usize,
    skew: bool,
) -> Result<DMatrix<f64>> {
    let q = m_cov.nrows();
    let p = a_w.nrows();
    if j == 0 || j > p {
        return Err(Error::OutOfRange { index: j, dim: p });
    }
    if alpha0.nrows() != p || alpha0.ncols() != q {
        return Err(Error::DimensionMismatch { expected: p * q, got: alpha0.len() });
    }
    let qv = q + usize::from(skew);
    let full = qv + p;
    let mut e = DMatrix::zeros(full, full);
    let am = alpha0 * m_cov;
    e.view_mut((0, 0), (q, q)).copy_from(m_cov);
    e.view_mut((0, qv), (q, p)).copy_from(&am.transpose());
    e.view_mut((qv, 0), (p, q)).copy_from(&am);
    let lower = &am * alpha0.transpose() + a_w;
    e.view_mut((qv, qv), (p, p)).copy_from(&lower);
    if skew {
        e[(q, q)] = 4.0 * d_psi_j / (std::f64::consts::PI * std::f64::consts::PI);
    }
    let k = qv + j;
    Ok(e.view((0, 0), (k, k)).into_owned())
}

/// KL divergence from the standardized t (scale `(ν−2)/ν Σ`) to its normal
/// base, in dimension `p`.
pub fn pc_kl(nu: f64, p: usize) -> Result<f64> {
    if !(nu > 2.0) {
        return Err(invalid(format!("PC prior requires nu > 2, got {nu}")));
    }
    let pf = p as f64;
    let half_nu = 0.5 * nu;
    let half_p = 0.5 * pf;
    Ok(half_p * (1.0 + (2.0 / (nu - 2.0)).ln()) + ln_gamma_ratio(half_nu, half_p)
        - 0.5 * (nu + pf) * digamma_diff(half_nu, half_p))
}

/// `d(ν) = √(2 KL(ν))`.
pub fn pc_prior_distance(nu: f64, p: usize) -> Result<f64> {
    let rad = 2.0 * pc_kl(nu, p)?;
    Ok(if rad < KL_FLOOR { 0.0 } else { rad.sqrt() })
}

/// `∂d/∂ν = −[p/(ν−2) + (ν+p)/2 (ψ'((ν+p)/2) − ψ'(ν/2))] / (2 d(ν))`.
pub fn pc_distance_derivative(nu: f64, p: usize) -> Result<f64> {
    let d = pc_prior_distance(nu, p)?;
    let pf = p as f64;
    let num = pf / (nu - 2.0) + 0.5 * (nu + pf) * trigamma_diff(0.5 * nu, 0.5 * pf);
    Ok(-num / (2.0 * d))
}

/// Rate λ with P(ν < `median`) = 1/2. The prior mass of `ν < x` is
/// `exp(−λ d(x))` because `d` decreases from ∞ at `ν = 2` to 0.
pub fn pc_lambda_for_median(median: f64, p: usize) -> Result<f64> {
    let d = pc_prior_distance(median, p)?;
    if !(d > 0.0) {
        return Err(invalid("median too large for the PC prior"));
    }
    Ok(std::f64::consts::LN_2 / d)
}

/// Prior mass of `(a, b)` for `2 < a < b`: `exp(−λ d(b)) − exp(−λ d(a))`.
pub fn pc_prior_mass(a: f64, b: f64, lambda: f64, p: usize) -> Result<f64> {
    let upper = (-lambda * pc_prior_distance(b, p)?).exp();
    let lower = if a <= 2.0 { 0.0 } else { (-lambda * pc_prior_distance(a, p)?).exp() };
    Ok(upper - lower)
}

/// `log[λ exp(−λ d(ν)) |d'(ν)|]` on `(ν_l, ν_m)`, `−∞` outside.
pub fn pc_prior_logpdf(nu: f64, lambda: f64, nu_l: f64, nu_m: f64, p: usize) -> f64 {
    if !(nu > nu_l && nu < nu_m) || !(nu > 2.0) {
        return f64::NEG_INFINITY;
    }
    let (Ok(d), Ok(dd)) = (pc_prior_distance(nu, p), pc_distance_derivative(nu, p)) else {
        return f64::NEG_INFINITY;
    };
    lambda.ln() - lambda * d + dd.abs().ln()
}

/// Shape and rate of each ρ_j posterior:
/// `G((n0 + p)/2, n0 (γ_j + Σ_{k>j} γ_k β_kj²) + 1/a0²)`.
pub fn rho_posterior_params(factor: &LdlFactor, n0: f64, a0: f64) -> Vec<(f64, f64)> {
    let p = factor.dim();
    let shape = 0.5 * (n0 + p as f64);
    factor
        .precision_diagonal()
        .iter()
        .map(|s| (shape, n0 * s + 1.0 / (a0 * a0)))
        .collect()
}

pub fn huang_wand_rho_update<R: Rng + ?Sized>(factor: &LdlFactor, n0: f64, a0: f64, rng: &mut R) -> DVector<f64> {
    let params = rho_posterior_params(factor, n0, a0);
    DVector::from_iterator(params.len(), params.into_iter().map(|(a, b)| gamma_rate(rng, a, b)))
}

/// Shape and rate of `d_ψj | ψ̱_j, γ_j ~ G(3/4, 1/4 + 2 γ_j ψ̱_j² / π²)`.
pub fn skewness_hyper_params(gamma: &DVector<f64>, psi_u: &DVector<f64>) -> Vec<(f64, f64)> {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    gamma
        .iter()
        .zip(psi_u.iter())
        .map(|(g, s)| (0.75, 0.25 + 2.0 * g * s * s / pi2))
        .collect()
}

pub fn skewness_hyper_update<R: Rng + ?Sized>(gamma: &DVector<f64>, psi_u: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let params = skewness_hyper_params(gamma, psi_u);
    DVector::from_iterator(params.len(), params.into_iter().map(|(a, b)| gamma_rate(rng, a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_rate_hand_case() {
        let mut beta = DMatrix::zeros(2, 2);
        beta[(1, 0)] = 0.5;
        let f = LdlFactor::new(beta, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let params = rho_posterior_params(&f, 2.0, 10.0);
        assert!((params[0].0 - 2.0).abs() < 1e-15);
        assert!((params[0].1 - 3.01).abs() < 1e-14);
        assert!((params[1].1 - (2.0 * 2.0 + 0.01)).abs() < 1e-14);
    }

    #[test]
    fn skewness_rate_plug_in() {
        let g = DVector::from_element(1, 1.0);
        let s = DVector::from_element(1, std::f64::consts::FRAC_PI_2);
        let (a, b) = skewness_hyper_params(&g, &s)[0];
        assert_eq!(a, 0.75);
        assert!((b - 0.75).abs() < 1e-15);
        let (_, b0) = skewness_hyper_params(&g, &DVector::zeros(1))[0];
        assert_eq!(b0, 0.25);
    }

    #[test]
    fn e_matrix_layout() {
        let p = 3;
        let q = 2;
        let rho = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a_w = DMatrix::from_diagonal(&(&rho * 4.0));
        let e = build_e(&DMatrix::zeros(q, q), &DMatrix::zeros(p, q), &a_w, std::f64::consts::PI.powi(2) / 4.0, 3, true)
            .unwrap();
        assert_eq!(e.nrows(), q + 1 + 3);
        assert!((e[(2, 2)] - 1.0).abs() < 1e-15);
        assert_eq!(e[(3, 3)], 4.0);
        assert_eq!(e[(5, 5)], 12.0);
        assert_eq!(e[(0, 0)], 0.0);
        let e1 = build_e(&DMatrix::zeros(q, q), &DMatrix::zeros(p, q), &a_w, 1.0, 1, false).unwrap();
        assert_eq!(e1.nrows(), q + 1);
        assert_eq!(e1[(2, 2)], 4.0);
    }

    #[test]
    fn pc_distance_vanishes_at_normal_limit() {
        assert!(pc_prior_distance(1e6, 1).unwrap() < 1e-2);
        assert!(pc_prior_distance(2.0, 1).is_err());
    }

    #[test]
    fn pc_lambda_gives_median() {
        let lam = pc_lambda_for_median(10.0, 3).unwrap();
        let m = pc_prior_mass(2.0, 10.0, lam, 3).unwrap();
        assert!((m - 0.5).abs() < 1e-14);
    }
}
