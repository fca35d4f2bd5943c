//! Skew-normal and skew-t families, their symmetric special cases, and the
//! samplers built on the convolution representation
//! `y = μ + ψ W + ε / √d`.

mod gig;
mod sampling;
mod truncated;

pub use gig::{sample_gig, sample_gig_form};
pub use sampling::{gamma_rate, sample_st, sample_st_uni, standard_normal};
pub use truncated::{sample_truncated, truncated_cdf, TruncatedSpec};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{
    ln_gamma_ratio, norm_cdf, norm_logcdf, t_cdf, t_logcdf, FRAC_1_SQRT_2PI, LN_2PI,
};

/// Degrees of freedom of the mixing variable. `Infinite` gives the normal
/// and skew-normal members exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dof {
    Finite(f64),
    Infinite,
}

impl Dof {
    pub fn is_infinite(self) -> bool {
        matches!(self, Dof::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Dof::Finite(v) => Some(v),
            Dof::Infinite => None,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Dof::Finite(v) if !(v > 0.0) || !v.is_finite() => {
                Err(invalid(format!("degrees of freedom must be positive, got {v}")))
            }
            _ => Ok(()),
        }
    }
}

/// Univariate ST(μ, σ², ψ, ν).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTUni {
    pub mu: f64,
    pub sigma2: f64,
    pub psi: f64,
    pub nu: Dof,
}

impl SkewTUni {
    pub fn new(mu: f64, sigma2: f64, psi: f64, nu: Dof) -> Result<Self> {
        let s = Self { mu, sigma2, psi, nu };
        s.validate()?;
        Ok(s)
    }

    pub fn sn(mu: f64, sigma2: f64, psi: f64) -> Result<Self> {
        Self::new(mu, sigma2, psi, Dof::Infinite)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !self.mu.is_finite() || !self.psi.is_finite() {
            return Err(invalid("location and skewness must be finite"));
        }
        self.nu.validate()
    }

    /// ω² = σ² + ψ².
    pub fn omega2(&self) -> f64 {
        self.sigma2 + self.psi * self.psi
    }

    /// λ = ψ / σ.
    pub fn lambda(&self) -> f64 {
        self.psi / self.sigma2.sqrt()
    }

    /// E(y); requires ν > 1 for the skew-t.
    pub fn mean(&self) -> f64 {
        match self.nu {
            Dof::Infinite => self.mu + self.psi * (2.0 / std::f64::consts::PI).sqrt(),
            Dof::Finite(nu) => {
                let ratio = (-ln_gamma_ratio(0.5 * (nu - 1.0), 0.5)).exp();
                self.mu + self.psi * (nu / std::f64::consts::PI).sqrt() * ratio
            }
        }
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(invalid(format!("density argument must be finite, got {x}")));
        }
        self.validate()?;
        let omega2 = self.omega2();
        let omega = omega2.sqrt();
        let z = (x - self.mu) / omega;
        let lam = self.lambda();
        Ok(match self.nu {
            Dof::Infinite => {
                std::f64::consts::LN_2 - 0.5 * z * z - 0.5 * (LN_2PI + omega2.ln())
                    + norm_logcdf(lam * z)
            }
            Dof::Finite(nu) => {
                let log_t = ln_gamma_ratio(0.5 * nu, 0.5)
                    - 0.5 * (nu * std::f64::consts::PI * omega2).ln()
                    - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p();
                let arg = lam * z * ((nu + 1.0) / (nu + z * z)).sqrt();
                std::f64::consts::LN_2 + log_t + t_logcdf(arg, nu + 1.0)
            }
        })
    }
}

/// Density of the univariate skew-t; the `Infinite` sentinel gives the
/// skew-normal.
pub fn pdf_st_uni(x: f64, params: &SkewTUni) -> Result<f64> {
    Ok(params.log_pdf(x)?.exp())
}

/// Density of the univariate skew-normal `2 N(x | μ, ω²) Φ(λ (x − μ)/ω)`.
pub fn pdf_sn_uni(x: f64, params: &SkewTUni) -> Result<f64> {
    if !params.nu.is_infinite() {
        return Err(invalid("skew-normal density requires the infinite-df sentinel"));
    }
    if !x.is_finite() {
        return Err(invalid(format!("density argument must be finite, got {x}")));
    }
    params.validate()?;
    let omega = params.omega2().sqrt();
    let z = (x - params.mu) / omega;
    Ok(2.0 * FRAC_1_SQRT_2PI / omega * (-0.5 * z * z).exp() * norm_cdf(params.lambda() * z))
}

/// Multivariate ST(μ, Σ, ψ, ν).
#[derive(Debug, Clone, PartialEq)]
pub struct SkewTMulti {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub psi: DVector<f64>,
    pub nu: Dof,
}

impl SkewTMulti {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, psi: DVector<f64>, nu: Dof) -> Result<Self> {
        let p = mu.len();
        if p == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: sigma.nrows() });
        }
        if psi.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: psi.len() });
        }
        nu.validate()?;
        if sigma.clone().cholesky().is_none() {
            return Err(invalid("scale matrix is not positive definite"));
        }
        Ok(Self { mu, sigma, psi, nu })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Ω = Σ + ψψ'.
    pub fn omega(&self) -> DMatrix<f64> {
        &self.sigma + &self.psi * self.psi.transpose()
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        let p = self.dim();
        if x.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("density argument must be finite"));
        }
        let chol = self
            .omega()
            .cholesky()
            .ok_or_else(|| invalid("Omega is singular"))?;
        let dev = x - &self.mu;
        let q = dev.dot(&chol.solve(&dev));
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let lam = lambda_star(&self.sigma, &self.psi)?;
        let skew_arg = lam.dot(&dev);
        Ok(log_density_from_parts(p, q, log_det, skew_arg, self.nu))
    }
}

/// Log density of the multivariate skew family given the Mahalanobis form
/// `q = (y−μ)'Ω⁻¹(y−μ)`, `log |Ω|`, and `λ*'(y−μ)`.
pub(crate) fn log_density_from_parts(p: usize, q: f64, log_det: f64, skew_arg: f64, nu: Dof) -> f64 {
    let pf = p as f64;
    match nu {
        Dof::Infinite => {
            std::f64::consts::LN_2 - 0.5 * (pf * LN_2PI + log_det + q) + norm_logcdf(skew_arg)
        }
        Dof::Finite(nu) => {
            let log_t = ln_gamma_ratio(0.5 * nu, 0.5 * pf)
                - 0.5 * pf * (nu * std::f64::consts::PI).ln()
                - 0.5 * log_det
                - 0.5 * (nu + pf) * (q / nu).ln_1p();
            let arg = skew_arg * ((nu + pf) / (nu + q)).sqrt();
            std::f64::consts::LN_2 + log_t + t_logcdf(arg, nu + pf)
        }
    }
}

pub fn pdf_st_multi(x: &DVector<f64>, params: &SkewTMulti) -> Result<f64> {
    Ok(params.log_pdf(x)?.exp())
}

pub fn pdf_sn_multi(x: &DVector<f64>, params: &SkewTMulti) -> Result<f64> {
    if !params.nu.is_infinite() {
        return Err(invalid("skew-normal density requires the infinite-df sentinel"));
    }
    pdf_st_multi(x, params)
}

/// λ* = Σ⁻¹ψ / √(1 + ψ'Σ⁻¹ψ).
pub fn lambda_star(sigma: &DMatrix<f64>, psi: &DVector<f64>) -> Result<DVector<f64>> {
    if sigma.nrows() != psi.len() || sigma.ncols() != psi.len() {
        return Err(Error::DimensionMismatch { expected: psi.len(), got: sigma.nrows() });
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("Sigma is singular"))?;
    let s_inv_psi = chol.solve(psi);
    let denom = (1.0 + psi.dot(&s_inv_psi)).sqrt();
    Ok(s_inv_psi / denom)
}

/// λ* = Ω⁻¹ψ / √(1 − ψ'Ω⁻¹ψ), the equivalent form through Ω = Σ + ψψ'.
pub fn lambda_star_via_omega(sigma: &DMatrix<f64>, psi: &DVector<f64>) -> Result<DVector<f64>> {
    if sigma.nrows() != psi.len() || sigma.ncols() != psi.len() {
        return Err(Error::DimensionMismatch { expected: psi.len(), got: sigma.nrows() });
    }
    let omega = sigma + psi * psi.transpose();
    let chol = omega.cholesky().ok_or_else(|| invalid("Omega is singular"))?;
    let o_inv_psi = chol.solve(psi);
    let rad = 1.0 - psi.dot(&o_inv_psi);
    if !(rad > 0.0) {
        return Err(invalid("1 - psi' Omega^-1 psi is not positive"));
    }
    Ok(o_inv_psi / rad.sqrt())
}

/// Student-t CDF with the normal as the `Infinite` case.
pub fn dof_cdf(x: f64, nu: Dof) -> f64 {
    match nu {
        Dof::Infinite => norm_cdf(x),
        Dof::Finite(v) => t_cdf(x, v),
    }
}
