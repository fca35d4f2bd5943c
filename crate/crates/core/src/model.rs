//! Model layout and per-draw parameter values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{ldl_reconstruct, untransform_coefficients, LdlFactor};
use crate::distributions::Dof;
use crate::error::{Error, Result};

/// Error law of the repeated measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    N,
    T,
    Sn,
    St,
}

impl Variant {
    /// Carries the positive latent `W` and a skewness coefficient.
    pub fn has_skew(self) -> bool {
        matches!(self, Variant::Sn | Variant::St)
    }

    /// Carries the gamma mixing weight `d` and a finite ν.
    pub fn has_mixing(self) -> bool {
        matches!(self, Variant::T | Variant::St)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::N => "n",
            Variant::T => "t",
            Variant::Sn => "sn",
            Variant::St => "st",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "normal" => Ok(Variant::N),
            "t" => Ok(Variant::T),
            "sn" => Ok(Variant::Sn),
            "st" => Ok(Variant::St),
            other => Err(Error::Spec(format!("unknown model variant '{other}'"))),
        }
    }
}

/// Declarative model: error law, visits, and the split of covariates into
/// visit-specific effects (X) and constant effects of time-varying
/// covariates (Z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub p: usize,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub intercept: bool,
    /// Name of the 0/1 treatment covariate; must be the last X covariate.
    pub treatment: Option<String>,
}

impl ModelSpec {
    pub fn q(&self) -> usize {
        self.x_names.len()
    }

    pub fn r(&self) -> usize {
        self.z_names.len()
    }

    /// Number of mean coefficients per visit, counting the skewness slot.
    pub fn q_slots(&self) -> usize {
        self.q() + usize::from(self.variant.has_skew())
    }

    pub fn treatment_slot(&self) -> Option<usize> {
        self.treatment.as_ref().map(|_| self.q() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Spec("at least one visit is required".into()));
        }
        for z in &self.z_names {
            if self.x_names.contains(z) {
                return Err(Error::Spec(format!("covariate '{z}' is in both X and Z")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in self.x_names.iter().chain(&self.z_names) {
            if !seen.insert(name) {
                return Err(Error::Spec(format!("covariate '{name}' listed twice")));
            }
        }
        if self.intercept && self.x_names.first().map(String::as_str) != Some(INTERCEPT) {
            return Err(Error::Spec("the intercept must be the first X covariate".into()));
        }
        if let Some(t) = &self.treatment {
            if self.x_names.last() != Some(t) {
                return Err(Error::Spec(format!("treatment '{t}' must be the last X covariate")));
            }
        }
        Ok(())
    }

    /// Requires the treatment slot used by the control-based strategies.
    pub fn require_treatment(&self) -> Result<usize> {
        self.treatment_slot()
            .ok_or_else(|| Error::Spec("strategy needs a treatment covariate in X".into()))
    }
}

pub const INTERCEPT: &str = "(intercept)";

/// Moves X covariate `name` into Z as `p` visit-specific columns
/// `name@v1 .. name@vp`; the matching data transform is
/// [`crate::data::PatternedDataset::expand_x_to_z`].
pub fn x_to_z_expand(spec: &ModelSpec, name: &str) -> Result<ModelSpec> {
    let pos = spec
        .x_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Spec(format!("covariate '{name}' is not in X")))?;
    let mut out = spec.clone();
    out.x_names.remove(pos);
    if pos == 0 && spec.intercept {
        out.intercept = false;
    }
    if spec.treatment.as_deref() == Some(name) {
        out.treatment = None;
    }
    for j in 1..=spec.p {
        out.z_names.push(expanded_name(name, j));
    }
    Ok(out)
}

pub fn expanded_name(name: &str, visit: usize) -> String {
    format!("{name}@v{visit}")
}

/// One value of the parameters in sequential-regression form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub factor: LdlFactor,
    /// α̲, visits by X covariates.
    pub alpha_u: DMatrix<f64>,
    /// ψ̲; all zero for the symmetric variants.
    pub psi_u: DVector<f64>,
    pub eta: DVector<f64>,
    pub nu: Dof,
}

impl ModelParams {
    pub fn p(&self) -> usize {
        self.factor.dim()
    }

    /// θ_j (0-based `j`): `(α̲_1j..α̲_qj, [ψ̲_j], β_j1..β_j,j−1)`.
    pub fn theta(&self, j: usize, skew: bool) -> DVector<f64> {
        let q = self.alpha_u.ncols();
        let qv = q + usize::from(skew);
        let mut th = DVector::zeros(qv + j);
        for k in 0..q {
            th[k] = self.alpha_u[(j, k)];
        }
        if skew {
            th[q] = self.psi_u[j];
        }
        for t in 0..j {
            th[qv + t] = self.factor.beta[(j, t)];
        }
        th
    }

    pub fn set_theta(&mut self, j: usize, theta: &DVector<f64>, skew: bool) {
        let q = self.alpha_u.ncols();
        let qv = q + usize::from(skew);
        for k in 0..q {
            self.alpha_u[(j, k)] = theta[k];
        }
        if skew {
            self.psi_u[j] = theta[q];
        }
        for t in 0..j {
            self.factor.beta[(j, t)] = theta[qv + t];
        }
    }

    /// μ̲_j = Σ_k α̲_kj x_k for one covariate row.
    pub fn mean_u(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.alpha_u * x
    }

    /// Σ = L Λ L'.
    pub fn sigma(&self) -> Result<DMatrix<f64>> {
        ldl_reconstruct(&self.factor)
    }

    /// Full-scale (α, ψ).
    pub fn full_coefficients(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        untransform_coefficients(&self.alpha_u, &self.psi_u, &self.factor)
    }

    /// Visit-wise effect of covariate `k` on the full scale.
    pub fn full_effect(&self, k: usize) -> DVector<f64> {
        self.factor.apply_l(&self.alpha_u.column(k).into_owned())
    }
}
