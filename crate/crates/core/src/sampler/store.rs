use serde::Serialize;

use crate::distributions::Dof;
use crate::error::Result;
use crate::model::{ModelParams, ModelSpec, Variant};

/// Per-subject latent values at one stored iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectLatent {
    pub w: f64,
    pub d: f64,
    /// Outcomes up to the dropout visit, intermittent gaps filled.
    pub y_fill: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub params: ModelParams,
    /// Observed-data deviance `−2 Σ log f(y_io)`.
    pub deviance: f64,
    /// Indexed like the subjects with an observation in the sorted dataset.
    pub latent: Vec<SubjectLatent>,
}

/// Thinned post-burn-in draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawStore {
    pub variant: Variant,
    pub p: usize,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub draws: Vec<Draw>,
    /// Post-burn-in acceptance rate of the ν move.
    pub acceptance_rate: Option<f64>,
    /// Final (frozen) proposal SD of the ν move.
    pub mh_step: f64,
}

impl DrawStore {
    pub fn new(spec: &ModelSpec, p: usize) -> Self {
        Self {
            variant: spec.variant,
            p,
            x_names: spec.x_names.clone(),
            z_names: spec.z_names.clone(),
            draws: Vec::new(),
            acceptance_rate: None,
            mh_step: f64::NAN,
        }
    }

    pub fn push(&mut self, draw: Draw) {
        self.draws.push(draw);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// One value per draw.
    pub fn series(&self, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
        self.draws.iter().map(|d| f(&d.params)).collect()
    }

    /// Indices of `m` draws spread evenly over the store, last draw included.
    pub fn spread_indices(&self, m: usize) -> Vec<usize> {
        let n = self.len();
        if m == 0 || n == 0 {
            return Vec::new();
        }
        (1..=m).map(|b| (b * n) / m - 1).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let p = self.p;
        let q = self.x_names.len();
        let skew = self.variant.has_skew();
        let qv = q + usize::from(skew);
        let mut names = Vec::new();
        for j in 1..=p {
            for k in 1..qv + j {
                names.push(format!("theta[{j},{k}]"));
            }
        }
        names.extend((1..=p).map(|j| format!("gamma[{j}]")));
        names.extend((1..=self.z_names.len()).map(|k| format!("eta[{k}]")));
        names.push("nu".into());
        names.push("deviance".into());
        for j in 1..=p {
            for k in 1..=j {
                names.push(format!("sigma[{j},{k}]"));
            }
        }
        for j in 1..=p {
            for k in 1..=q {
                names.push(format!("alpha[{j},{k}]"));
            }
        }
        if skew {
            names.extend((1..=p).map(|j| format!("psi[{j}]")));
        }
        names
    }

    /// Values of one draw in [`Self::column_names`] order.
    pub fn row(&self, draw: &Draw) -> Result<Vec<f64>> {
        let pr = &draw.params;
        let skew = self.variant.has_skew();
        let mut row = Vec::new();
        for j in 0..self.p {
            row.extend(pr.theta(j, skew).iter());
        }
        row.extend(pr.factor.gamma.iter());
        row.extend(pr.eta.iter());
        row.push(match pr.nu {
            Dof::Finite(v) => v,
            Dof::Infinite => f64::INFINITY,
        });
        row.push(draw.deviance);
        let sigma = pr.sigma()?;
        for j in 0..self.p {
            for k in 0..=j {
                row.push(sigma[(j, k)]);
            }
        }
        let (alpha, psi) = pr.full_coefficients()?;
        for j in 0..self.p {
            row.extend(alpha.row(j).iter());
        }
        if skew {
            row.extend(psi.iter());
        }
        Ok(row)
    }

    pub fn table(&self) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let rows = self.draws.iter().map(|d| self.row(d)).collect::<Result<Vec<_>>>()?;
        Ok((self.column_names(), rows))
    }
}
