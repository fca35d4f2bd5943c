use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::conditional::observed_loglik;
use crate::covariance::LdlFactor;
use crate::data::PatternedDataset;
use crate::distributions::Dof;
use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::DrawStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dic {
    pub dic: f64,
    pub p_d: f64,
    /// Mean deviance over draws.
    pub d_bar: f64,
    /// Deviance at the posterior-mean parameters.
    pub d_hat: f64,
}

/// `−2 Σ log f(y_io)` over subjects with at least one observation.
pub fn deviance(data: &PatternedDataset, params: &ModelParams) -> Result<f64> {
    let mut ll = 0.0;
    for subj in &data.subjects {
        if subj.dropout() == 0 {
            break;
        }
        let off = subj.z_offset(&params.eta);
        let y: Vec<Option<f64>> = subj.y.iter().enumerate().map(|(j, v)| v.map(|v| v - off[j])).collect();
        let mu = params.mean_u(&subj.x);
        ll += observed_loglik(&y, mu.as_slice(), &params.factor, params.psi_u.as_slice(), params.nu)?;
    }
    Ok(-2.0 * ll)
}

/// Draw-wise mean of the sequential parameters, ν on its raw scale
/// (infinite if any draw has the infinite sentinel).
pub fn mean_params(store: &DrawStore) -> Result<ModelParams> {
    let first = &store.draws.first().ok_or(Error::InsufficientDraws { needed: 1, have: 0 })?.params;
    let m = store.len() as f64;
    let p = first.p();
    let mut beta = DMatrix::zeros(p, p);
    let mut gamma = DVector::zeros(p);
    let mut alpha = DMatrix::zeros(first.alpha_u.nrows(), first.alpha_u.ncols());
    let mut psi = DVector::zeros(p);
    let mut eta = DVector::zeros(first.eta.len());
    let mut nu = 0.0;
    let mut infinite = false;
    for d in &store.draws {
        let pr = &d.params;
        beta += &pr.factor.beta;
        gamma += &pr.factor.gamma;
        alpha += &pr.alpha_u;
        psi += &pr.psi_u;
        eta += &pr.eta;
        match pr.nu {
            Dof::Finite(v) => nu += v,
            Dof::Infinite => infinite = true,
        }
    }
    Ok(ModelParams {
        factor: LdlFactor::new(beta / m, gamma / m)?,
        alpha_u: alpha / m,
        psi_u: psi / m,
        eta: eta / m,
        nu: if infinite { Dof::Infinite } else { Dof::Finite(nu / m) },
    })
}

/// `DIC = 2 D̄ − D(θ̄)`, `pD = D̄ − D(θ̄)`.
pub fn compute_dic(store: &DrawStore, data: &PatternedDataset) -> Result<Dic> {
    if store.len() < 2 {
        return Err(Error::InsufficientDraws { needed: 2, have: store.len() });
    }
    let d_bar = store.draws.iter().map(|d| d.deviance).sum::<f64>() / store.len() as f64;
    let d_hat = deviance(data, &mean_params(store)?)?;
    Ok(Dic { dic: 2.0 * d_bar - d_hat, p_d: d_bar - d_hat, d_bar, d_hat })
}
