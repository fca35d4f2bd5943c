use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{Dof, SkewTMulti, SkewTUni, TruncatedSpec};
use crate::error::Result;

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from G(shape, rate) with density ∝ x^{shape−1} e^{−rate·x}.
pub fn gamma_rate<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0, "gamma({shape}, {rate})");
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters validated by caller")
        .sample(rng)
}

/// Mixing draw d ~ G(ν/2, ν/2), or 1 for the infinite sentinel.
pub(crate) fn mixing_draw<R: Rng + ?Sized>(rng: &mut R, nu: Dof) -> f64 {
    match nu {
        Dof::Infinite => 1.0,
        Dof::Finite(v) => gamma_rate(rng, 0.5 * v, 0.5 * v),
    }
}

/// Convolution draw `y = μ + ψ W*/√d + ε/√d`, `ε ~ N(0, Σ)`.
pub fn sample_st<R: Rng + ?Sized>(params: &SkewTMulti, rng: &mut R) -> Result<DVector<f64>> {
    let chol = params
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| crate::error::invalid("Sigma is not positive definite"))?;
    let d = mixing_draw(rng, params.nu);
    let w_star = super::sample_truncated(&TruncatedSpec::positive_normal(0.0, 1.0), rng);
    let scale = 1.0 / d.sqrt();
    let z = DVector::from_fn(params.dim(), |_, _| standard_normal(rng));
    let eps = chol.l() * z;
    Ok(&params.mu + &params.psi * (w_star * scale) + eps * scale)
}

pub fn sample_st_uni<R: Rng + ?Sized>(params: &SkewTUni, rng: &mut R) -> f64 {
    let d = mixing_draw(rng, params.nu);
    let w_star = super::sample_truncated(&TruncatedSpec::positive_normal(0.0, 1.0), rng);
    let e: f64 = standard_normal(rng);
    params.mu + (params.psi * w_star + params.sigma2.sqrt() * e) / d.sqrt()
}
