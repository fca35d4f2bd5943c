//! Normal and Student-t laws left-truncated at `lower`.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::sampling::{gamma_rate, standard_normal};
use super::Dof;
use crate::special::{norm_quantile, norm_sf, t_isf, t_sf};

/// Standardized bound beyond which the exponential-proposal sampler is used.
const ROBERT_SWITCH: f64 = 3.0;
/// Below this truncated mass the t draw switches from compounding to
/// inversion.
const COMPOUND_MIN_MASS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedSpec {
    pub location: f64,
    pub scale2: f64,
    pub nu: Dof,
    pub lower: f64,
}

impl TruncatedSpec {
    /// N⁺(location, scale2): normal truncated to (0, ∞).
    pub fn positive_normal(location: f64, scale2: f64) -> Self {
        Self { location, scale2, nu: Dof::Infinite, lower: 0.0 }
    }

    /// t⁺(location, scale2, ν): Student-t truncated to (0, ∞).
    pub fn positive_t(location: f64, scale2: f64, nu: f64) -> Self {
        Self { location, scale2, nu: Dof::Finite(nu), lower: 0.0 }
    }

    fn standardized_bound(&self) -> f64 {
        (self.lower - self.location) / self.scale2.sqrt()
    }
}

fn survival(z: f64, nu: Dof) -> f64 {
    match nu {
        Dof::Infinite => norm_sf(z),
        Dof::Finite(v) => t_sf(z, v),
    }
}

/// CDF of the truncated law.
pub fn truncated_cdf(x: f64, spec: &TruncatedSpec) -> f64 {
    if x <= spec.lower {
        return 0.0;
    }
    let sd = spec.scale2.sqrt();
    let z0 = spec.standardized_bound();
    let z = (x - spec.location) / sd;
    let s0 = survival(z0, spec.nu);
    ((s0 - survival(z, spec.nu)) / s0).clamp(0.0, 1.0)
}

/// Standard normal truncated to (a, ∞).
pub(crate) fn std_normal_above<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= ROBERT_SWITCH {
        let tail = norm_sf(a);
        loop {
            let u: f64 = rng.random();
            let z = -norm_quantile(u * tail);
            if z > a && z.is_finite() {
                return z;
            }
        }
    } else {
        let rate = 0.5 * (a + (a * a + 4.0).sqrt());
        let exp = Exp::new(rate).expect("positive rate");
        loop {
            let z = a + exp.sample(rng);
            let u: f64 = rng.random();
            if u.ln() <= -0.5 * (z - rate) * (z - rate) {
                return z;
            }
        }
    }
}

/// Draw from the truncated law. The t case compounds a gamma mixing draw
/// with a truncated normal; the mixing draw is accepted with probability
/// `Φ((μ − lower)√d/σ)` so that the compound is exactly the truncated t.
pub fn sample_truncated<R: Rng + ?Sized>(spec: &TruncatedSpec, rng: &mut R) -> f64 {
    let sd = spec.scale2.sqrt();
    let z0 = spec.standardized_bound();
    match spec.nu {
        Dof::Infinite => spec.location + sd * std_normal_above(z0, rng),
        Dof::Finite(nu) => {
            let mass = t_sf(z0, nu);
            if mass >= COMPOUND_MIN_MASS {
                // Joint rejection on (d, z): accepting z > z0·√d keeps d with
                // probability Φ(−z0·√d), which is the truncated-t mixing law.
                loop {
                    let d = gamma_rate(rng, 0.5 * nu, 0.5 * nu);
                    let z = standard_normal(rng);
                    if z > z0 * d.sqrt() {
                        return spec.location + sd * z / d.sqrt();
                    }
                }
            } else {
                loop {
                    let u: f64 = rng.random();
                    let q = u * mass;
                    if q <= 0.0 {
                        continue;
                    }
                    let z = t_isf(q, nu);
                    let x = spec.location + sd * z;
                    if x > spec.lower && x.is_finite() {
                        return x;
                    }
                }
            }
        }
    }
}
