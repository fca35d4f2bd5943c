//! Brute-force conditional law of `(W, d, y_{s+1..p})` given a prefix, by
//! sampling the full joint and keeping draws whose prefix falls in a small
//! box around the target.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::distributions::{gamma_rate, standard_normal, Dof};
use crate::error::{invalid, Error, Result};

/// A mean with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_sums(sum: f64, sum2: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum2 / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
        Self { mean, se: (var / nf).sqrt() }
    }

    /// `|a − b|` in units of the combined standard error.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = (self.se * self.se + other.se * other.se).sqrt();
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / se
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub w: Estimate,
    pub d: Estimate,
    pub suffix: Vec<Estimate>,
    pub accepted: usize,
    pub tried: usize,
}

/// Full-scale skew-t joint: `y = μ + ψ W + ε/√d`, `W | d ~ N⁺(0, 1/d)`,
/// `ε ~ N(0, Σ)`, `d ~ G(ν/2, ν/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub psi: DVector<f64>,
    pub nu: Dof,
    chol: DMatrix<f64>,
}

impl JointLaw {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, psi: DVector<f64>, nu: Dof) -> Result<Self> {
        let chol = sigma.clone().cholesky().ok_or_else(|| invalid("sigma is not positive definite"))?.l();
        Ok(Self { mu, sigma, psi, nu, chol })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// One draw of `(W, d, y)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, DVector<f64>) {
        let d = match self.nu {
            Dof::Finite(nu) => gamma_rate(rng, 0.5 * nu, 0.5 * nu),
            Dof::Infinite => 1.0,
        };
        let w = standard_normal(rng).abs() / d.sqrt();
        let z = DVector::from_fn(self.dim(), |_, _| standard_normal(rng));
        let y = &self.mu + &self.psi * w + &self.chol * z / d.sqrt();
        (w, d, y)
    }
}

/// Marginal standard deviations estimated from `n` joint draws.
pub fn marginal_sd<R: Rng + ?Sized>(law: &JointLaw, n: usize, rng: &mut R) -> Vec<f64> {
    let p = law.dim();
    let mut sum = vec![0.0; p];
    let mut sum2 = vec![0.0; p];
    for _ in 0..n {
        let (_, _, y) = law.draw(rng);
        for j in 0..p {
            sum[j] += y[j];
            sum2[j] += y[j] * y[j];
        }
    }
    (0..p)
        .map(|j| {
            let m = sum[j] / n as f64;
            (sum2[j] / n as f64 - m * m).max(0.0).sqrt()
        })
        .collect()
}

/// Keeps joint draws with `|y_j − prefix_j| ≤ half_width_j` for every
/// prefix coordinate, until `n_target` are accepted or `max_tries` draws
/// are spent. An acceptance rate below 1e-6 is reported as infeasible.
pub fn rejection_conditional_oracle<R: Rng + ?Sized>(
    law: &JointLaw,
    prefix: &[f64],
    half_width: &[f64],
    n_target: usize,
    max_tries: usize,
    rng: &mut R,
) -> Result<ConditionalMoments> {
    let p = law.dim();
    let s = prefix.len();
    if s > p || half_width.len() != s {
        return Err(Error::DimensionMismatch { expected: s, got: half_width.len() });
    }
    if half_width.iter().any(|h| !(*h > 0.0)) {
        return Err(invalid("ball half-widths must be positive"));
    }
    let m = p - s;
    let (mut sw, mut sw2, mut sd, mut sd2) = (0.0, 0.0, 0.0, 0.0);
    let mut sy = vec![0.0; m];
    let mut sy2 = vec![0.0; m];
    let mut accepted = 0;
    let mut tried = 0;
    while accepted < n_target && tried < max_tries {
        tried += 1;
        let (w, d, y) = law.draw(rng);
        if (0..s).any(|j| (y[j] - prefix[j]).abs() > half_width[j]) {
            continue;
        }
        accepted += 1;
        sw += w;
        sw2 += w * w;
        sd += d;
        sd2 += d * d;
        for k in 0..m {
            let v = y[s + k];
            sy[k] += v;
            sy2[k] += v * v;
        }
        if tried >= 1_000_000 && (accepted as f64) < 1e-6 * tried as f64 {
            break;
        }
    }
    if accepted < 2 || (accepted as f64) < 1e-6 * tried as f64 {
        return Err(Error::Infeasible(format!("accepted {accepted} of {tried} draws")));
    }
    Ok(ConditionalMoments {
        w: Estimate::from_sums(sw, sw2, accepted),
        d: Estimate::from_sums(sd, sd2, accepted),
        suffix: (0..m).map(|k| Estimate::from_sums(sy[k], sy2[k], accepted)).collect(),
        accepted,
        tried,
    })
}

/// Runs the oracle at the given ball and at half its width; returns both so
/// callers can bound the discretization bias.
pub fn halving_check<R: Rng + ?Sized>(
    law: &JointLaw,
    prefix: &[f64],
    half_width: &[f64],
    n_target: usize,
    max_tries: usize,
    rng: &mut R,
) -> Result<(ConditionalMoments, ConditionalMoments)> {
    let full = rejection_conditional_oracle(law, prefix, half_width, n_target, max_tries, rng)?;
    let halved: Vec<f64> = half_width.iter().map(|h| 0.5 * h).collect();
    let half = rejection_conditional_oracle(law, prefix, &halved, n_target, max_tries, rng)?;
    Ok((full, half))
}
