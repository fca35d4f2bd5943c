//! Brute-force KL divergence from the standardized t to the normal.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::quadrature::integrate;
use crate::distributions::{gamma_rate, standard_normal};
use crate::error::{invalid, Result};
use crate::special::{digamma, ln_beta, ln_gamma};

fn check_nu(nu: f64) -> Result<()> {
    if nu > 2.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("numerical KL needs 2 < nu < inf, got {nu}")))
    }
}

/// Monte Carlo estimate of `KL(t(0, (ν−2)/ν Σ, ν) ‖ N(0, Σ))` with its
/// standard error, from `n_mc` draws.
pub fn numerical_kl<R: Rng + ?Sized>(nu: f64, sigma: &DMatrix<f64>, n_mc: usize, rng: &mut R) -> Result<(f64, f64)> {
    check_nu(nu)?;
    let p = sigma.nrows();
    let pf = p as f64;
    let chol = sigma.clone().cholesky().ok_or_else(|| invalid("Sigma is not positive definite"))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let s2 = (nu - 2.0) / nu;
    let log_t_const = ln_gamma(0.5 * (nu + pf)) - ln_gamma(0.5 * nu) - 0.5 * pf * (nu * std::f64::consts::PI).ln()
        - 0.5 * pf * s2.ln()
        - 0.5 * log_det;
    let log_n_const = -0.5 * pf * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
    let l = chol.l();
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..n_mc {
        let z = DVector::from_fn(p, |_, _| standard_normal(rng));
        let d = gamma_rate(rng, 0.5 * nu, 0.5 * nu);
        let x = &l * &z * (s2 / d).sqrt();
        let maha = x.dot(&chol.solve(&x));
        let log_t = log_t_const - 0.5 * (nu + pf) * (maha / (s2 * nu)).ln_1p();
        let log_n = log_n_const - 0.5 * maha;
        let v = log_t - log_n;
        sum += v;
        sum2 += v * v;
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Density of `v = ‖x‖/s` for a standard p-variate t with ν df.
fn radial_density(v: f64, nu: f64, p: usize) -> f64 {
    let pf = p as f64;
    let log_f = std::f64::consts::LN_2 + (pf - 1.0) * v.ln() - 0.5 * (nu + pf) * (v * v / nu).ln_1p()
        - 0.5 * pf * nu.ln()
        - ln_beta(0.5 * pf, 0.5 * nu);
    if v == 0.0 {
        return if p == 1 { log_f.exp() } else { 0.0 };
    }
    log_f.exp()
}

/// `(E_t[log t(x)], E_t[log φ(x)])` with `Σ = I`, by one-dimensional
/// quadrature over the radius.
pub fn kl_integral_parts(nu: f64, p: usize) -> Result<(f64, f64)> {
    check_nu(nu)?;
    let pf = p as f64;
    let s2 = (nu - 2.0) / nu;
    let c_t = ln_gamma(0.5 * (nu + pf)) - ln_gamma(0.5 * nu) - 0.5 * pf * (nu * std::f64::consts::PI).ln() - 0.5 * pf * s2.ln();
    let c_n = -0.5 * pf * (2.0 * std::f64::consts::PI).ln();
    let (e_t, _) = integrate(
        |v| {
            if v == 0.0 && p > 1 {
                return 0.0;
            }
            radial_density(v, nu, p) * (c_t - 0.5 * (nu + pf) * (v * v / nu).ln_1p())
        },
        0.0,
        f64::INFINITY,
        1e-13,
    )?;
    let (e_n, _) = integrate(
        |v| {
            if v == 0.0 && p > 1 {
                return 0.0;
            }
            radial_density(v, nu, p) * (c_n - 0.5 * s2 * v * v)
        },
        0.0,
        f64::INFINITY,
        1e-13,
    )?;
    Ok((e_t, e_n))
}

/// KL by quadrature: the difference of [`kl_integral_parts`].
pub fn quadrature_kl(nu: f64, p: usize) -> Result<f64> {
    let (a, b) = kl_integral_parts(nu, p)?;
    Ok(a - b)
}

/// Closed forms of the two integrals with `Σ = I`:
/// `E_t[log t] = lnΓ((ν+p)/2) − lnΓ(ν/2) − (ν+p)/2 [ψ((ν+p)/2) − ψ(ν/2)]
///  − p/2 log(ν−2) − p/2 log π` and `E_t[log φ] = −p/2 log(2π) − p/2`.
pub fn kl_integral_identities(nu: f64, p: usize) -> (f64, f64) {
    let pf = p as f64;
    let a = 0.5 * (nu + pf);
    let h = 0.5 * nu;
    let first = ln_gamma(a) - ln_gamma(h) - a * (digamma(a) - digamma(h))
        - 0.5 * pf * (nu - 2.0).ln()
        - 0.5 * pf * std::f64::consts::PI.ln();
    let second = -0.5 * pf * (2.0 * std::f64::consts::PI).ln() - 0.5 * pf;
    (first, second)
}
