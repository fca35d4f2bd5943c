//! Generalized inverse Gaussian draws (Hörmann & Leydold 2014): ratio of
//! uniforms with or without mode shift, and the three-piece hat for small
//! `p` and `β`.

use rand::Rng;

use super::sampling::gamma_rate;
use crate::error::{invalid, Result};

fn log_quasi(x: f64, p: f64, b: f64) -> f64 {
    if x > 0.0 {
        (p - 1.0) * x.ln() - 0.5 * b * (x + 1.0 / x)
    } else {
        f64::NEG_INFINITY
    }
}

fn mode(p: f64, b: f64) -> f64 {
    if p < 1.0 {
        b / (((p - 1.0) * (p - 1.0) + b * b).sqrt() + 1.0 - p)
    } else {
        (((1.0 - p) * (1.0 - p) + b * b).sqrt() - (1.0 - p)) / b
    }
}

/// Draw from the density ∝ x^{p−1} exp(−β(x + 1/x)/2), `β > 0`.
pub fn sample_gig<R: Rng + ?Sized>(p: f64, beta: f64, rng: &mut R) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() || !p.is_finite() {
        return Err(invalid(format!("GIG parameters p={p}, beta={beta}")));
    }
    let (p, invert) = if p < 0.0 { (-p, true) } else { (p, false) };
    let b = beta;
    let m = mode(p, b);
    let x = if p >= 1.0 || b > 1.0 {
        // ratio of uniforms with mode shift
        let a2 = -2.0 * (p + 1.0) / b - m;
        let a1 = 2.0 * m * (p - 1.0) / b - 1.0;
        let p1 = a1 - a2 * a2 / 3.0;
        let q1 = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + m;
        let phi = (-q1 * (-27.0 / p1.powi(3)).sqrt() / 2.0).clamp(-1.0, 1.0).acos();
        let s1 = -(-4.0 * p1 / 3.0).sqrt();
        let root1 = s1 * (phi / 3.0 + std::f64::consts::PI / 3.0).cos() - a2 / 3.0;
        let root2 = -s1 * (phi / 3.0).cos() - a2 / 3.0;
        let lm = log_quasi(m, p, b);
        let vmin = (root1 - m) * (0.5 * (log_quasi(root1, p, b) - lm)).exp();
        let vmax = (root2 - m) * (0.5 * (log_quasi(root2, p, b) - lm)).exp();
        ratio_of_uniforms(rng, 1.0, vmin, vmax, m, |x| log_quasi(x, p, b) - lm)?
    } else if b >= f64::min(0.5, 2.0 * (1.0 - p).sqrt() / 3.0) {
        // ratio of uniforms without mode shift
        let umax = (0.5 * log_quasi(m, p, b)).exp();
        let xplus = ((1.0 + p) + ((1.0 + p) * (1.0 + p) + b * b).sqrt()) / b;
        let vmax = (xplus.ln() + 0.5 * log_quasi(xplus, p, b)).exp();
        ratio_of_uniforms(rng, umax, 0.0, vmax, 0.0, |x| log_quasi(x, p, b))?
    } else {
        three_piece_hat(rng, p, b)
    };
    Ok(if invert { 1.0 / x } else { x })
}

fn ratio_of_uniforms<R: Rng + ?Sized>(
    rng: &mut R,
    umax: f64,
    vmin: f64,
    vmax: f64,
    shift: f64,
    log_target: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(vmin < vmax) || !(umax > 0.0) {
        return Err(invalid("GIG bounding rectangle is degenerate"));
    }
    loop {
        let u = umax * rng.random::<f64>();
        let v = vmin + (vmax - vmin) * rng.random::<f64>();
        let x = v / u + shift;
        if 2.0 * u.ln() <= log_target(x) {
            return Ok(x);
        }
    }
}

fn three_piece_hat<R: Rng + ?Sized>(rng: &mut R, p: f64, b: f64) -> f64 {
    let m = mode(p, b);
    let x0 = b / (1.0 - p);
    let xs = x0.max(2.0 / b);
    let k1 = log_quasi(m, p, b).exp();
    let a1 = k1 * x0;
    let (k2, a2) = if x0 < 2.0 / b {
        let k2 = (-b).exp();
        let a2 = if p > 0.0 {
            k2 * ((2.0 / b).powf(p) - x0.powf(p)) / p
        } else {
            k2 * (2.0 / (b * b)).ln()
        };
        (k2, a2)
    } else {
        (0.0, 0.0)
    };
    let k3 = xs.powf(p - 1.0);
    let a3 = 2.0 * k3 * (-xs * b / 2.0).exp() / b;
    let total = a1 + a2 + a3;
    loop {
        let u: f64 = rng.random();
        let v = total * rng.random::<f64>();
        let (x, h) = if v <= a1 {
            (x0 * v / a1, k1)
        } else if v <= a1 + a2 {
            let x = if p > 0.0 {
                (x0.powf(p) + (v - a1) * p / k2).powf(1.0 / p)
            } else {
                b * ((v - a1) * b.exp()).exp()
            };
            (x, k2 * x.powf(p - 1.0))
        } else {
            let z = (-xs * b / 2.0).exp() - b * (v - a1 - a2) / (2.0 * k3);
            let x = -2.0 / b * z.ln();
            (x, k3 * (-x * b / 2.0).exp())
        };
        if (u * h).ln() <= log_quasi(x, p, b) {
            return x;
        }
    }
}

/// Draw from the density ∝ x^{a−1} exp(−b·x − c/x) on (0, ∞), `b > 0`,
/// `c ≥ 0`. With `c = 0` this is G(a, b).
pub fn sample_gig_form<R: Rng + ?Sized>(a: f64, b: f64, c: f64, rng: &mut R) -> Result<f64> {
    if !(b > 0.0) || !(c >= 0.0) || !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(invalid(format!("GIG-form parameters a={a}, b={b}, c={c}")));
    }
    if c == 0.0 {
        if !(a > 0.0) {
            return Err(invalid(format!("improper gamma limit with shape {a}")));
        }
        return Ok(gamma_rate(rng, a, b));
    }
    let scale = (c / b).sqrt();
    let beta = 2.0 * (b * c).sqrt();
    Ok(scale * sample_gig(a, beta, rng)?)
}
