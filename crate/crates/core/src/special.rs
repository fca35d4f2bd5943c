//! Special functions used by the densities, the PC prior and the samplers.
//!
//! `erfc` and `lgamma` come from `libm`, `erfc_inv` from `statrs`. The incomplete beta
//! function, digamma and trigamma are evaluated here because the Student-t
//! CDF and the PC-prior distance need accurate differences at large
//! arguments (`ln Γ(x + a) − ln Γ(x)` for `x` in the thousands).

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

const STIRLING_SWITCH: f64 = 20.0;

/// Stirling correction `ln Γ(z) − [(z − ½) ln z − z + ½ ln 2π]` for large `z`.
fn stirling_tail(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0
                + r2 * (-1.0 / 1680.0
                    + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 / 156.0))))))
}

/// `ln Γ(x + a) − ln Γ(x)` without catastrophic cancellation for large `x`.
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    if x >= STIRLING_SWITCH && x + a >= STIRLING_SWITCH {
        (x - 0.5) * (a / x).ln_1p() + a * (x + a).ln() - a + stirling_tail(x + a)
            - stirling_tail(x)
    } else {
        ln_gamma(x + a) - ln_gamma(x)
    }
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    if a >= b {
        ln_gamma(b) - ln_gamma_ratio(a, b)
    } else {
        ln_gamma(a) - ln_gamma_ratio(b, a)
    }
}

/// Asymptotic part of ψ(z) after removing `ln z`.
fn digamma_tail(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    -0.5 * r
        - r2 * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0
                        - r2 * (1.0 / 132.0 - r2 * (691.0 / 32_760.0 - r2 / 12.0))))))
}

/// Digamma ψ(x) for `x > 0` by upward recurrence and the asymptotic series.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    let mut z = x;
    while z < STIRLING_SWITCH {
        acc -= 1.0 / z;
        z += 1.0;
    }
    acc + z.ln() + digamma_tail(z)
}

/// `ψ(x + a) − ψ(x)`, accurate when both arguments are large.
pub fn digamma_diff(x: f64, a: f64) -> f64 {
    if x >= STIRLING_SWITCH && x + a >= STIRLING_SWITCH {
        (a / x).ln_1p() + digamma_tail(x + a) - digamma_tail(x)
    } else {
        digamma(x + a) - digamma(x)
    }
}

fn trigamma_asymptotic(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r + 0.5 * r2
        + r * r2
            * (1.0 / 6.0
                - r2 * (1.0 / 30.0
                    - r2 * (1.0 / 42.0
                        - r2 * (1.0 / 30.0
                            - r2 * (5.0 / 66.0 - r2 * (691.0 / 2730.0 - r2 * 7.0 / 6.0))))))
}

/// Trigamma ψ'(x) for `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    let mut z = x;
    while z < STIRLING_SWITCH {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    acc + trigamma_asymptotic(z)
}

/// `ψ'(x + a) − ψ'(x)`.
pub fn trigamma_diff(x: f64, a: f64) -> f64 {
    trigamma(x + a) - trigamma(x)
}

/// Standard normal CDF Φ.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 − Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn norm_logpdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `ln Φ(x)`, with the Mills-ratio expansion in the far left tail.
pub fn norm_logcdf(x: f64) -> f64 {
    if x > -30.0 {
        let c = norm_cdf(x);
        if x > 0.0 {
            (-norm_sf(x)).ln_1p()
        } else {
            c.ln()
        }
    } else {
        let r = 1.0 / (x * x);
        let series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - r * 105.0)));
        norm_logpdf(x) - (-x).ln() + series.ln()
    }
}

/// Standard normal quantile Φ⁻¹(p).
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `ln I_x(a, b)` evaluated on the side where the continued fraction
/// converges directly. `y` must equal `1 − x` and is passed separately so
/// callers can avoid the cancellation in forming it.
fn ln_beta_reg_direct(a: f64, b: f64, x: f64, y: f64) -> f64 {
    a * x.ln() + b * y.ln() - ln_beta(a, b) - a.ln() + beta_cf(a, b, x).ln()
}

/// Regularized incomplete beta `I_x(a, b)` with `y = 1 − x` supplied.
pub fn beta_reg_pair(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_beta_reg_direct(a, b, x, y).exp()
    } else {
        1.0 - ln_beta_reg_direct(b, a, y, x).exp()
    }
}

pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_pair(a, b, x, 1.0 - x)
}

/// Survival function `P(T > t)` of the standard Student-t with `nu` df.
pub fn t_sf(t: f64, nu: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let t2 = t * t;
    let denom = nu + t2;
    let tail = 0.5 * beta_reg_pair(0.5 * nu, 0.5, nu / denom, t2 / denom);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// CDF `T_ν(t)` of the standard Student-t.
pub fn t_cdf(t: f64, nu: f64) -> f64 {
    t_sf(-t, nu)
}

/// `ln T_ν(t)`, accurate in the far left tail.
pub fn t_logcdf(t: f64, nu: f64) -> f64 {
    if t >= 0.0 {
        return (-t_sf(t, nu)).ln_1p();
    }
    let t2 = t * t;
    let denom = nu + t2;
    let (a, b, x, y) = (0.5 * nu, 0.5, nu / denom, t2 / denom);
    let ln_tail = if x < (a + 1.0) / (a + b + 2.0) {
        ln_beta_reg_direct(a, b, x, y)
    } else {
        (-ln_beta_reg_direct(b, a, y, x).exp()).ln_1p()
    };
    std::f64::consts::LN_2.mul_add(-1.0, ln_tail)
}

/// Log density of the standard Student-t.
pub fn t_logpdf(t: f64, nu: f64) -> f64 {
    ln_gamma_ratio(0.5 * nu, 0.5) - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
}

/// Upper-tail quantile: the `t` with `P(T > t) = q`, `0 < q < 1`.
pub fn t_isf(q: f64, nu: f64) -> f64 {
    debug_assert!(q > 0.0 && q < 1.0);
    if q > 0.5 {
        return -t_isf(1.0 - q, nu);
    }
    if q == 0.5 {
        return 0.0;
    }
    let target = q.ln();
    let f = |t: f64| t_sf(t, nu).ln() - target;
    let mut lo = 0.0;
    let mut hi = (-norm_quantile(q)).max(1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let val = f(t);
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // d/dt ln sf = -pdf/sf
        let slope = -(t_logpdf(t, nu) - t_sf(t, nu).ln()).exp();
        let mut next = t - val / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1e-300) {
            return next;
        }
        t = next;
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digamma_and_trigamma_known_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + euler).abs() < 1e-14);
        assert!((digamma(0.5) + euler + 2.0 * 2f64.ln()).abs() < 1e-14);
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-13);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-13);
        // ψ'(x) - ψ'(x+1) = 1/x²
        for &x in &[0.3, 2.5, 19.5, 20.5, 300.0] {
            assert!(((trigamma(x) - trigamma(x + 1.0)) * x * x - 1.0).abs() < 1e-11);
            assert!(((digamma(x + 1.0) - digamma(x)) * x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_ratio_matches_direct_at_moderate_arguments() {
        for &(x, a) in &[(25.0, 0.5), (40.0, 1.5), (100.0, 3.0), (21.0, 0.5)] {
            let direct = ln_gamma(x + a) - ln_gamma(x);
            assert!((ln_gamma_ratio(x, a) - direct).abs() < 1e-11, "{x} {a}");
            let psi = digamma(x + a) - digamma(x);
            assert!((digamma_diff(x, a) - psi).abs() < 1e-13);
        }
    }

    #[test]
    fn t_cdf_reference_values() {
        // Cauchy: T_1(1) = 3/4
        assert!((t_cdf(1.0, 1.0) - 0.75).abs() < 1e-14);
        // nu = 2 closed form: 1/2 + t / (2 sqrt(2 + t^2))
        for &t in &[-3.0, -0.4, 0.7, 5.0] {
            let exact = 0.5 + t / (2.0 * (2.0f64 + t * t).sqrt());
            assert!((t_cdf(t, 2.0) - exact).abs() < 1e-14);
            assert!((t_logcdf(t, 2.0) - exact.ln()).abs() < 1e-12);
        }
        // far tail log-cdf stays finite and consistent with nu = 2 closed form
        let t = -1e8;
        let exact = (2.0 / (t * t)) / 4.0;
        assert!((t_logcdf(t, 2.0) - exact.ln()).abs() < 1e-6);
    }

    #[test]
    fn t_isf_inverts_sf() {
        for &nu in &[1.0, 3.0, 7.5, 40.0] {
            for &q in &[1e-12, 1e-4, 0.05, 0.3, 0.5, 0.8] {
                let t = t_isf(q, nu);
                assert!((t_sf(t, nu) / q - 1.0).abs() < 1e-10, "nu={nu} q={q}");
            }
        }
    }

    #[test]
    fn normal_tails() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.96) - 0.975_002_104_851_779_6).abs() < 1e-15);
        let x = -40.0;
        // ln Φ(-40) ≈ -804.608442013754
        assert!((norm_logcdf(x) + 804.608_442_013_754).abs() < 1e-9);
        assert!((norm_logcdf(-29.9) - norm_cdf(-29.9).ln()).abs() < 1e-10);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
    }
}
