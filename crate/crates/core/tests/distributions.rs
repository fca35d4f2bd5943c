use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skewmda::distributions::{
    gamma_rate, lambda_star, lambda_star_via_omega, pdf_sn_multi, pdf_sn_uni, pdf_st_multi, pdf_st_uni, sample_st,
    sample_st_uni, sample_truncated, standard_normal, truncated_cdf, Dof, SkewTMulti, SkewTUni, TruncatedSpec,
};
use skewmda::oracles::gof::chi_square_gof;
use skewmda::oracles::quadrature::integrate;
use skewmda::oracles::rejection::Estimate;
use skewmda::special::{norm_cdf, t_cdf};

fn uni(mu: f64, s2: f64, psi: f64, nu: Option<f64>) -> SkewTUni {
    SkewTUni::new(mu, s2, psi, nu.map_or(Dof::Infinite, Dof::Finite)).unwrap()
}

fn pdf(x: f64, p: &SkewTUni) -> f64 {
    match p.nu {
        Dof::Infinite => pdf_sn_uni(x, p).unwrap(),
        Dof::Finite(_) => pdf_st_uni(x, p).unwrap(),
    }
}

fn cdf_by_quadrature(p: &SkewTUni) -> impl Fn(f64) -> f64 + '_ {
    let head = integrate(|t| pdf(t, p), f64::NEG_INFINITY, p.mu, 1e-12).unwrap().0;
    move |x| {
        if x >= p.mu {
            head + integrate(|t| pdf(t, p), p.mu, x, 1e-11).unwrap().0
        } else {
            head - integrate(|t| pdf(t, p), x, p.mu, 1e-11).unwrap().0
        }
    }
}

fn sample_mean(draws: &[f64]) -> Estimate {
    let s: f64 = draws.iter().sum();
    let s2: f64 = draws.iter().map(|v| v * v).sum();
    Estimate::from_sums(s, s2, draws.len())
}

#[test]
fn densities_integrate_to_one() {
    let cases = [
        uni(0.0, 1.0, 0.0, Some(5.0)),
        uni(1.0, 2.0, 3.0, Some(4.0)),
        uni(-2.0, 0.5, -1.5, Some(30.0)),
        uni(0.0, 1.0, 2.0, None),
        uni(1.0, 4.0, -5.0, None),
    ];
    for p in &cases {
        let (v, _) = integrate(|x| pdf(x, p), -40.0, 40.0, 1e-12).unwrap();
        // heavy t tails leave a little mass outside ±40 at ν = 4
        let tol = if p.nu == Dof::Finite(4.0) { 1e-3 } else { 1e-6 };
        assert!((v - 1.0).abs() < tol, "{p:?}: {v}");
        let (w, _) = integrate(|x| pdf(x, p), f64::NEG_INFINITY, f64::INFINITY, 1e-12).unwrap();
        assert!((w - 1.0).abs() < 1e-8, "{p:?}: {w}");
    }
}

#[test]
fn sn_direct_formula_and_reflection() {
    let p = uni(1.0, 4.0, 2.0, None);
    // ω² = 8, λ = ψ/σ = 1
    let w2: f64 = 8.0;
    let expect = 2.0 * (-(1.0f64).powi(2) / (2.0 * w2)).exp() / (2.0 * std::f64::consts::PI * w2).sqrt()
        * norm_cdf(1.0 * (2.0 - 1.0) / w2.sqrt());
    assert!((pdf_sn_uni(2.0, &p).unwrap() - expect).abs() < 1e-14);
    let a = pdf_sn_uni(0.7, &uni(0.0, 1.0, 1.5, None)).unwrap();
    let b = pdf_sn_uni(-0.7, &uni(0.0, 1.0, -1.5, None)).unwrap();
    assert!((a - b).abs() < 1e-15);
}

#[test]
fn large_nu_approaches_sn() {
    let sn = uni(0.0, 1.0, 3.0, None);
    let st = uni(0.0, 1.0, 3.0, Some(1000.0));
    assert!((pdf_st_uni(1.0, &st).unwrap() - pdf_sn_uni(1.0, &sn).unwrap()).abs() < 1e-3);
    let st = uni(0.0, 1.0, 3.0, Some(1e4));
    for k in -20..=40 {
        let x = 0.1 * k as f64;
        let a = pdf_st_uni(x, &st).unwrap();
        let b = pdf_sn_uni(x, &sn).unwrap();
        assert!((a - b).abs() <= 1e-3 * b, "x = {x}: {a} vs {b}");
    }
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let psi = DVector::from_vec(vec![1.0, -2.0]);
    let mst = SkewTMulti::new(DVector::zeros(2), sigma.clone(), psi.clone(), Dof::Finite(1e4)).unwrap();
    let msn = SkewTMulti::new(DVector::zeros(2), sigma, psi, Dof::Infinite).unwrap();
    for x in [[0.0, 0.0], [1.0, -1.0], [0.5, -2.5], [-0.5, 0.5]] {
        let x = DVector::from_vec(x.to_vec());
        let a = pdf_st_multi(&x, &mst).unwrap();
        let b = pdf_sn_multi(&x, &msn).unwrap();
        assert!((a - b).abs() <= 1e-3 * b, "{x}: {a} vs {b}");
    }
}

#[test]
fn symmetric_multivariate_is_t() {
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let p = SkewTMulti::new(DVector::from_vec(vec![1.0, -1.0]), sigma.clone(), DVector::zeros(2), Dof::Finite(6.0)).unwrap();
    let x = DVector::from_vec(vec![0.3, 0.4]);
    let dev = &x - &p.mu;
    let q = (dev.transpose() * sigma.clone().try_inverse().unwrap() * &dev)[0];
    let (nu, k) = (6.0f64, 2.0f64);
    let expect = libm::lgamma(0.5 * (nu + k)) - libm::lgamma(0.5 * nu) - 0.5 * k * (nu * std::f64::consts::PI).ln()
        - 0.5 * sigma.determinant().ln()
        - 0.5 * (nu + k) * (1.0 + q / nu).ln();
    assert!((pdf_st_multi(&x, &p).unwrap() - expect.exp()).abs() < 1e-13);
}

#[test]
fn lambda_star_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let a = DMatrix::from_fn(3, 3, |_, _| standard_normal(&mut rng));
        let sigma = &a * a.transpose() + DMatrix::identity(3, 3) * 0.5;
        let psi = DVector::from_fn(3, |_, _| 2.0 * standard_normal(&mut rng));
        let x = lambda_star(&sigma, &psi).unwrap();
        let y = lambda_star_via_omega(&sigma, &psi).unwrap();
        assert!((x - y).amax() < 1e-10);
    }
    assert!(lambda_star(&DMatrix::identity(2, 2), &DVector::zeros(2)).unwrap().amax() == 0.0);
}

#[test]
fn sampler_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 1_000_000;
    let p = uni(0.0, 1.0, 1.0, Some(10.0));
    let draws: Vec<f64> = (0..n).map(|_| sample_st_uni(&p, &mut rng)).collect();
    let e = sample_mean(&draws);
    // ψ √(ν/π) Γ((ν−1)/2)/Γ(ν/2) at ν = 10
    let target = (10.0 / std::f64::consts::PI).sqrt() * (libm::lgamma(4.5) - libm::lgamma(5.0)).exp();
    assert!((target - 0.8647).abs() < 1e-4);
    assert!((e.mean - target).abs() < 3.0 * e.se, "{} vs {target}", e.mean);
    let p = uni(1.0, 1.0, 2.0, None);
    let draws: Vec<f64> = (0..n).map(|_| sample_st_uni(&p, &mut rng)).collect();
    let e = sample_mean(&draws);
    let target = 1.0 + 2.0 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((e.mean - target).abs() < 3.0 * e.se);
}

fn skewness(draws: &[f64]) -> f64 {
    let n = draws.len() as f64;
    let m = draws.iter().sum::<f64>() / n;
    let m2 = draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = draws.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

#[test]
fn normal_case_is_symmetric_and_sn_skewness_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1_000_000;
    let p = uni(0.0, 1.0, 0.0, None);
    let draws: Vec<f64> = (0..n).map(|_| sample_st_uni(&p, &mut rng)).collect();
    assert!(skewness(&draws).abs() < 3.0 * (6.0 / n as f64).sqrt());
    for psi in [2.0, 10.0, 50.0, -50.0] {
        let p = uni(0.0, 1.0, psi, None);
        let draws: Vec<f64> = (0..n).map(|_| sample_st_uni(&p, &mut rng)).collect();
        assert!(skewness(&draws).abs() < 1.0);
    }
}

#[test]
fn samplers_pass_chi_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 1_000_000;
    for p in [uni(0.0, 1.0, 1.0, Some(10.0)), uni(1.0, 2.0, -3.0, Some(4.0)), uni(0.0, 1.0, 2.0, None)] {
        let draws: Vec<f64> = (0..n).map(|_| sample_st_uni(&p, &mut rng)).collect();
        let cdf = cdf_by_quadrature(&p);
        let t = chi_square_gof(&draws, &cdf, 50, -200.0, 200.0).unwrap();
        assert!(t.p_value > 0.001, "{p:?}: {t:?}");
    }
}

/// Probabilities of a few boxes under the bivariate density (nested
/// quadrature) against sampler frequencies.
#[test]
fn bivariate_box_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.5]);
    for nu in [Dof::Finite(5.0), Dof::Infinite] {
        let p = SkewTMulti::new(DVector::from_vec(vec![0.5, -0.5]), sigma.clone(), DVector::from_vec(vec![1.5, -1.0]), nu).unwrap();
        let n = 1_000_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| sample_st(&p, &mut rng).unwrap()).collect();
        let boxes = [([0.0, -1.0], [1.0, 0.0]), ([1.0, -3.0], [2.5, -1.5]), ([-1.0, 0.0], [0.5, 2.0])];
        for (lo, hi) in boxes {
            let prob = integrate(
                |x| {
                    integrate(
                        |y| pdf_st_multi(&DVector::from_vec(vec![x, y]), &p).unwrap(),
                        lo[1],
                        hi[1],
                        1e-12,
                    )
                    .unwrap()
                    .0
                },
                lo[0],
                hi[0],
                1e-11,
            )
            .unwrap()
            .0;
            let hits = draws.iter().filter(|v| v[0] > lo[0] && v[0] < hi[0] && v[1] > lo[1] && v[1] < hi[1]).count();
            let freq = hits as f64 / n as f64;
            let se = (prob * (1.0 - prob) / n as f64).sqrt();
            assert!((freq - prob).abs() < 3.0 * se, "{nu:?} {lo:?}: {freq} vs {prob}");
        }
    }
}

#[test]
fn truncated_samplers() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 1_000_000;
    let half = TruncatedSpec::positive_normal(0.0, 1.0);
    let draws: Vec<f64> = (0..n).map(|_| sample_truncated(&half, &mut rng)).collect();
    let e = sample_mean(&draws);
    assert!(draws.iter().all(|v| *v > 0.0));
    assert!((e.mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 3.0 * e.se);
    let far = TruncatedSpec::positive_normal(5.0, 1.0);
    let draws: Vec<f64> = (0..n).map(|_| sample_truncated(&far, &mut rng)).collect();
    let e = sample_mean(&draws);
    assert!((e.mean - 5.0).abs() < 3.0 * e.se);
    // far in the left tail, where naive rejection would never accept
    let tail = TruncatedSpec::positive_normal(-12.0, 1.0);
    let draws: Vec<f64> = (0..10_000).map(|_| sample_truncated(&tail, &mut rng)).collect();
    assert!(draws.iter().all(|v| *v > 0.0 && v.is_finite()));

    let tplus = TruncatedSpec::positive_t(0.0, 1.0, 4.0);
    let mut draws: Vec<f64> = (0..n).map(|_| sample_truncated(&tplus, &mut rng)).collect();
    assert!(draws.iter().all(|v| *v > 0.0));
    draws.sort_by(f64::total_cmp);
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = truncated_cdf(x, &tplus);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov critical value at α = 0.01
    assert!(ks * (n as f64).sqrt() < 1.628, "KS {ks}");
    // analytic truncated CDF for the t⁺ case
    assert!((truncated_cdf(1.0, &tplus) - 2.0 * (t_cdf(1.0, 4.0) - 0.5)).abs() < 1e-12);
}

/// Integrating the skewness latent out of the hierarchical prior gives
/// `t(0, π²/(4γ), 1/2)`.
#[test]
fn hierarchical_skewness_prior_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gamma = 2.0;
    let scale = (std::f64::consts::PI.powi(2) / (4.0 * gamma)).sqrt();
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let d = gamma_rate(&mut rng, 0.25, 0.25);
            standard_normal(&mut rng) * scale / d.sqrt()
        })
        .collect();
    let cdf = |x: f64| t_cdf(x / scale, 0.5);
    let t = chi_square_gof(&draws, &cdf, 50, -1e12, 1e12).unwrap();
    assert!(t.p_value > 0.001, "{t:?}");
}
