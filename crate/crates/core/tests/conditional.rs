use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skewmda::conditional::{
    augmented_posterior, draw_dw_given_prefix, draw_suffix_given_prefix, observed_loglik_dense,
    observed_loglik_shortcut, prefix_stats,
};
use skewmda::covariance::{ldl_decompose, LdlFactor};
use skewmda::distributions::{
    pdf_st_multi, pdf_st_uni, standard_normal, truncated_cdf, Dof, SkewTMulti, SkewTUni,
};
use skewmda::oracles::quadrature::integrate;
use skewmda::oracles::rejection::{marginal_sd, rejection_conditional_oracle, Estimate, JointLaw};

struct Moments {
    w: Estimate,
    d: Estimate,
    rest: Vec<Estimate>,
}

fn moments(draws: &[(f64, f64, Vec<f64>)]) -> Moments {
    let n = draws.len();
    let est = |f: &dyn Fn(&(f64, f64, Vec<f64>)) -> f64| {
        let (s, s2) = draws.iter().fold((0.0, 0.0), |(a, b), x| {
            let v = f(x);
            (a + v, b + v * v)
        });
        Estimate::from_sums(s, s2, n)
    };
    let m = draws[0].2.len();
    Moments {
        w: est(&|x| x.0),
        d: est(&|x| x.1),
        rest: (0..m).map(|k| est(&|x| x.2[k])).collect(),
    }
}

fn law3(nu: Dof) -> JointLaw {
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.5, 0.6, 0.3, 0.6, 2.0]);
    JointLaw::new(DVector::from_vec(vec![0.5, -0.2, 1.0]), sigma, DVector::from_vec(vec![1.5, -1.0, 2.0]), nu).unwrap()
}

fn u_scale(law: &JointLaw) -> (LdlFactor, Vec<f64>, Vec<f64>) {
    let f = ldl_decompose(&law.sigma).unwrap();
    let mean_u = f.apply_u(&law.mu).iter().copied().collect();
    let psi_u = f.apply_u(&law.psi).iter().copied().collect();
    (f, mean_u, psi_u)
}

/// Prefix conditioning: the closed-form `(W, d)` law plus the sequential
/// suffix against the rejection oracle.
#[test]
fn prefix_conditional_matches_rejection() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (nu, prefix) in [
        (Dof::Finite(6.0), vec![1.2]),
        (Dof::Finite(10.0), vec![0.3, -1.0]),
        (Dof::Infinite, vec![2.0, 0.5]),
    ] {
        let law = law3(nu);
        let sd = marginal_sd(&law, 200_000, &mut rng);
        let half: Vec<f64> = sd[..prefix.len()].iter().map(|v| 0.15 * v).collect();
        let oracle = rejection_conditional_oracle(&law, &prefix, &half, 4000, 50_000_000, &mut rng).unwrap();
        let (f, mean_u, psi_u) = u_scale(&law);
        let stats = prefix_stats(&prefix, &mean_u, &f, &psi_u, nu).unwrap();
        let draws: Vec<(f64, f64, Vec<f64>)> = (0..200_000)
            .map(|_| {
                let (w, d) = draw_dw_given_prefix(&stats, &mut rng);
                let y = draw_suffix_given_prefix(&prefix, w, d, &f, &mean_u, &psi_u, &mut rng);
                (w, d, y)
            })
            .collect();
        let lemma = moments(&draws);
        assert!(lemma.w.z_distance(&oracle.w) < 4.0, "{nu:?} W: {:?} vs {:?}", lemma.w, oracle.w);
        if nu != Dof::Infinite {
            assert!(lemma.d.z_distance(&oracle.d) < 4.0, "{nu:?} d: {:?} vs {:?}", lemma.d, oracle.d);
        }
        for (a, b) in lemma.rest.iter().zip(&oracle.suffix) {
            assert!(a.z_distance(b) < 4.0, "{nu:?} y: {a:?} vs {b:?}");
        }
    }
}

/// An intermittent gap `(y1, ·, y3)`: the augmented posterior against the
/// rejection oracle on the permuted joint, where the gap becomes a suffix.
#[test]
fn intermittent_gap_matches_permuted_rejection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let order = [0usize, 2, 1];
    for nu in [Dof::Finite(5.0), Dof::Infinite] {
        let law = law3(nu);
        let permuted = JointLaw::new(
            DVector::from_fn(3, |i, _| law.mu[order[i]]),
            DMatrix::from_fn(3, 3, |i, j| law.sigma[(order[i], order[j])]),
            DVector::from_fn(3, |i, _| law.psi[order[i]]),
            nu,
        )
        .unwrap();
        let (y1, y3) = (1.0, 2.5);
        let sd = marginal_sd(&permuted, 200_000, &mut rng);
        let half = [0.15 * sd[0], 0.15 * sd[1]];
        let oracle = rejection_conditional_oracle(&permuted, &[y1, y3], &half, 4000, 50_000_000, &mut rng).unwrap();

        let (f, mean_u, psi_u) = u_scale(&law);
        let post = augmented_posterior(&[Some(y1), None, Some(y3)], &mean_u, &f, &psi_u, nu, true).unwrap();
        let draws: Vec<(f64, f64, Vec<f64>)> = (0..200_000)
            .map(|_| {
                let a = post.draw(&mut rng);
                (a.w, a.d, a.y_m)
            })
            .collect();
        let aug = moments(&draws);
        assert!(aug.w.z_distance(&oracle.w) < 4.0, "{nu:?} W: {:?} vs {:?}", aug.w, oracle.w);
        assert!(aug.d.z_distance(&oracle.d) < 4.0 || nu == Dof::Infinite);
        assert!(aug.rest[0].z_distance(&oracle.suffix[0]) < 4.0, "{nu:?} y2: {:?} vs {:?}", aug.rest[0], oracle.suffix[0]);

        // the gap's posterior mean by quadrature of the joint density
        let p = SkewTMulti::new(law.mu.clone(), law.sigma.clone(), law.psi.clone(), nu).unwrap();
        let dens = |t: f64| pdf_st_multi(&DVector::from_vec(vec![y1, t, y3]), &p).unwrap();
        let z = integrate(dens, f64::NEG_INFINITY, f64::INFINITY, 1e-12).unwrap().0;
        let m1 = integrate(|t| t * dens(t), f64::NEG_INFINITY, f64::INFINITY, 1e-12).unwrap().0 / z;
        assert!((aug.rest[0].mean - m1).abs() < 4.0 * aug.rest[0].se, "{nu:?}: {} vs {m1}", aug.rest[0].mean);
    }
}

/// With no gaps, the augmented route's `W` marginal is the law drawn by the
/// prefix route.
#[test]
fn w_marginal_agrees_with_prefix_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let law = law3(Dof::Finite(7.0));
    let (f, mean_u, psi_u) = u_scale(&law);
    let prefix = [0.4, 1.1];
    let stats = prefix_stats(&prefix, &mean_u, &f, &psi_u, Dof::Finite(7.0)).unwrap();
    let post = augmented_posterior(&[Some(0.4), Some(1.1), None], &mean_u, &f, &psi_u, Dof::Finite(7.0), true).unwrap();
    let spec = post.w_marginal().unwrap();
    let n = 100_000;
    let mut w: Vec<f64> = (0..n).map(|_| draw_dw_given_prefix(&stats, &mut rng).0).collect();
    w.sort_by(f64::total_cmp);
    let ks = w
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = truncated_cdf(x, &spec);
            (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks * (n as f64).sqrt() < 1.628, "KS {ks}");
}

#[test]
fn shortcut_density_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let p = 4;
        let a = DMatrix::from_fn(p, p, |_, _| standard_normal(&mut rng));
        let sigma = &a * a.transpose() + DMatrix::identity(p, p) * 0.3;
        let f = ldl_decompose(&sigma).unwrap();
        let mean_u: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
        let psi_u: Vec<f64> = (0..p).map(|_| 2.0 * standard_normal(&mut rng)).collect();
        let y: Vec<f64> = (0..p).map(|_| 2.0 * standard_normal(&mut rng)).collect();
        for s in 1..=p {
            let yo: Vec<Option<f64>> = (0..p).map(|j| (j < s).then_some(y[j])).collect();
            for nu in [Dof::Finite(4.5), Dof::Finite(30.0), Dof::Infinite] {
                let fast = observed_loglik_shortcut(&y[..s], &mean_u, &f, &psi_u, nu);
                let dense = observed_loglik_dense(&yo, &mean_u, &f, &psi_u, nu).unwrap();
                assert!((fast - dense).abs() < 1e-9 * dense.abs().max(1.0), "s = {s}: {fast} vs {dense}");
            }
        }
    }
}

#[test]
fn univariate_density_is_the_skew_t() {
    for (mu, s2, psi, nu) in [(0.5, 2.0, 1.5, Dof::Finite(5.0)), (-1.0, 0.5, -3.0, Dof::Finite(12.0)), (0.0, 1.0, 2.0, Dof::Infinite)] {
        let f = LdlFactor::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![1.0 / s2])).unwrap();
        let p = SkewTUni::new(mu, s2, psi, nu).unwrap();
        for y in [-2.0, 0.0, 0.7, 3.0] {
            let a = observed_loglik_shortcut(&[y], &[mu], &f, &[psi], nu);
            let b = match nu {
                Dof::Finite(_) => pdf_st_uni(y, &p).unwrap().ln(),
                Dof::Infinite => skewmda::distributions::pdf_sn_uni(y, &p).unwrap().ln(),
            };
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
