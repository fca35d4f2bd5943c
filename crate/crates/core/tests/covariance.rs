use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use skewmda::covariance::{
    ldl_decompose, ldl_reconstruct, transform_coefficients, u_partition, untransform_coefficients, LdlFactor,
};

fn spd() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=8).prop_flat_map(|p| {
        (prop::collection::vec(-2.0f64..2.0, p * p), 0.05f64..2.0).prop_map(move |(v, ridge)| {
            let a = DMatrix::from_vec(p, p, v);
            &a * a.transpose() + DMatrix::identity(p, p) * ridge
        })
    })
}

fn factor() -> impl Strategy<Value = LdlFactor> {
    (1usize..=6).prop_flat_map(|p| {
        (prop::collection::vec(-1.5f64..1.5, p * p), prop::collection::vec(0.1f64..5.0, p)).prop_map(move |(b, g)| {
            LdlFactor::new(DMatrix::from_vec(p, p, b), DVector::from_vec(g)).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decompose_reconstruct_round_trip(sigma in spd()) {
        let f = ldl_decompose(&sigma).unwrap();
        prop_assert!(f.gamma.iter().all(|g| *g > 0.0));
        let back = ldl_reconstruct(&f).unwrap();
        let scale = sigma.amax().max(1.0);
        prop_assert!((&back - &sigma).amax() < 1e-10 * scale);
        let u = f.u_matrix();
        let l = f.l_matrix();
        prop_assert!((&u * &l - DMatrix::identity(u.nrows(), u.nrows())).amax() < 1e-9 * l.amax().max(1.0));
    }

    #[test]
    fn precision_identity(sigma in spd()) {
        let f = ldl_decompose(&sigma).unwrap();
        let direct = sigma.clone().try_inverse().unwrap();
        let via = f.precision_matrix();
        prop_assert!((&via - &direct).amax() <= 1e-9 * direct.amax());
        let diag = f.precision_diagonal();
        for j in 0..diag.len() {
            prop_assert!((diag[j] - via[(j, j)]).abs() <= 1e-10 * via[(j, j)].max(1.0));
        }
        prop_assert!((f.log_det_sigma() - sigma.determinant().ln()).abs() < 1e-8);
    }

    #[test]
    fn coefficient_map_inverts(f in factor(), q in 1usize..4, seed in any::<u64>()) {
        let p = f.dim();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        let alpha = DMatrix::from_fn(p, q, |_, _| next());
        let psi = DVector::from_fn(p, |_, _| next());
        let (au, pu) = transform_coefficients(&alpha, &psi, &f).unwrap();
        let (a2, p2) = untransform_coefficients(&au, &pu, &f).unwrap();
        prop_assert!((&a2 - &alpha).amax() < 1e-9 * alpha.amax().max(1.0));
        prop_assert!((&p2 - &psi).amax() < 1e-9 * psi.amax().max(1.0));
        let u = f.u_matrix();
        prop_assert!((&u * &alpha - au).amax() < 1e-12);
    }

    #[test]
    fn u22_forward_substitution(f in factor(), split in 0usize..6, seed in any::<u64>()) {
        let p = f.dim();
        let s = split % p;
        let part = u_partition(&f, s).unwrap();
        let m = p - s;
        for i in 0..m {
            prop_assert_eq!(part.u22[(i, i)], 1.0);
        }
        let v = DVector::from_fn(m, |i, _| ((seed >> (i % 60)) & 0xff) as f64 / 64.0 - 2.0);
        let x = part.u22_solve(&v);
        prop_assert!((&part.u22 * &x - &v).amax() < 1e-10 * x.amax().max(1.0));
    }
}

#[test]
fn worked_examples() {
    let f = ldl_decompose(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
    assert!((f.beta[(1, 0)] - 0.5).abs() < 1e-15);
    assert!((f.gamma[1] - 1.0 / 0.75).abs() < 1e-14);
    let alpha = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
    let (au, _) = transform_coefficients(&alpha, &DVector::zeros(2), &f).unwrap();
    assert!((au[(0, 0)] - 1.0).abs() < 1e-15 && (au[(1, 0)] - 0.5).abs() < 1e-15);
    assert_eq!(ldl_reconstruct(&LdlFactor::identity(4)).unwrap(), DMatrix::identity(4, 4));
    let one = LdlFactor::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![4.0])).unwrap();
    assert_eq!(ldl_reconstruct(&one).unwrap()[(0, 0)], 0.25);
    let f3 = ldl_decompose(&DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.4, 0.1, 0.4, 1.5])).unwrap();
    assert_eq!(u_partition(&f3, 0).unwrap().u22, f3.u_matrix());
    assert_eq!(u_partition(&f3, 2).unwrap().u22, DMatrix::identity(1, 1));
    assert!(u_partition(&f3, 3).is_err());
}

#[test]
fn rejects_bad_input() {
    assert!(ldl_decompose(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    assert!(ldl_decompose(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, f64::NAN])).is_err());
    let bad = LdlFactor::new(DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 0.0])).unwrap();
    assert!(ldl_reconstruct(&bad).is_err());
    let f = LdlFactor::identity(3);
    assert!(transform_coefficients(&DMatrix::zeros(2, 1), &DVector::zeros(3), &f).is_err());
}
