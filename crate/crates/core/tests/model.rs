use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skewmda::model::{x_to_z_expand, Variant, INTERCEPT};
use skewmda::oracles::diagnostics::{mcse, mean_sd};
use skewmda::oracles::{generate_scenario, DropoutMechanism, SyntheticScenario};
use skewmda::priors::PriorConfig;
use skewmda::sampler::{run_chain, DrawStore, SamplerConfig};

fn column(store: &DrawStore, name: &str) -> Vec<f64> {
    let (names, rows) = store.table().unwrap();
    let k = names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k]).collect()
}

#[test]
fn expansion_layout() {
    let sc = SyntheticScenario {
        n_tot: 10,
        alpha: vec![vec![0.0, 1.0, 0.5]; 2],
        n_baseline: 1,
        treatment: true,
        eta: vec![],
        sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        psi: vec![0.0; 2],
        nu: None,
        dropout: DropoutMechanism::None,
        intermittent_rate: 0.0,
    };
    let spec = sc.spec(Variant::N);
    let e = x_to_z_expand(&spec, "base1").unwrap();
    assert_eq!(e.x_names, vec![INTERCEPT.to_string(), "trt".to_string()]);
    assert_eq!(e.z_names, vec!["base1@v1".to_string(), "base1@v2".to_string()]);
    let e = x_to_z_expand(&spec, INTERCEPT).unwrap();
    assert!(!e.intercept);
    assert_eq!(e.z_names.len(), 2);
    assert!(x_to_z_expand(&spec, "missing").is_err());
    let mut one = spec.clone();
    one.p = 1;
    assert_eq!(x_to_z_expand(&one, "base1").unwrap().z_names, vec!["base1@v1".to_string()]);
}

/// A baseline covariate with visit-specific effects fitted in X, and the
/// same covariate as `p` visit-indicator columns in Z, give the same
/// posterior for those effects.
#[test]
fn expanded_fit_matches_original() {
    let scenario = SyntheticScenario {
        n_tot: 50,
        alpha: vec![vec![0.0, 0.8, 0.0], vec![0.2, 0.5, -0.4], vec![0.4, 0.2, -0.8]],
        n_baseline: 1,
        treatment: true,
        eta: vec![],
        sigma: vec![vec![1.0, 0.5, 0.3], vec![0.5, 1.0, 0.5], vec![0.3, 0.5, 1.0]],
        psi: vec![0.0; 3],
        nu: None,
        dropout: DropoutMechanism::MarHazard { intercept: -2.0, slope: 0.3 },
        intermittent_rate: 0.0,
    };
    let sc = generate_scenario(&scenario, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let spec = scenario.spec(Variant::N);
    let cfg = SamplerConfig { burn_in: 1000, n_draws: 6000, seed: 5, ..SamplerConfig::default() };
    let base = run_chain(&sc.data, &spec, &PriorConfig::default(), &cfg).unwrap();
    let espec = x_to_z_expand(&spec, "base1").unwrap();
    let edata = sc.data.expand_x_to_z("base1").unwrap();
    let ecfg = SamplerConfig { seed: 6, ..cfg };
    let expanded = run_chain(&edata, &espec, &PriorConfig::default(), &ecfg).unwrap();
    for j in 1..=3 {
        let a = column(&base, &format!("alpha[{j},2]"));
        let b = column(&expanded, &format!("eta[{j}]"));
        let (ma, mb) = (mean_sd(&a).0, mean_sd(&b).0);
        let se = (mcse(&a).powi(2) + mcse(&b).powi(2)).sqrt();
        assert!((ma - mb).abs() < 3.0 * se, "visit {j}: {ma} vs {mb} (se {se})");
    }
    // the treatment slot moves from column 3 to column 2
    for (name, other) in [("alpha[3,3]", "alpha[3,2]"), ("sigma[3,3]", "sigma[3,3]")] {
        let (a, b) = (column(&base, name), column(&expanded, other));
        let se = (mcse(&a).powi(2) + mcse(&b).powi(2)).sqrt();
        assert!((mean_sd(&a).0 - mean_sd(&b).0).abs() < 3.0 * se, "{name}");
    }
}
