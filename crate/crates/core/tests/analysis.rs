use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skewmda::analysis::{
    analyze_mi, ancova, ancova_final_visit, barnard_rubin_df, rubin_classical_df, rubin_pool, tipping_point,
    AnalysisConfig, TippingConfig,
};
use skewmda::distributions::standard_normal;
use skewmda::imputation::{generate_mi_sets, ImputationStrategy};
use skewmda::model::Variant;
use skewmda::oracles::{generate_scenario, DropoutMechanism, SyntheticScenario};
use skewmda::priors::PriorConfig;
use skewmda::sampler::{run_chain, SamplerConfig};

#[test]
fn hand_solved_normal_equations() {
    // 2x2 layout: treatment by a binary covariate, no interaction
    let y = [1.0, 3.0, 2.0, 6.0];
    let g = [0.0, 0.0, 1.0, 1.0];
    let x = vec![0.0, 1.0, 0.0, 1.0];
    let fit = ancova(&y, &g, &[x]).unwrap();
    assert!((fit.coefficients[0] - 0.5).abs() < 1e-12);
    assert!((fit.estimate - 2.0).abs() < 1e-12);
    assert!((fit.coefficients[2] - 3.0).abs() < 1e-12);
    // SSE = 1 on 1 df; (X'X)⁻¹ at the treatment slot is 1
    assert!((fit.variance - 1.0).abs() < 1e-12);
    assert_eq!(fit.df, 1.0);
}

#[test]
fn location_and_scale_behaviour() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 30;
    let g: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let x: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|i| 0.5 * g[i] + x[i] + standard_normal(&mut rng)).collect();
    let base = ancova(&y, &g, &[x.clone()]).unwrap();
    let shifted: Vec<f64> = y.iter().map(|v| v + 7.5).collect();
    let a = ancova(&shifted, &g, &[x.clone()]).unwrap();
    assert!((a.estimate - base.estimate).abs() < 1e-12);
    let scaled: Vec<f64> = y.iter().map(|v| -3.0 * v).collect();
    let b = ancova(&scaled, &g, &[x]).unwrap();
    assert!((b.estimate + 3.0 * base.estimate).abs() < 1e-12);
    assert!((b.variance.sqrt() - 3.0 * base.variance.sqrt()).abs() < 1e-12);
}

#[test]
fn rubin_hand_example() {
    let r = rubin_pool(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], 20.0).unwrap();
    assert_eq!(r.q_bar, 2.0);
    assert_eq!(r.between, 1.0);
    assert_eq!(r.total, 7.0 / 3.0);
    assert!(r.total >= r.u_bar);
    assert!(r.df > 0.0 && r.df <= 20.0);
}

#[test]
fn large_m_limit_of_degrees_of_freedom() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = 10_000;
    let pairs: Vec<(f64, f64)> = (0..m).map(|_| (0.3 + 0.7 * standard_normal(&mut rng), 1.0)).collect();
    let r = rubin_pool(&pairs, f64::INFINITY).unwrap();
    let classical = rubin_classical_df(m, r.u_bar, r.between);
    assert!((r.df - classical).abs() < 1e-9 * classical);
    let big = barnard_rubin_df(m, r.u_bar, r.between, 1e9);
    assert!((big - classical).abs() < 1e-3 * classical);
    let small = barnard_rubin_df(m, r.u_bar, r.between, 100.0);
    assert!(small < 100.0);
}

fn scenario() -> SyntheticScenario {
    SyntheticScenario {
        n_tot: 80,
        alpha: vec![vec![0.0, 0.5, 0.0], vec![0.3, 0.5, -0.5], vec![0.6, 0.5, -1.0]],
        n_baseline: 1,
        treatment: true,
        eta: vec![],
        sigma: vec![vec![1.0, 0.5, 0.3], vec![0.5, 1.0, 0.5], vec![0.3, 0.5, 1.0]],
        psi: vec![0.0; 3],
        nu: None,
        dropout: DropoutMechanism::MarHazard { intercept: -1.5, slope: 0.3 },
        intermittent_rate: 0.0,
    }
}

#[test]
fn tipping_grid_reductions() {
    let sc = generate_scenario(&scenario(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let spec = scenario().spec(Variant::N);
    let cfg = SamplerConfig { burn_in: 100, n_draws: 200, seed: 1, ..SamplerConfig::default() };
    let store = run_chain(&sc.data, &spec, &PriorConfig::default(), &cfg).unwrap();
    let analysis = AnalysisConfig { covariates: vec!["base1".into()], change_from: None };
    let tip = TippingConfig { delta0: vec![0.0, 0.5], delta1: vec![0.0, 1.0], m: 5, seed: 7, alpha: 0.05, conditional: false };
    let grid = tipping_point(&store, &sc.data, &spec, &tip, &analysis).unwrap();
    let mar = generate_mi_sets(&store, &sc.data, &spec, &ImputationStrategy::mar(), 5, 7).unwrap();
    assert_eq!(grid.cells[0][0], analyze_mi(&mar, &sc.data, &spec, &analysis).unwrap());
    let single = generate_mi_sets(&store, &sc.data, &spec, &ImputationStrategy::delta(0.5, 1.0, false), 5, 7).unwrap();
    let one = TippingConfig { delta0: vec![0.5], delta1: vec![1.0], ..tip };
    let g1 = tipping_point(&store, &sc.data, &spec, &one, &analysis).unwrap();
    assert_eq!(g1.cells[0][0], analyze_mi(&single, &sc.data, &spec, &analysis).unwrap());
    assert_eq!(g1.cells[0][0], grid.cells[1][1]);
    assert_eq!(grid.long_table().len(), 4);
    assert_eq!(grid.boundary().len(), 2);
}

#[test]
fn change_from_baseline_endpoint() {
    let sc = generate_scenario(&scenario(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let spec = scenario().spec(Variant::N);
    let cfg = SamplerConfig { burn_in: 50, n_draws: 20, seed: 1, ..SamplerConfig::default() };
    let store = run_chain(&sc.data, &spec, &PriorConfig::default(), &cfg).unwrap();
    let ds = &generate_mi_sets(&store, &sc.data, &spec, &ImputationStrategy::mar(), 1, 3).unwrap()[0];
    let raw = ancova_final_visit(ds, &sc.data, &spec, &AnalysisConfig { covariates: vec!["base1".into()], change_from: None }).unwrap();
    let change = ancova_final_visit(
        ds,
        &sc.data,
        &spec,
        &AnalysisConfig { covariates: vec!["base1".into()], change_from: Some("base1".into()) },
    )
    .unwrap();
    // with the baseline as a covariate, subtracting it only moves its slope
    assert!((raw.estimate - change.estimate).abs() < 1e-10);
    assert!((raw.coefficients[2] - 1.0 - change.coefficients[2]).abs() < 1e-10);
    let bad = AnalysisConfig { covariates: vec!["trt".into()], change_from: None };
    assert!(ancova_final_visit(ds, &sc.data, &spec, &bad).is_err());
}
