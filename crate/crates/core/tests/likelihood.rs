mod common;

use approx::assert_relative_eq;
use common::*;
use nalgebra::DMatrix;
use nlps_aft::{
    aft_loglik, aft_loglik_derivs, fit_aft, fit_aft_mle, log_survival_std, simulate, AftParams,
    Error, Generator, ModelSpec, NewtonOptions, SimConfig, SurvivalDataset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[test]
fn log_survival_reference_points() {
    assert_relative_eq!(log_survival_std(0.0).unwrap(), 0.5f64.ln(), max_relative = 1e-15);
    assert_relative_eq!(log_survival_std(10.0).unwrap(), -53.23128515051247, max_relative = 1e-13);
    let far_left = log_survival_std(-37.0).unwrap();
    assert!(far_left < 0.0 && far_left > -1e-12);
    assert!(matches!(log_survival_std(f64::INFINITY), Err(Error::InvalidArgument(_))));
}

#[test]
fn censored_point_at_median() {
    // a dataset needs one event, so pair the censored median point with an event at z = 0
    let mu: f64 = 0.7;
    let data = SurvivalDataset::new(DMatrix::zeros(2, 1), vec![mu.exp(); 2], vec![0, 1]).unwrap();
    let params = AftParams::new(mu, vec![], 1.0).unwrap();
    let ll = aft_loglik(&data, &ModelSpec::empty(), &params).unwrap();
    let event = -0.5 * (2.0 * std::f64::consts::PI).ln();
    assert_relative_eq!(ll - event, 0.5f64.ln(), max_relative = 1e-14);
}

#[test]
fn uncensored_loglik_is_gaussian_loglik() {
    let data = gaussian_dataset(30, &[0.5, -1.0], 0.2, 0.8, 11);
    let model = ModelSpec::new(vec![0, 1]).unwrap();
    let params = AftParams::new(0.1, vec![0.4, -0.9], 0.9).unwrap();
    let y = data.log_times();
    let expect: f64 = (0..30)
        .map(|i| {
            let r = y[i] - 0.1 - 0.4 * data.column(0)[i] + 0.9 * data.column(1)[i];
            -0.5 * (2.0 * std::f64::consts::PI * 0.81).ln() - r * r / (2.0 * 0.81)
        })
        .sum();
    assert_relative_eq!(aft_loglik(&data, &model, &params).unwrap(), expect, max_relative = 1e-12);
}

#[test]
fn derivatives_match_finite_differences_on_censored_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for rep in 0..25 {
        let data = censored_dataset(20, &[0.7, -0.4], 0.4, 100 + rep);
        let model = ModelSpec::new(vec![0, 1]).unwrap();
        let theta: Vec<f64> = vec![
            rng.random_range(-0.5..0.5),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.5..0.5),
        ];
        let ll = |t: &[f64]| {
            let p = AftParams::new(t[0], vec![t[1], t[2]], t[3].exp()).unwrap();
            aft_loglik(&data, &model, &p).unwrap()
        };
        let p = AftParams::new(theta[0], vec![theta[1], theta[2]], theta[3].exp()).unwrap();
        let (g, h) = aft_loglik_derivs(&data, &model, &p).unwrap();
        let fd = fd_gradient(&ll, &theta, 1e-5);
        for i in 0..4 {
            assert!(rel_err(g[i], fd[i]) < 1e-5, "grad {i}: {} vs {}", g[i], fd[i]);
        }
        for i in 0..4 {
            let gi = |t: &[f64]| {
                let p = AftParams::new(t[0], vec![t[1], t[2]], t[3].exp()).unwrap();
                aft_loglik_derivs(&data, &model, &p).unwrap().0[i]
            };
            let row = fd_gradient(&gi, &theta, 1e-5);
            for j in 0..4 {
                assert!(rel_err(h[(i, j)], row[j]) < 1e-4, "hess ({i},{j})");
            }
        }
    }
}

#[test]
fn coercive_in_log_sigma() {
    let data = censored_dataset(40, &[1.0], 0.5, 3);
    let model = ModelSpec::new(vec![0]).unwrap();
    let at = |s: f64| aft_loglik(&data, &model, &AftParams::new(0.0, vec![1.0], s).unwrap()).unwrap();
    let mid = at(1.0);
    assert!(at(1e-3) < mid && at(1e-6) < at(1e-3));
    assert!(at(1e3) < mid && at(1e6) < at(1e3));
}

#[test]
fn uncensored_mle_is_least_squares() {
    for seed in 0..10 {
        let data = gaussian_dataset(60, &[0.8, -0.3, 0.0], 1.0, 0.6, seed);
        let model = ModelSpec::new(vec![0, 1, 2]).unwrap();
        let (fit, _) = fit_aft_mle(&data, &model, None).unwrap();
        let (coef, rss) = ols(data.design(), data.log_times());
        assert!((fit.mu - coef[0]).abs() < 1e-8);
        for j in 0..3 {
            assert!((fit.beta[j] - coef[j + 1]).abs() < 1e-8);
        }
        assert!((fit.sigma * fit.sigma - rss / 60.0).abs() < 1e-8);
    }
}

#[test]
fn simulated_coefficient_within_three_standard_errors() {
    let config = SimConfig {
        n: 200,
        p: 1,
        beta_true: BTreeMap::from([(0, 1.3)]),
        mu_true: 0.0,
        sigma_true: 1.0,
        target_censoring: 0.5,
        generator: Generator::AftLognormal,
        time_cap: 20.0,
        seed: 2024,
    };
    let data = simulate(&config).unwrap().dataset;
    let fit = fit_aft(&data, &ModelSpec::new(vec![0]).unwrap(), None, None, &NewtonOptions::default()).unwrap();
    let se = fit.standard_errors().unwrap()[1];
    assert!((fit.params.beta[0] - 1.3).abs() < 3.0 * se, "{} ± {se}", fit.params.beta[0]);
}

#[test]
fn all_censored_is_rejected() {
    let err = SurvivalDataset::new(DMatrix::from_element(3, 1, 1.0), vec![1.0, 2.0, 3.0], vec![0, 0, 0]).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn iteration_cap_reports_last_iterate() {
    let data = censored_dataset(50, &[1.0], 0.3, 9);
    let opts = NewtonOptions { max_iter: 1, ..NewtonOptions::default() };
    let start = AftParams::new(3.0, vec![-2.0], 5.0).unwrap();
    match fit_aft(&data, &ModelSpec::new(vec![0]).unwrap(), None, Some(&start), &opts) {
        Err(Error::Convergence { last, .. }) => assert!(last.sigma > 0.0),
        other => panic!("expected convergence failure, got {other:?}"),
    }
}
