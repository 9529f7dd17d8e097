//! The particle filter's likelihood estimate is unbiased: its expectation
//! equals the exact likelihood. Checked against the Kalman recursion on the
//! linear-Gaussian model and against exact forward sums on a finite chain.

use smc2_core::fk_oracle::{exact_marginals, FiniteFk};
use smc2_core::kalman::kalman_loglik;
use smc2_core::models::{lg_model, lg_simulate, FiniteSsm, LinearGaussianParams};
use smc2_core::particle::{pf_init, pf_step};
use smc2_core::rngstream::derive_rng;

fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn first_observation_likelihood_is_unbiased() {
    let params = LinearGaussianParams::new(1.0, 1.0, 1.0).unwrap();
    let (model, theta) = lg_model(params).unwrap();
    let y1 = 0.7;
    let exact = kalman_loglik(params, &[y1]).unwrap().exp();
    let ratios: Vec<f64> = (0..2000)
        .map(|r| {
            let mut rng = derive_rng(100, 0, r);
            let pf = pf_init(&model, &theta, 16, Some(y1), false, &mut rng).unwrap();
            pf.cum_loglik.exp() / exact
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    assert!((mean - 1.0).abs() < 3.0 * se, "ratio {mean} +- {se}");
}

#[test]
fn window_likelihood_is_unbiased_against_kalman() {
    let params = LinearGaussianParams::new(1.0, 1.0, 1.0).unwrap();
    let (model, theta) = lg_model(params).unwrap();
    let (_, ys) = lg_simulate(params, 50, &mut derive_rng(101, 0, 0)).unwrap();
    let exact = kalman_loglik(params, &ys).unwrap();
    let ratios: Vec<f64> = (0..1000)
        .map(|r| {
            let mut rng = derive_rng(102, 0, r);
            let mut pf = pf_init(&model, &theta, 64, Some(ys[0]), false, &mut rng).unwrap();
            for &y in &ys[1..] {
                pf_step(&mut pf, &model, &theta, y, &mut rng).unwrap();
            }
            (pf.cum_loglik - exact).exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    assert!((mean - 1.0).abs() < 3.0 * se, "ratio {mean} +- {se}");
}

#[test]
fn window_likelihood_is_unbiased_on_a_finite_chain() {
    let ssm = FiniteSsm::new(vec![-1.0, 0.0, 1.0], 0.9);
    let a = 0.8;
    let ys = [0.4, -0.6, 1.1, 0.0, -0.3];
    let fk = FiniteFk::from_finite_ssm(&ssm, a, &ys).unwrap();
    let exact = exact_marginals(&fk).unwrap().log_normalizer();
    assert!((exact - ssm.exact_loglik(a, &ys)).abs() < 1e-12);
    let ratios: Vec<f64> = (0..3000)
        .map(|r| {
            let mut rng = derive_rng(103, 0, r);
            let mut pf = pf_init(&ssm, &[a], 24, Some(ys[0]), false, &mut rng).unwrap();
            for &y in &ys[1..] {
                pf_step(&mut pf, &ssm, &[a], y, &mut rng).unwrap();
            }
            (pf.cum_loglik - exact).exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    assert!((mean - 1.0).abs() < 3.0 * se, "ratio {mean} +- {se}");
}

#[test]
fn filter_is_deterministic_given_the_stream() {
    let params = LinearGaussianParams::new(1.0, 1.0, 1.0).unwrap();
    let (model, theta) = lg_model(params).unwrap();
    let (_, ys) = lg_simulate(params, 20, &mut derive_rng(104, 0, 0)).unwrap();
    let run = |seed| {
        let mut rng = derive_rng(seed, 0, 0);
        let mut pf = pf_init(&model, &theta, 32, Some(ys[0]), false, &mut rng).unwrap();
        for &y in &ys[1..] {
            pf_step(&mut pf, &model, &theta, y, &mut rng).unwrap();
        }
        pf.cum_loglik
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}
