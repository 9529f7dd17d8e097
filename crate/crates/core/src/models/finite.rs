//! A small finite-state chain with a one-dimensional positive parameter.
//!
//! The transition matrix is a Gibbs kernel on the state labels,
//! `M(i, j) proportional to exp(-a * |s_i - s_j|)`, observed in Gaussian noise.
//! Because the state space is finite and `a` is scalar, the likelihood and
//! the posterior of `a` can be computed exactly (forward recursion plus
//! quadrature), which makes the model the workhorse for validating the
//! samplers against ground truth.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{normal_logpdf, StateSpaceModel};

#[derive(Debug, Clone)]
pub struct FiniteSsm {
    /// Real value attached to each state label.
    pub levels: Vec<f64>,
    /// Observation noise standard deviation (fixed, not estimated).
    pub obs_sd: f64,
}

impl FiniteSsm {
    pub fn new(levels: Vec<f64>, obs_sd: f64) -> Self {
        assert!(!levels.is_empty() && obs_sd > 0.0);
        Self { levels, obs_sd }
    }

    pub fn n_states(&self) -> usize {
        self.levels.len()
    }

    /// Row-stochastic transition matrix at stickiness `a`.
    pub fn transition_matrix(&self, a: f64) -> Vec<Vec<f64>> {
        let s = self.n_states();
        (0..s)
            .map(|i| {
                let mut row: Vec<f64> = (0..s)
                    .map(|j| (-a * (self.levels[i] - self.levels[j]).abs()).exp())
                    .collect();
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= z);
                row
            })
            .collect()
    }

    pub fn init_dist(&self) -> Vec<f64> {
        vec![1.0 / self.n_states() as f64; self.n_states()]
    }

    /// Exact log-likelihood of `ys` at parameter `a` by the forward
    /// recursion, matching the particle filter's time convention (the state
    /// is propagated once before the first observation).
    pub fn exact_loglik(&self, a: f64, ys: &[f64]) -> f64 {
        let m = self.transition_matrix(a);
        let s = self.n_states();
        let mut alpha = self.init_dist();
        let mut loglik = 0.0;
        for &y in ys {
            let mut pred = vec![0.0; s];
            for i in 0..s {
                for j in 0..s {
                    pred[j] += alpha[i] * m[i][j];
                }
            }
            for (j, p) in pred.iter_mut().enumerate() {
                *p *= (normal_logpdf(y, self.levels[j], self.obs_sd * self.obs_sd)).exp();
            }
            let z: f64 = pred.iter().sum();
            loglik += z.ln();
            alpha = pred.iter().map(|p| p / z).collect();
        }
        loglik
    }

    /// Posterior mean of `a` given `ys` under the Exponential(1) prior,
    /// by trapezoid quadrature on a dense grid.
    pub fn exact_posterior_mean(&self, ys: &[f64], a_max: f64, grid: usize) -> f64 {
        let step = a_max / grid as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut logps: Vec<(f64, f64)> = Vec::with_capacity(grid);
        for k in 1..=grid {
            let a = step * k as f64;
            logps.push((a, -a + self.exact_loglik(a, ys)));
        }
        let max = logps.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        for (i, &(a, lp)) in logps.iter().enumerate() {
            let w = if i == 0 || i == logps.len() - 1 { 0.5 } else { 1.0 };
            let p = (lp - max).exp() * w;
            num += a * p;
            den += p;
        }
        num / den
    }
}

/// Simulates a label path and observation series of length `n` at
/// stickiness `a`, matching the filter's time convention (one transition
/// before the first observation).
pub fn finite_simulate(
    model: &FiniteSsm,
    a: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<f64>) {
    let theta = [a];
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n);
    xs.push(model.init_sample(&theta, rng));
    for k in 1..=n {
        let x = model.transition_sample(&theta, &xs[k - 1], rng);
        let e: f64 = rand_distr::StandardNormal.sample(rng);
        ys.push(model.levels[x] + model.obs_sd * e);
        xs.push(x);
    }
    (xs, ys)
}

impl StateSpaceModel for FiniteSsm {
    type State = usize;

    fn dim_theta(&self) -> usize {
        1
    }

    fn prior_logdensity(&self, theta: &[f64]) -> f64 {
        if theta[0] <= 0.0 {
            f64::NEG_INFINITY
        } else {
            -theta[0]
        }
    }

    fn prior_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![Exp::new(1.0).unwrap().sample(rng)]
    }

    fn init_sample(&self, _theta: &[f64], rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(0..self.n_states())
    }

    fn init_logdensity(&self, _theta: &[f64], _x: &usize) -> Option<f64> {
        Some(-(self.n_states() as f64).ln())
    }

    fn transition_sample(&self, theta: &[f64], x: &usize, rng: &mut ChaCha8Rng) -> usize {
        let row = &self.transition_matrix(theta[0])[*x];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u <= acc {
                return j;
            }
        }
        self.n_states() - 1
    }

    fn has_transition_logdensity(&self) -> bool {
        true
    }

    fn transition_logdensity(&self, theta: &[f64], x: &usize, x2: &usize) -> Option<f64> {
        Some(self.transition_matrix(theta[0])[*x][*x2].ln())
    }

    fn obs_logdensity(&self, _theta: &[f64], x: &usize, y: f64) -> f64 {
        normal_logpdf(y, self.levels[*x], self.obs_sd * self.obs_sd)
    }

    fn to_unconstrained(&self, theta: &[f64]) -> Vec<f64> {
        vec![theta[0].ln()]
    }

    fn from_unconstrained(&self, z: &[f64]) -> Vec<f64> {
        vec![z[0].exp()]
    }

    fn log_jacobian(&self, z: &[f64]) -> f64 {
        z[0]
    }

    fn state_summary(&self, x: &usize) -> f64 {
        self.levels[*x]
    }
}
