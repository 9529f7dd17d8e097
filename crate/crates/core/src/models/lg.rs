//! Scalar linear-Gaussian model: random-walk hidden state observed in
//! Gaussian noise, parameterized by precisions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    exp1_prior_logdensity, exp_log_jacobian, exp_transform, log_transform, normal_logpdf,
    StateSpaceModel,
};
use crate::error::{Error, Result};

/// Precisions of the linear-Gaussian model: `x0 ~ N(0, 1/tau0)`,
/// `x' | x ~ N(x, 1/tau)`, `y | x ~ N(x, 1/lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianParams {
    pub tau0: f64,
    pub tau: f64,
    pub lambda: f64,
}

impl LinearGaussianParams {
    pub fn new(tau0: f64, tau: f64, lambda: f64) -> Result<Self> {
        if !(tau0 > 0.0 && tau > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "precisions must be strictly positive, got tau0={tau0}, tau={tau}, lambda={lambda}"
            )));
        }
        Ok(Self { tau0, tau, lambda })
    }
}

/// Linear-Gaussian state-space model with `tau0` fixed and
/// `theta = (tau, lambda)` estimated.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    pub tau0: f64,
}

pub fn lg_model(params: LinearGaussianParams) -> Result<(LinearGaussian, Vec<f64>)> {
    // Returns the model together with theta = (tau, lambda) on the natural scale.
    Ok((LinearGaussian { tau0: params.tau0 }, vec![params.tau, params.lambda]))
}

impl StateSpaceModel for LinearGaussian {
    type State = f64;

    fn dim_theta(&self) -> usize {
        2
    }

    fn prior_logdensity(&self, theta: &[f64]) -> f64 {
        exp1_prior_logdensity(theta)
    }

    fn prior_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        vec![-u1.ln(), -u2.ln()]
    }

    fn init_sample(&self, _theta: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        e / self.tau0.sqrt()
    }

    fn init_logdensity(&self, _theta: &[f64], x: &f64) -> Option<f64> {
        Some(normal_logpdf(*x, 0.0, 1.0 / self.tau0))
    }

    fn transition_sample(&self, theta: &[f64], x: &f64, rng: &mut ChaCha8Rng) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        x + e / theta[0].sqrt()
    }

    fn has_transition_logdensity(&self) -> bool {
        true
    }

    fn transition_logdensity(&self, theta: &[f64], x: &f64, x2: &f64) -> Option<f64> {
        Some(normal_logpdf(*x2, *x, 1.0 / theta[0]))
    }

    fn obs_logdensity(&self, theta: &[f64], x: &f64, y: f64) -> f64 {
        normal_logpdf(y, *x, 1.0 / theta[1])
    }

    fn to_unconstrained(&self, theta: &[f64]) -> Vec<f64> {
        log_transform(theta)
    }

    fn from_unconstrained(&self, z: &[f64]) -> Vec<f64> {
        exp_transform(z)
    }

    fn log_jacobian(&self, z: &[f64]) -> f64 {
        exp_log_jacobian(z)
    }

    fn state_summary(&self, x: &f64) -> f64 {
        *x
    }

    fn default_blocks(&self) -> Vec<Vec<usize>> {
        vec![vec![0], vec![1]]
    }
}

/// Draws a hidden path `x_{0..n}` and observations `y_{1..n}` from the joint
/// density of the model.
pub fn lg_simulate(
    params: LinearGaussianParams,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    LinearGaussianParams::new(params.tau0, params.tau, params.lambda)?;
    let sd0 = params.tau0.sqrt().recip();
    let sd_x = params.tau.sqrt().recip();
    let sd_y = params.lambda.sqrt().recip();
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n);
    let e: f64 = StandardNormal.sample(rng);
    xs.push(e * sd0);
    for k in 1..=n {
        let e: f64 = StandardNormal.sample(rng);
        let x = xs[k - 1] + e * sd_x;
        let e: f64 = StandardNormal.sample(rng);
        ys.push(x + e * sd_y);
        xs.push(x);
    }
    Ok((xs, ys))
}
