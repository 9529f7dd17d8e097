//! Exact filtering and predictive likelihood for the scalar linear-Gaussian
//! model. Serves as the unbiased reference the particle filter is checked
//! against.

use crate::error::Result;
use crate::models::{normal_logpdf, LinearGaussianParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    /// Filtered posterior mean of the current hidden state.
    pub mean: f64,
    /// Filtered posterior variance, strictly positive.
    pub variance: f64,
    pub step: usize,
    /// Running sum of log p(y_k | y_{1:k-1}).
    pub cum_loglik: f64,
}

pub fn kalman_init(params: LinearGaussianParams) -> Result<KalmanState> {
    LinearGaussianParams::new(params.tau0, params.tau, params.lambda)?;
    Ok(KalmanState { mean: 0.0, variance: 1.0 / params.tau0, step: 0, cum_loglik: 0.0 })
}

/// One predict/update cycle for the random-walk plus noise model.
pub fn kalman_step(state: KalmanState, params: LinearGaussianParams, y: f64) -> KalmanState {
    let pred_mean = state.mean;
    let pred_var = state.variance + 1.0 / params.tau;
    let innov_var = pred_var + 1.0 / params.lambda;
    let gain = pred_var / innov_var;
    KalmanState {
        mean: pred_mean + gain * (y - pred_mean),
        variance: (1.0 - gain) * pred_var,
        step: state.step + 1,
        cum_loglik: state.cum_loglik + normal_logpdf(y, pred_mean, innov_var),
    }
}

/// Total log-likelihood of a series; a fold of [`kalman_step`].
pub fn kalman_loglik(params: LinearGaussianParams, ys: &[f64]) -> Result<f64> {
    let mut state = kalman_init(params)?;
    for &y in ys {
        state = kalman_step(state, params, y);
    }
    Ok(state.cum_loglik)
}

/// Filtered means for a whole series, used as the state-estimate oracle.
pub fn kalman_filter_means(params: LinearGaussianParams, ys: &[f64]) -> Result<Vec<f64>> {
    let mut state = kalman_init(params)?;
    let mut means = Vec::with_capacity(ys.len());
    for &y in ys {
        state = kalman_step(state, params, y);
        means.push(state.mean);
    }
    Ok(means)
}
