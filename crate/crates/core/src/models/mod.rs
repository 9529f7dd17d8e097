//! State-space model abstraction and the concrete models shipped with the
//! library: a scalar linear-Gaussian model, a Gamma-OU stochastic volatility
//! model with compound-Poisson jumps, and a small finite-state chain used to
//! validate the samplers against exact computations.

mod finite;
mod lg;
mod levy;

pub use finite::{finite_simulate, FiniteSsm};
pub use lg::{lg_model, lg_simulate, LinearGaussian, LinearGaussianParams};
pub use levy::{levy_simulate, levy_sv_model, levy_transition_given_jumps, LevySv, LevySvParams};

use rand_chacha::ChaCha8Rng;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Log-density of a Normal with the given mean and variance.
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// A parametric hidden-Markov model: initial law `nu`, transition `f`,
/// observation density `g`, all indexed by a static parameter vector.
///
/// Parameters live on two scales. The natural scale is whatever the model
/// defines (positive precisions, rates, ...); the unconstrained scale is its
/// image under [`to_unconstrained`](StateSpaceModel::to_unconstrained), on
/// which all random-walk proposals and kernel density estimates operate.
pub trait StateSpaceModel: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    fn dim_theta(&self) -> usize;

    /// Log prior density on the natural scale.
    fn prior_logdensity(&self, theta: &[f64]) -> f64;
    fn prior_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn init_sample(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Self::State;
    fn init_logdensity(&self, _theta: &[f64], _x: &Self::State) -> Option<f64> {
        None
    }

    fn transition_sample(&self, theta: &[f64], x: &Self::State, rng: &mut ChaCha8Rng)
        -> Self::State;
    /// Whether [`transition_logdensity`](StateSpaceModel::transition_logdensity)
    /// is available. Sampler-only models return false.
    fn has_transition_logdensity(&self) -> bool {
        false
    }
    fn transition_logdensity(&self, _theta: &[f64], _x: &Self::State, _x2: &Self::State)
        -> Option<f64> {
        None
    }

    fn obs_logdensity(&self, theta: &[f64], x: &Self::State, y: f64) -> f64;

    fn to_unconstrained(&self, theta: &[f64]) -> Vec<f64>;
    fn from_unconstrained(&self, z: &[f64]) -> Vec<f64>;

    /// log |d theta / d z| of the inverse transform, so that
    /// `prior_logdensity(theta(z)) + log_jacobian(z)` is the prior density
    /// on the unconstrained scale.
    fn log_jacobian(&self, z: &[f64]) -> f64;

    /// Scalar summary of a state for reporting (the filtered quantity the
    /// model considers primary, e.g. the hidden level or sigma^2).
    fn state_summary(&self, x: &Self::State) -> f64;

    /// Parameter blocks updated jointly in one Metropolis move.
    fn default_blocks(&self) -> Vec<Vec<usize>> {
        (0..self.dim_theta()).map(|i| vec![i]).collect()
    }
}

/// Componentwise log transform for all-positive parameter vectors, with the
/// independent Exponential(1) prior both concrete models use.
pub(crate) fn exp1_prior_logdensity(theta: &[f64]) -> f64 {
    if theta.iter().any(|&t| t <= 0.0) {
        return f64::NEG_INFINITY;
    }
    -theta.iter().sum::<f64>()
}

pub(crate) fn log_transform(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| t.ln()).collect()
}

pub(crate) fn exp_transform(z: &[f64]) -> Vec<f64> {
    z.iter().map(|z| z.exp()).collect()
}

/// Jacobian of theta = exp(z): sum of z.
pub(crate) fn exp_log_jacobian(z: &[f64]) -> f64 {
    z.iter().sum()
}
