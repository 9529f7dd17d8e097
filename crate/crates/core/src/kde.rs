//! Gaussian kernel-density bridge between observation blocks.
//!
//! The bridge carries the end-of-block support pairs (theta on the
//! unconstrained scale, terminal state particle) and a per-coordinate
//! bandwidth. It is the sampled surrogate for the exact block-initialization
//! density: new theta values are kernel perturbations of support points and
//! new state particles are one-step transitions from support states.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::models::{StateSpaceModel, LN_2PI};
use crate::particle::logsumexp;

#[derive(Debug, Clone)]
pub struct KdeBridge<S> {
    /// Support pairs: unconstrained theta and terminal state of each
    /// theta-particle at the end of the previous block.
    pub thetas: Vec<Vec<f64>>,
    pub states: Vec<S>,
    /// Kernel standard deviation per unconstrained coordinate.
    pub bandwidth: f64,
}

impl<S> KdeBridge<S> {
    pub fn new(thetas: Vec<Vec<f64>>, states: Vec<S>, bandwidth: f64) -> Self {
        assert!(!thetas.is_empty() && thetas.len() == states.len());
        assert!(bandwidth > 0.0, "bandwidth must be positive");
        assert!(thetas.iter().all(|t| t.iter().all(|v| v.is_finite())));
        Self { thetas, states, bandwidth }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].len()
    }
}

/// The consistency-regime bandwidth `h = N^(-1/(2(d+1)))`.
pub fn bandwidth_rule_a3(n: usize, d: usize) -> f64 {
    assert!(n >= 1 && d >= 1);
    (n as f64).powf(-1.0 / (2.0 * (d + 1) as f64))
}

/// Draws theta from the kernel mixture: a uniform support index `j`, then
/// `theta = theta_j + h * eps` with standard Gaussian `eps`. Returns the
/// sampled theta (unconstrained scale) and the chosen index.
pub fn kde_sample_theta<S>(bridge: &KdeBridge<S>, rng: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
    let j = rng.gen_range(0..bridge.len());
    let theta = bridge.thetas[j]
        .iter()
        .map(|&t| {
            let e: f64 = StandardNormal.sample(rng);
            t + bridge.bandwidth * e
        })
        .collect();
    (theta, j)
}

/// Log of the theta-marginal of the bridge, `log[(1/N) sum_j K_h(theta -
/// theta_j)]`, evaluated by log-sum-exp in O(N d).
pub fn kde_marginal_logdensity<S>(bridge: &KdeBridge<S>, theta: &[f64]) -> f64 {
    let d = bridge.dim() as f64;
    let h = bridge.bandwidth;
    let log_norm = -d * h.ln() - 0.5 * d * LN_2PI;
    let terms: Vec<f64> = bridge
        .thetas
        .iter()
        .map(|tj| {
            let q: f64 = theta
                .iter()
                .zip(tj)
                .map(|(a, b)| {
                    let z = (a - b) / h;
                    z * z
                })
                .sum();
            log_norm - 0.5 * q
        })
        .collect();
    logsumexp(&terms) - (bridge.len() as f64).ln()
}

/// Draws one state particle for the new block: a uniform support index, then
/// one transition step from that support state. `theta` is on the natural
/// scale.
pub fn bridge_sample_state<M: StateSpaceModel>(
    bridge: &KdeBridge<M::State>,
    theta: &[f64],
    model: &M,
    rng: &mut ChaCha8Rng,
) -> M::State {
    let j = rng.gen_range(0..bridge.len());
    model.transition_sample(theta, &bridge.states[j], rng)
}
