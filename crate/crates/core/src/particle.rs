//! Bootstrap particle filter with ancestry, plus the weight, effective
//! sample size and resampling primitives shared with the outer sampler.
//!
//! All weight arithmetic is done in the log domain with max-subtraction;
//! potentials are stored as logs throughout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;

pub fn logsumexp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    max + sum.ln()
}

/// Unnormalized log-weights together with their normalized probabilities.
#[derive(Debug, Clone)]
pub struct Weights {
    pub logw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl Weights {
    pub fn from_log(logw: Vec<f64>, step: usize) -> Result<Self> {
        let lse = logsumexp(&logw);
        if !lse.is_finite() {
            return Err(Error::DegenerateWeights { step });
        }
        let normalized = logw.iter().map(|l| (l - lse).exp()).collect();
        Ok(Self { logw, normalized })
    }

    pub fn uniform(n: usize) -> Self {
        Self { logw: vec![0.0; n], normalized: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.logw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logw.is_empty()
    }
}

/// Effective sample size `1 / sum(w_i^2)`, in `[1, N]`.
pub fn ess(w: &Weights) -> f64 {
    1.0 / w.normalized.iter().map(|p| p * p).sum::<f64>()
}

/// `n_out` indices drawn i.i.d. from the weight distribution.
pub fn resample_multinomial(w: &Weights, n_out: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let cdf: Vec<f64> = w
        .normalized
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    (0..n_out)
        .map(|_| {
            let u: f64 = rng.gen();
            match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) | Err(i) => i.min(w.len() - 1),
            }
        })
        .collect()
}

/// Systematic (stratified with one common offset) resampling; the count of
/// each index differs from `n_out * w_i` by less than one.
pub fn resample_systematic(w: &Weights, n_out: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let u0: f64 = rng.gen::<f64>() / n_out as f64;
    let mut out = Vec::with_capacity(n_out);
    let mut acc = w.normalized[0];
    let mut i = 0usize;
    for k in 0..n_out {
        let u = u0 + k as f64 / n_out as f64;
        while u > acc && i + 1 < w.len() {
            i += 1;
            acc += w.normalized[i];
        }
        out.push(i);
    }
    out
}

/// One bootstrap particle filter over a window of observations.
#[derive(Debug, Clone)]
pub struct PfState<S> {
    pub particles: Vec<S>,
    /// log g(y_last | x^i) for the most recently absorbed observation;
    /// zeros before the first (the paper's g(y_0|x) = 1 convention).
    pub last_obs_logg: Vec<f64>,
    /// Per-step log of the averaged potential (1/N_x) sum_i g(y|x^i).
    pub step_logpotentials: Vec<f64>,
    /// Sum of the step log-potentials: the window log-likelihood estimate.
    pub cum_loglik: f64,
    /// Retained trajectory and ancestor indices, when enabled.
    pub history: Option<PfHistory<S>>,
    /// Count of transition samples drawn over the filter's lifetime.
    pub transition_draws: u64,
    pending_weight: bool,
}

#[derive(Debug, Clone)]
pub struct PfHistory<S> {
    pub paths: Vec<Vec<S>>,
    pub ancestors: Vec<Vec<usize>>,
}

impl<S> Default for PfHistory<S> {
    fn default() -> Self {
        Self { paths: Vec::new(), ancestors: Vec::new() }
    }
}

impl<S: Clone> PfState<S> {
    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }

    /// Number of window steps retained in history.
    pub fn retained_len(&self) -> usize {
        self.history.as_ref().map_or(0, |h| h.paths.len())
    }

    /// Inner-weighted mean of `f` over the current particles, weights
    /// proportional to the last absorbed observation density.
    pub fn weighted_mean<F: Fn(&S) -> f64>(&self, f: F) -> f64 {
        let max = self.last_obs_logg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, &lg) in self.particles.iter().zip(&self.last_obs_logg) {
            let w = (lg - max).exp();
            num += w * f(x);
            den += w;
        }
        num / den
    }
}

/// Initializes a filter from the model's initial law. If `y_first` is given
/// the filter is propagated one transition step and the observation absorbed,
/// so `cum_loglik` becomes the log of the first averaged potential.
pub fn pf_init<M: StateSpaceModel>(
    model: &M,
    theta: &[f64],
    n_x: usize,
    y_first: Option<f64>,
    retain_paths: bool,
    rng: &mut ChaCha8Rng,
) -> Result<PfState<M::State>> {
    assert!(n_x >= 1, "n_x must be >= 1");
    let particles: Vec<M::State> = (0..n_x).map(|_| model.init_sample(theta, rng)).collect();
    let mut state = PfState {
        last_obs_logg: vec![0.0; n_x],
        particles,
        step_logpotentials: Vec::new(),
        cum_loglik: 0.0,
        history: retain_paths.then(PfHistory::default),
        transition_draws: 0,
        pending_weight: false,
    };
    if let Some(y) = y_first {
        pf_extend(&mut state, model, theta, rng)?;
        pf_weight(&mut state, model, theta, y);
    }
    Ok(state)
}

/// Initializes a filter directly from externally supplied particles (used by
/// the block bridge) and absorbs the first observation of the new window.
pub fn pf_from_particles<M: StateSpaceModel>(
    model: &M,
    theta: &[f64],
    particles: Vec<M::State>,
    y_first: f64,
    retain_paths: bool,
) -> PfState<M::State> {
    let n_x = particles.len();
    let mut state = PfState {
        particles,
        last_obs_logg: vec![0.0; n_x],
        step_logpotentials: Vec::new(),
        cum_loglik: 0.0,
        history: retain_paths.then(PfHistory::default),
        transition_draws: 0,
        pending_weight: false,
    };
    if let Some(h) = state.history.as_mut() {
        h.paths.push(state.particles.clone());
        h.ancestors.push((0..n_x).collect());
    }
    state.pending_weight = true;
    pf_weight(&mut state, model, theta, y_first);
    state
}

/// The selection-propagation move: multinomial ancestors drawn with
/// probabilities proportional to the last observation density, then each
/// particle propagated through the transition. No new potential is recorded;
/// combined with [`pf_weight`] this is one full filter step.
pub fn pf_extend<M: StateSpaceModel>(
    state: &mut PfState<M::State>,
    model: &M,
    theta: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    debug_assert!(!state.pending_weight, "pf_extend called twice without pf_weight");
    let step = state.step_logpotentials.len();
    let w = Weights::from_log(state.last_obs_logg.clone(), step)?;
    let ancestors = resample_multinomial(&w, state.n_particles(), rng);
    let new: Vec<M::State> = ancestors
        .iter()
        .map(|&a| model.transition_sample(theta, &state.particles[a], rng))
        .collect();
    state.transition_draws += new.len() as u64;
    if let Some(h) = state.history.as_mut() {
        h.paths.push(new.clone());
        h.ancestors.push(ancestors);
    }
    state.particles = new;
    state.pending_weight = true;
    Ok(())
}

/// Absorbs an observation on the current particles: records the averaged
/// potential and updates the window log-likelihood.
pub fn pf_weight<M: StateSpaceModel>(
    state: &mut PfState<M::State>,
    model: &M,
    theta: &[f64],
    y: f64,
) -> f64 {
    let logg: Vec<f64> =
        state.particles.iter().map(|x| model.obs_logdensity(theta, x, y)).collect();
    let potential = logsumexp(&logg) - (state.n_particles() as f64).ln();
    state.last_obs_logg = logg;
    state.step_logpotentials.push(potential);
    state.cum_loglik += potential;
    state.pending_weight = false;
    potential
}

/// One full bootstrap step: select, propagate, absorb the next observation.
/// Returns the new log-potential.
pub fn pf_step<M: StateSpaceModel>(
    state: &mut PfState<M::State>,
    model: &M,
    theta: &[f64],
    y: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    pf_extend(state, model, theta, rng)?;
    Ok(pf_weight(state, model, theta, y))
}
