//! The outer sequential sampler over theta-particles.
//!
//! Each theta-particle carries an inner likelihood filter: a bootstrap
//! particle filter for the general algorithm, or an exact Kalman recursion
//! for the linear-Gaussian baseline. Reweighting follows the incremental
//! averaged potential, resampling is triggered by the effective sample size
//! and rejuvenation applies particle marginal Metropolis-Hastings moves with
//! a freshly built filter per proposal.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kalman::{kalman_init, kalman_step, KalmanState};
use crate::kde::{bridge_sample_state, kde_marginal_logdensity, KdeBridge};
use crate::models::{LinearGaussian, LinearGaussianParams, StateSpaceModel};
use crate::particle::{
    ess, logsumexp, pf_from_particles, pf_init, pf_step, resample_systematic, PfState, Weights,
};
use crate::rngstream::{derive_rng, master_rng};

/// Per-theta-particle likelihood tracker.
pub trait InnerFilter<M: StateSpaceModel>: Clone + Send + Sync + Sized {
    /// Fresh filter from the model's initial law, absorbing `y_first`.
    fn fresh(
        model: &M,
        theta: &[f64],
        n_x: usize,
        y_first: f64,
        retain_paths: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self>;

    /// Fresh filter whose state particles are one-step transitions from
    /// bridge support states, absorbing the first observation of the block.
    fn fresh_from_bridge(
        model: &M,
        bridge: &KdeBridge<M::State>,
        theta: &[f64],
        n_x: usize,
        y_first: f64,
        retain_paths: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self>;

    /// Absorbs the next observation; returns the log incremental potential.
    fn step(&mut self, model: &M, theta: &[f64], y: f64, rng: &mut ChaCha8Rng) -> Result<f64>;

    /// Sum of log potentials since the filter was built (the window
    /// log-likelihood estimate).
    fn window_loglik(&self) -> f64;

    /// Filtered mean of the model's state summary.
    fn filtered_summary(&self, model: &M) -> f64;

    /// One-step-ahead predicted state summary, `m` transition samples per
    /// state particle (exact for closed-form filters).
    fn predict_summary(&self, model: &M, theta: &[f64], m: usize, rng: &mut ChaCha8Rng) -> f64;

    /// Terminal state particle for bridge extraction, if the filter carries
    /// state particles.
    fn terminal_state(&self) -> Option<M::State>;

    fn transition_draws(&self) -> u64;

    /// Number of window steps of retained trajectory.
    fn retained_len(&self) -> usize;
}

impl<M: StateSpaceModel> InnerFilter<M> for PfState<M::State>
where
    M::State: Clone + Send + Sync,
{
    fn fresh(
        model: &M,
        theta: &[f64],
        n_x: usize,
        y_first: f64,
        retain_paths: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        pf_init(model, theta, n_x, Some(y_first), retain_paths, rng)
    }

    fn fresh_from_bridge(
        model: &M,
        bridge: &KdeBridge<M::State>,
        theta: &[f64],
        n_x: usize,
        y_first: f64,
        retain_paths: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let particles: Vec<M::State> =
            (0..n_x).map(|_| bridge_sample_state(bridge, theta, model, rng)).collect();
        let mut pf = pf_from_particles(model, theta, particles, y_first, retain_paths);
        pf.transition_draws += n_x as u64;
        Ok(pf)
    }

    fn step(&mut self, model: &M, theta: &[f64], y: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        pf_step(self, model, theta, y, rng)
    }

    fn window_loglik(&self) -> f64 {
        self.cum_loglik
    }

    fn filtered_summary(&self, model: &M) -> f64 {
        self.weighted_mean(|x| model.state_summary(x))
    }

    fn predict_summary(&self, model: &M, theta: &[f64], m: usize, rng: &mut ChaCha8Rng) -> f64 {
        let max = self.last_obs_logg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, &lg) in self.particles.iter().zip(&self.last_obs_logg) {
            let w = (lg - max).exp();
            let mut acc = 0.0;
            for _ in 0..m {
                acc += model.state_summary(&model.transition_sample(theta, x, rng));
            }
            num += w * acc / m as f64;
            den += w;
        }
        num / den
    }

    fn terminal_state(&self) -> Option<M::State> {
        Some(self.particles[0].clone())
    }

    fn transition_draws(&self) -> u64 {
        self.transition_draws
    }

    fn retained_len(&self) -> usize {
        PfState::retained_len(self)
    }
}

/// Models whose likelihood is exactly computable by the scalar Kalman
/// recursion: scalar state, theta = (transition precision, observation
/// precision), fixed initial precision.
pub trait GaussianPrecisionModel: StateSpaceModel<State = f64> {
    fn tau0(&self) -> f64;
}

impl GaussianPrecisionModel for LinearGaussian {
    fn tau0(&self) -> f64 {
        self.tau0
    }
}

/// Exact-likelihood inner filter for the linear-Gaussian model; replacing
/// the particle filter with this yields a regular SMC (IBIS) algorithm.
#[derive(Debug, Clone)]
pub struct KalmanInner {
    pub state: KalmanState,
    tau0: f64,
}

impl KalmanInner {
    fn params(&self, theta: &[f64]) -> LinearGaussianParams {
        LinearGaussianParams { tau0: self.tau0, tau: theta[0], lambda: theta[1] }
    }
}

impl<M: GaussianPrecisionModel> InnerFilter<M> for KalmanInner {
    fn fresh(
        model: &M,
        theta: &[f64],
        _n_x: usize,
        y_first: f64,
        _retain_paths: bool,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let params =
            LinearGaussianParams { tau0: model.tau0(), tau: theta[0], lambda: theta[1] };
        let mut inner = KalmanInner { state: kalman_init(params)?, tau0: model.tau0() };
        inner.state = kalman_step(inner.state, params, y_first);
        Ok(inner)
    }

    fn fresh_from_bridge(
        _model: &M,
        _bridge: &KdeBridge<f64>,
        _theta: &[f64],
        _n_x: usize,
        _y_first: f64,
        _retain_paths: bool,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Err(Error::InvalidConfig(
            "the exact-likelihood filter runs full-history only; no bridge mode".into(),
        ))
    }

    fn step(&mut self, _model: &M, theta: &[f64], y: f64, _rng: &mut ChaCha8Rng) -> Result<f64> {
        let before = self.state.cum_loglik;
        self.state = kalman_step(self.state, self.params(theta), y);
        Ok(self.state.cum_loglik - before)
    }

    fn window_loglik(&self) -> f64 {
        self.state.cum_loglik
    }

    fn filtered_summary(&self, _model: &M) -> f64 {
        self.state.mean
    }

    fn predict_summary(&self, _model: &M, _theta: &[f64], _m: usize, _rng: &mut ChaCha8Rng) -> f64 {
        // Random-walk transition is mean preserving.
        self.state.mean
    }

    fn terminal_state(&self) -> Option<f64> {
        None
    }

    fn transition_draws(&self) -> u64 {
        0
    }

    fn retained_len(&self) -> usize {
        0
    }
}

/// Random-walk proposal on the unconstrained scale, partitioned into blocks
/// updated one at a time.
#[derive(Debug, Clone)]
pub struct PmmhProposal {
    pub blocks: Vec<Vec<usize>>,
    /// Standard deviation per coordinate of each block.
    pub scales: Vec<Vec<f64>>,
    pub adapt: bool,
}

impl PmmhProposal {
    pub fn new(blocks: Vec<Vec<usize>>, initial_scale: f64, adapt: bool) -> Self {
        let scales = blocks.iter().map(|b| vec![initial_scale; b.len()]).collect();
        Self { blocks, scales, adapt }
    }
}

pub const SCALE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RejuvenationRecord {
    pub time: usize,
    pub acceptance_rate: f64,
    pub millis: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Smc2Config {
    pub n_theta: usize,
    pub n_x: usize,
    /// Resample and rejuvenate when ESS < ess_threshold * N.
    pub ess_threshold: f64,
    pub pmmh_sweeps: usize,
    /// Theory-matching variant: resample and move at every step.
    pub resample_every_step: bool,
    pub retain_paths: bool,
}

impl Smc2Config {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 1 || self.n_x < 1 {
            return Err(Error::InvalidConfig("particle counts must be >= 1".into()));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) && !self.resample_every_step {
            return Err(Error::InvalidConfig("ess_threshold must be in (0, 1]".into()));
        }
        if self.pmmh_sweeps < 1 {
            return Err(Error::InvalidConfig("pmmh_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for Smc2Config {
    fn default() -> Self {
        Self {
            n_theta: 100,
            n_x: 100,
            ess_threshold: 0.5,
            pmmh_sweeps: 1,
            resample_every_step: false,
            retain_paths: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThetaParticle<F> {
    /// Natural-scale parameter.
    pub theta: Vec<f64>,
    /// Unconstrained-scale image, kept in lockstep.
    pub theta_u: Vec<f64>,
    pub filter: F,
}

#[derive(Debug, Clone)]
pub struct Smc2State<F> {
    pub particles: Vec<ThetaParticle<F>>,
    /// Unnormalized log-weights including every absorbed potential.
    pub logw: Vec<f64>,
    pub time: usize,
    pub log_evidence: f64,
    pub rejuvenation_log: Vec<RejuvenationRecord>,
}

impl<F> Smc2State<F> {
    pub fn n(&self) -> usize {
        self.particles.len()
    }

    pub fn weights(&self) -> Result<Weights> {
        Weights::from_log(self.logw.clone(), self.time)
    }
}

/// Statistics of one outer step.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub ess: f64,
    pub evidence_increment: f64,
    pub rejuvenated: bool,
    pub transition_draws: u64,
}

/// The outer sampler: either full SMC2 (window = entire history, fresh
/// filters start from the model's initial law) or one block of the
/// fixed-window algorithm (window cleared at block boundaries, fresh filters
/// start from the kernel-density bridge).
pub struct Smc2Sampler<'a, M: StateSpaceModel, F: InnerFilter<M>> {
    pub model: &'a M,
    pub config: Smc2Config,
    pub proposal: PmmhProposal,
    pub state: Smc2State<F>,
    /// Observations of the current window, in order.
    pub window: Vec<f64>,
    /// Bridge from the previous block; `None` in full/first-block mode.
    pub bridge: Option<KdeBridge<M::State>>,
    seed: u64,
    epoch: u64,
    master: ChaCha8Rng,
}

impl<'a, M: StateSpaceModel, F: InnerFilter<M>> Smc2Sampler<'a, M, F> {
    /// Draws the initial theta-cloud from the prior and absorbs the first
    /// observation; outer weights start at the first log-potential.
    pub fn init(
        model: &'a M,
        config: Smc2Config,
        proposal: PmmhProposal,
        y_first: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let n = config.n_theta;
        let particles: Vec<ThetaParticle<F>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = derive_rng(seed, 0, i as u64);
                let theta = model.prior_sample(&mut rng);
                let theta_u = model.to_unconstrained(&theta);
                let filter = F::fresh(
                    model,
                    &theta,
                    config.n_x,
                    y_first,
                    config.retain_paths,
                    &mut rng,
                )?;
                Ok(ThetaParticle { theta, theta_u, filter })
            })
            .collect::<Result<_>>()?;
        let logw: Vec<f64> = particles.iter().map(|p| p.filter.window_loglik()).collect();
        let log_evidence = logsumexp(&logw) - (n as f64).ln();
        if !log_evidence.is_finite() {
            return Err(Error::DegenerateWeights { step: 1 });
        }
        Ok(Self {
            model,
            config,
            proposal,
            state: Smc2State {
                particles,
                logw,
                time: 1,
                log_evidence,
                rejuvenation_log: Vec::new(),
            },
            window: vec![y_first],
            bridge: None,
            seed,
            epoch: 0,
            master: master_rng(seed),
        })
    }

    fn next_epoch(&mut self) -> u64 {
        self.epoch += 1;
        self.epoch
    }

    /// Advances every particle by one observation, reweights, updates the
    /// evidence and rejuvenates on an ESS trigger.
    pub fn step(&mut self, y: f64) -> Result<StepStats> {
        let epoch = self.next_epoch();
        let seed = self.seed;
        let model = self.model;
        let potentials: Vec<f64> = self
            .state
            .particles
            .par_iter_mut()
            .enumerate()
            .zip(&self.state.logw)
            .map(|((i, p), &lw)| {
                if !lw.is_finite() {
                    // Dead particle: zero likelihood already.
                    return f64::NEG_INFINITY;
                }
                let mut rng = derive_rng(seed, epoch, i as u64);
                match p.filter.step(model, &p.theta, y, &mut rng) {
                    Ok(pot) => pot,
                    Err(_) => f64::NEG_INFINITY,
                }
            })
            .collect();
        let mut draws: u64 =
            self.state.particles.iter().map(|p| p.filter.transition_draws()).sum();

        let prev = Weights::from_log(self.state.logw.clone(), self.state.time)?;
        let evidence_increment = logsumexp(
            &potentials
                .iter()
                .zip(&prev.normalized)
                .map(|(&l, &w)| l + w.ln())
                .collect::<Vec<_>>(),
        );
        for (lw, l) in self.state.logw.iter_mut().zip(&potentials) {
            *lw += l;
        }
        self.state.time += 1;
        self.window.push(y);
        if !evidence_increment.is_finite() {
            return Err(Error::DegenerateWeights { step: self.state.time });
        }
        self.state.log_evidence += evidence_increment;

        let (ess_now, rejuvenated, moved_draws) = self.maybe_rejuvenate()?;
        draws += moved_draws;
        Ok(StepStats { ess: ess_now, evidence_increment, rejuvenated, transition_draws: draws })
    }

    /// Checks the ESS trigger and, when it fires, resamples the cloud and
    /// applies the PMMH rejuvenation sweeps. Returns the pre-resampling ESS,
    /// whether a move happened and the transition draws it cost.
    pub fn maybe_rejuvenate(&mut self) -> Result<(f64, bool, u64)> {
        let w = self.state.weights()?;
        let ess_now = ess(&w);
        let trigger = self.config.resample_every_step
            || ess_now < self.config.ess_threshold * self.state.n() as f64;
        if !trigger {
            return Ok((ess_now, false, 0));
        }
        if self.proposal.adapt {
            let scales = self.adapt_proposal();
            self.proposal.scales = scales;
        }
        self.resample(&w);
        let draws = self.rejuvenate()?;
        Ok((ess_now, true, draws))
    }

    fn resample(&mut self, w: &Weights) {
        let idx = resample_systematic(w, self.state.n(), &mut self.master);
        let new: Vec<ThetaParticle<F>> =
            idx.iter().map(|&i| self.state.particles[i].clone()).collect();
        self.state.particles = new;
        self.state.logw = vec![0.0; self.state.n()];
    }

    /// One or more PMMH sweeps on every particle. Returns the number of
    /// transition samples drawn by the fresh proposal filters.
    fn rejuvenate(&mut self) -> Result<u64> {
        let started = Instant::now();
        let epoch = self.next_epoch();
        let seed = self.seed;
        let model = self.model;
        let config = self.config;
        let proposal = &self.proposal;
        let window = &self.window;
        let bridge = self.bridge.as_ref();
        let results: Vec<(ThetaParticle<F>, usize, u64)> = self
            .state
            .particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = derive_rng(seed, epoch, i as u64);
                pmmh_kernel(p, model, window, proposal, bridge, config, &mut rng)
            })
            .collect();
        let mut accepts = 0usize;
        let mut draws = 0u64;
        let proposals =
            self.state.n() * self.config.pmmh_sweeps * self.proposal.blocks.len();
        let mut particles = Vec::with_capacity(results.len());
        for (p, acc, d) in results {
            accepts += acc;
            draws += d;
            particles.push(p);
        }
        self.state.particles = particles;
        self.state.rejuvenation_log.push(RejuvenationRecord {
            time: self.state.time,
            acceptance_rate: accepts as f64 / proposals.max(1) as f64,
            millis: started.elapsed().as_secs_f64() * 1e3,
        });
        Ok(draws)
    }

    /// Self-normalized posterior estimate of `phi(theta, filter)`.
    pub fn estimate<G: Fn(&[f64], &F) -> f64>(&self, phi: G) -> Result<f64> {
        let w = self.state.weights()?;
        Ok(self
            .state
            .particles
            .iter()
            .zip(&w.normalized)
            .map(|(p, &wi)| wi * phi(&p.theta, &p.filter))
            .sum())
    }

    /// Weighted posterior mean and standard deviation of each natural-scale
    /// theta coordinate.
    pub fn theta_mean_sd(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = self.state.weights()?;
        let d = self.model.dim_theta();
        let mut mean = vec![0.0; d];
        for (p, &wi) in self.state.particles.iter().zip(&w.normalized) {
            for k in 0..d {
                mean[k] += wi * p.theta[k];
            }
        }
        let mut var = vec![0.0; d];
        for (p, &wi) in self.state.particles.iter().zip(&w.normalized) {
            for k in 0..d {
                let dlt = p.theta[k] - mean[k];
                var[k] += wi * dlt * dlt;
            }
        }
        Ok((mean, var.into_iter().map(f64::sqrt).collect()))
    }

    /// Posterior mean of the filtered state summary.
    pub fn state_mean(&self) -> Result<f64> {
        let model = self.model;
        self.estimate(|_, f| f.filtered_summary(model))
    }

    /// One-step-ahead prediction of the state summary, `m` transition
    /// samples per state particle. Call before absorbing the next
    /// observation.
    pub fn predict(&mut self, m: usize) -> Result<f64> {
        let epoch = self.next_epoch();
        let seed = self.seed;
        let model = self.model;
        let w = self.state.weights()?;
        let vals: Vec<f64> = self
            .state
            .particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = derive_rng(seed, epoch, i as u64);
                p.filter.predict_summary(model, &p.theta, m, &mut rng)
            })
            .collect();
        Ok(vals.iter().zip(&w.normalized).map(|(v, &wi)| v * wi).sum())
    }

    /// Per-block proposal scales from the weighted empirical spread of the
    /// unconstrained theta-cloud: `2.38 / sqrt(block dim) * sd` per
    /// coordinate. Coordinates whose spread has collapsed keep their
    /// previous scale.
    pub fn adapt_proposal(&self) -> Vec<Vec<f64>> {
        let w = match self.state.weights() {
            Ok(w) => w,
            Err(_) => return self.proposal.scales.clone(),
        };
        let d = self.model.dim_theta();
        let mut mean = vec![0.0; d];
        for (p, &wi) in self.state.particles.iter().zip(&w.normalized) {
            for k in 0..d {
                mean[k] += wi * p.theta_u[k];
            }
        }
        let mut sd = vec![0.0; d];
        for (p, &wi) in self.state.particles.iter().zip(&w.normalized) {
            for k in 0..d {
                let dlt = p.theta_u[k] - mean[k];
                sd[k] += wi * dlt * dlt;
            }
        }
        let sd: Vec<f64> = sd.into_iter().map(f64::sqrt).collect();
        self.proposal
            .blocks
            .iter()
            .zip(&self.proposal.scales)
            .map(|(block, old)| {
                let factor = 2.38 / (block.len() as f64).sqrt();
                block
                    .iter()
                    .zip(old)
                    .map(|(&coord, &prev)| {
                        if sd[coord] > SCALE_FLOOR {
                            factor * sd[coord]
                        } else {
                            prev
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Resamples the whole cloud by its current weights (the block-final
    /// selection before bridge extraction) and resets weights to uniform.
    pub fn final_resample(&mut self) -> Result<()> {
        let w = self.state.weights()?;
        self.resample(&w);
        Ok(())
    }

    /// Starts a new window: replaces the bridge, clears the window
    /// observation buffer and re-initializes every particle from the bridge,
    /// absorbing the first observation of the new block.
    pub fn start_block(&mut self, bridge: KdeBridge<M::State>, y_first: f64) -> Result<()> {
        let epoch = self.next_epoch();
        let seed = self.seed;
        let model = self.model;
        let config = self.config;
        let particles: Vec<ThetaParticle<F>> = {
            let b = &bridge;
            (0..self.state.n())
                .into_par_iter()
                .map(|i| {
                    let mut rng = derive_rng(seed, epoch, i as u64);
                    let (theta_u, _) = crate::kde::kde_sample_theta(b, &mut rng);
                    let theta = model.from_unconstrained(&theta_u);
                    let filter = F::fresh_from_bridge(
                        model,
                        b,
                        &theta,
                        config.n_x,
                        y_first,
                        config.retain_paths,
                        &mut rng,
                    )?;
                    Ok(ThetaParticle { theta, theta_u, filter })
                })
                .collect::<Result<_>>()?
        };
        let logw: Vec<f64> = particles.iter().map(|p| p.filter.window_loglik()).collect();
        let prev_n = logw.len() as f64;
        let increment = logsumexp(&logw) - prev_n.ln();
        if !increment.is_finite() {
            return Err(Error::DegenerateWeights { step: self.state.time + 1 });
        }
        self.state.particles = particles;
        self.state.logw = logw;
        self.state.time += 1;
        self.state.log_evidence += increment;
        self.window = vec![y_first];
        self.bridge = Some(bridge);
        Ok(())
    }
}

/// One PMMH update of a single theta-particle: per proposal block, a
/// Gaussian random-walk move on the unconstrained coordinates with a fresh
/// inner filter over the window. In full mode the acceptance ratio carries
/// the prior (with Jacobian); in windowed mode it carries the bridge
/// theta-marginal raised to the number of state particles instead, matching
/// the theta-marginal of the windowed target. Returns the updated particle,
/// the number of accepted proposals and the transition draws spent.
pub fn pmmh_kernel<M: StateSpaceModel, F: InnerFilter<M>>(
    particle: &ThetaParticle<F>,
    model: &M,
    window: &[f64],
    proposal: &PmmhProposal,
    bridge: Option<&KdeBridge<M::State>>,
    config: Smc2Config,
    rng: &mut ChaCha8Rng,
) -> (ThetaParticle<F>, usize, u64) {
    assert!(!window.is_empty(), "pmmh window must be nonempty");
    let mut current = particle.clone();
    let mut accepts = 0usize;
    let mut draws = 0u64;
    let mut cur_loglik = current.filter.window_loglik();
    let mut cur_extra = pmmh_theta_factor(model, bridge, &current.theta, &current.theta_u);
    for _ in 0..config.pmmh_sweeps {
        for (block, scales) in proposal.blocks.iter().zip(&proposal.scales) {
            let mut theta_u = current.theta_u.clone();
            for (&coord, &scale) in block.iter().zip(scales) {
                let e: f64 = StandardNormal.sample(rng);
                theta_u[coord] += scale * e;
            }
            let theta = model.from_unconstrained(&theta_u);
            let extra = pmmh_theta_factor(model, bridge, &theta, &theta_u);
            if !extra.is_finite() {
                continue;
            }
            let fresh = run_window_filter::<M, F>(model, bridge, &theta, window, config, rng);
            let (filter, loglik) = match fresh {
                Ok(f) => {
                    draws += f.transition_draws();
                    let l = f.window_loglik();
                    (f, l)
                }
                Err(_) => continue,
            };
            let log_ratio = (extra - cur_extra) + (loglik - cur_loglik);
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            if u.ln() < log_ratio {
                current.theta = theta;
                current.theta_u = theta_u;
                current.filter = filter;
                cur_loglik = loglik;
                cur_extra = extra;
                accepts += 1;
            }
        }
    }
    (current, accepts, draws)
}

/// The theta-only factor of the acceptance ratio: log prior density on the
/// unconstrained scale in full mode; `log c(theta)` with `c` the bridge
/// theta-marginal in windowed mode. The state particles are re-proposed from
/// uniformly chosen bridge atoms, so their initial factor cancels between
/// target and proposal and only the theta-marginal of the bridge remains.
fn pmmh_theta_factor<M: StateSpaceModel>(
    model: &M,
    bridge: Option<&KdeBridge<M::State>>,
    theta: &[f64],
    theta_u: &[f64],
) -> f64 {
    match bridge {
        None => model.prior_logdensity(theta) + model.log_jacobian(theta_u),
        Some(b) => kde_marginal_logdensity(b, theta_u),
    }
}

/// Builds a fresh inner filter over a whole observation window.
fn run_window_filter<M: StateSpaceModel, F: InnerFilter<M>>(
    model: &M,
    bridge: Option<&KdeBridge<M::State>>,
    theta: &[f64],
    window: &[f64],
    config: Smc2Config,
    rng: &mut ChaCha8Rng,
) -> Result<F> {
    let mut filter = match bridge {
        None => F::fresh(model, theta, config.n_x, window[0], config.retain_paths, rng)?,
        Some(b) => F::fresh_from_bridge(
            model,
            b,
            theta,
            config.n_x,
            window[0],
            config.retain_paths,
            rng,
        )?,
    };
    for &y in &window[1..] {
        filter.step(model, theta, y, rng)?;
    }
    Ok(filter)
}
