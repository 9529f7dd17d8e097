//! Fixed-window online driver.
//!
//! Observations are consumed in blocks of a fixed length. Within a block
//! the outer sampler runs unchanged; at a block boundary the cloud is
//! resampled by its accumulated weights, the pairs (unconstrained theta,
//! terminal state particle) are collected into a kernel-density bridge, and
//! the next block restarts every particle from that bridge. Memory and
//! per-step cost therefore stay bounded in the length of the series.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::kde::{bandwidth_rule_a3, KdeBridge};
use crate::models::StateSpaceModel;
use crate::particle::PfState;
use crate::smc2::{InnerFilter, PmmhProposal, Smc2Config, Smc2Sampler};

/// Bandwidth of the bridge kernel on the unconstrained theta scale.
#[derive(Debug, Clone, Copy)]
pub enum BandwidthSpec {
    Fixed(f64),
    /// `N^(-1/(2(d+1)))`, the consistency-regime rule.
    RuleA3,
}

impl BandwidthSpec {
    pub fn value(&self, n_theta: usize, dim: usize) -> f64 {
        match *self {
            BandwidthSpec::Fixed(h) => h,
            BandwidthSpec::RuleA3 => bandwidth_rule_a3(n_theta, dim),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FwConfig {
    pub base: Smc2Config,
    /// Observations per block.
    pub window_len: usize,
    pub bandwidth: BandwidthSpec,
    /// Transition samples per state particle for the one-step-ahead
    /// prediction; zero disables prediction.
    pub predict_samples: usize,
    /// When false, wall-clock fields of the records are reported as zero so
    /// runs are byte-for-byte reproducible.
    pub emit_timing: bool,
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.window_len < 1 {
            return Err(Error::InvalidConfig("window_len must be >= 1".into()));
        }
        if let BandwidthSpec::Fixed(h) = self.bandwidth {
            if !(h > 0.0) {
                return Err(Error::InvalidConfig("bandwidth must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Everything the driver reports about one absorbed observation.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub time: usize,
    pub block: usize,
    pub log_evidence: f64,
    pub theta_mean: Vec<f64>,
    pub theta_sd: Vec<f64>,
    /// Posterior mean of the filtered state summary.
    pub state_mean: f64,
    /// One-step-ahead predicted state summary, made before absorbing this
    /// observation.
    pub prediction: Option<f64>,
    /// ESS before any resampling at this step.
    pub ess: f64,
    pub rejuvenated: bool,
    /// Transition samples drawn during this step, across all particles.
    pub transition_draws: u64,
    pub millis: f64,
}

/// Resamples the cloud by its current weights and collects the bridge
/// support: each particle's unconstrained theta paired with the terminal
/// state of its filter. Fails for filters that carry no state particles.
pub fn extract_bridge<M: StateSpaceModel, F: InnerFilter<M>>(
    sampler: &mut Smc2Sampler<'_, M, F>,
    bandwidth: BandwidthSpec,
) -> Result<KdeBridge<M::State>> {
    sampler.final_resample()?;
    let mut thetas = Vec::with_capacity(sampler.state.n());
    let mut states = Vec::with_capacity(sampler.state.n());
    for p in &sampler.state.particles {
        let x = p.filter.terminal_state().ok_or_else(|| {
            Error::InvalidConfig("inner filter has no state particles to bridge".into())
        })?;
        thetas.push(p.theta_u.clone());
        states.push(x);
    }
    let h = bandwidth.value(thetas.len(), sampler.model.dim_theta());
    Ok(KdeBridge::new(thetas, states, h))
}

/// One fixed-window run in progress. The first block is an ordinary
/// full-history sampler start; later blocks are bridge restarts.
pub struct FwRunner<'a, M: StateSpaceModel> {
    pub sampler: Smc2Sampler<'a, M, PfState<M::State>>,
    pub config: FwConfig,
    pub block: usize,
    steps_in_block: usize,
}

impl<'a, M: StateSpaceModel> FwRunner<'a, M> {
    pub fn init(
        model: &'a M,
        config: FwConfig,
        proposal: PmmhProposal,
        y_first: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let sampler = Smc2Sampler::init(model, config.base, proposal, y_first, seed)?;
        Ok(Self { sampler, config, block: 1, steps_in_block: 1 })
    }

    /// Absorbs the next observation, rolling to a new block when the current
    /// one is full. Returns the per-step record.
    pub fn step(&mut self, y: f64) -> Result<StepRecord> {
        let started = Instant::now();
        let prediction = if self.config.predict_samples > 0 {
            Some(self.sampler.predict(self.config.predict_samples)?)
        } else {
            None
        };
        let (ess, rejuvenated, draws) = if self.steps_in_block == self.config.window_len {
            let bridge = extract_bridge(&mut self.sampler, self.config.bandwidth)?;
            self.sampler.start_block(bridge, y)?;
            self.block += 1;
            self.steps_in_block = 1;
            let draws = self.config.base.n_theta as u64 * self.config.base.n_x as u64;
            let (ess, moved, move_draws) = self.sampler.maybe_rejuvenate()?;
            (ess, moved, draws + move_draws)
        } else {
            let stats = self.sampler.step(y)?;
            self.steps_in_block += 1;
            (stats.ess, stats.rejuvenated, stats.transition_draws)
        };
        debug_assert!(self.sampler.window.len() <= self.config.window_len);
        self.record(prediction, ess, rejuvenated, draws, started)
    }

    fn record(
        &self,
        prediction: Option<f64>,
        ess: f64,
        rejuvenated: bool,
        transition_draws: u64,
        started: Instant,
    ) -> Result<StepRecord> {
        let (theta_mean, theta_sd) = self.sampler.theta_mean_sd()?;
        Ok(StepRecord {
            time: self.sampler.state.time,
            block: self.block,
            log_evidence: self.sampler.state.log_evidence,
            theta_mean,
            theta_sd,
            state_mean: self.sampler.state_mean()?,
            prediction,
            ess,
            rejuvenated,
            transition_draws,
            millis: if self.config.emit_timing {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        })
    }

    fn first_record(&self) -> Result<StepRecord> {
        let (theta_mean, theta_sd) = self.sampler.theta_mean_sd()?;
        Ok(StepRecord {
            time: 1,
            block: 1,
            log_evidence: self.sampler.state.log_evidence,
            theta_mean,
            theta_sd,
            state_mean: self.sampler.state_mean()?,
            prediction: None,
            ess: self.sampler.state.weights().map(|w| crate::particle::ess(&w))?,
            rejuvenated: false,
            transition_draws: self.config.base.n_theta as u64
                * self.config.base.n_x as u64,
            millis: 0.0,
        })
    }
}

/// Runs the fixed-window algorithm over a whole series, one record per
/// observation.
pub fn run_online<'a, M: StateSpaceModel>(
    model: &'a M,
    config: FwConfig,
    proposal: PmmhProposal,
    ys: &[f64],
    seed: u64,
) -> Result<(FwRunner<'a, M>, Vec<StepRecord>)> {
    if ys.is_empty() {
        return Err(Error::InvalidConfig("need at least one observation".into()));
    }
    let mut runner = FwRunner::init(model, config, proposal, ys[0], seed)?;
    let mut records = Vec::with_capacity(ys.len());
    records.push(runner.first_record()?);
    for &y in &ys[1..] {
        records.push(runner.step(y)?);
    }
    Ok((runner, records))
}

/// Runs the full-history sampler over a whole series with the same record
/// format (block stays 1); the baseline the windowed runs are compared to.
pub fn run_full_online<'a, M: StateSpaceModel, F: InnerFilter<M>>(
    model: &'a M,
    config: FwConfig,
    proposal: PmmhProposal,
    ys: &[f64],
    seed: u64,
) -> Result<(Smc2Sampler<'a, M, F>, Vec<StepRecord>)> {
    if ys.is_empty() {
        return Err(Error::InvalidConfig("need at least one observation".into()));
    }
    config.base.validate()?;
    let mut sampler: Smc2Sampler<'a, M, F> =
        Smc2Sampler::init(model, config.base, proposal, ys[0], seed)?;
    let mut records = Vec::with_capacity(ys.len());
    let push = |s: &Smc2Sampler<'a, M, F>,
                prediction: Option<f64>,
                ess_val: f64,
                rejuvenated: bool,
                draws: u64,
                started: Instant,
                records: &mut Vec<StepRecord>|
     -> Result<()> {
        let (theta_mean, theta_sd) = s.theta_mean_sd()?;
        records.push(StepRecord {
            time: s.state.time,
            block: 1,
            log_evidence: s.state.log_evidence,
            theta_mean,
            theta_sd,
            state_mean: s.state_mean()?,
            prediction,
            ess: ess_val,
            rejuvenated,
            transition_draws: draws,
            millis: if config.emit_timing {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
        Ok(())
    };
    let t0 = Instant::now();
    let init_ess = sampler.state.weights().map(|w| crate::particle::ess(&w))?;
    push(
        &sampler,
        None,
        init_ess,
        false,
        config.base.n_theta as u64 * config.base.n_x as u64,
        t0,
        &mut records,
    )?;
    for &y in &ys[1..] {
        let started = Instant::now();
        let prediction = if config.predict_samples > 0 {
            Some(sampler.predict(config.predict_samples)?)
        } else {
            None
        };
        let stats = sampler.step(y)?;
        push(
            &sampler,
            prediction,
            stats.ess,
            stats.rejuvenated,
            stats.transition_draws,
            started,
            &mut records,
        )?;
    }
    Ok((sampler, records))
}
