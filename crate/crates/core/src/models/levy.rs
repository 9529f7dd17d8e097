//! Gamma-OU stochastic volatility with compound-Poisson jumps.
//!
//! The spot variance decays at rate `lambda` between jumps; jumps arrive at
//! rate `lambda * kappa` per unit time with Exponential(`delta`) sizes, so
//! the stationary marginal of sigma^2 is Gamma(shape `kappa`, rate `delta`).
//! The actual (integrated) variance over one observation interval is
//! `v = (sum of jump sizes - sigma2_new + sigma2_old) / lambda` and the
//! log-return is `y ~ N(gamma * v, v)`. The transition density has no closed
//! form; the model is sampler-only.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson, Uniform};

use super::{
    exp1_prior_logdensity, exp_log_jacobian, exp_transform, log_transform, normal_logpdf,
    StateSpaceModel,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevySvParams {
    pub kappa: f64,
    pub delta: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Observation interval; fixed to 1.
    pub delta_t: f64,
}

impl LevySvParams {
    pub fn new(kappa: f64, delta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(kappa > 0.0 && delta > 0.0 && gamma > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "all parameters must be strictly positive, got ({kappa}, {delta}, {gamma}, {lambda})"
            )));
        }
        Ok(Self { kappa, delta, gamma, lambda, delta_t: 1.0 })
    }
}

/// State of the volatility chain: spot variance at the end of the interval
/// and the integrated variance accumulated over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyState {
    pub sigma2: f64,
    /// Integrated variance over the interval ending at this state; zero at
    /// time zero, before any interval has elapsed.
    pub integrated: f64,
}

#[derive(Debug, Clone)]
pub struct LevySv {
    pub delta_t: f64,
}

pub fn levy_sv_model(params: LevySvParams) -> Result<(LevySv, Vec<f64>)> {
    Ok((
        LevySv { delta_t: params.delta_t },
        vec![params.kappa, params.delta, params.gamma, params.lambda],
    ))
}

/// Deterministic core of the transition: advances sigma^2 over one interval
/// given the realized jumps `(arrival time in [0, dt), size)`.
pub fn levy_transition_given_jumps(
    lambda: f64,
    dt: f64,
    sigma2: f64,
    jumps: &[(f64, f64)],
) -> LevyState {
    let mut s2 = (-lambda * dt).exp() * sigma2;
    let mut jump_sum = 0.0;
    for &(u, e) in jumps {
        s2 += (-lambda * (dt - u)).exp() * e;
        jump_sum += e;
    }
    let integrated = (jump_sum - s2 + sigma2) / lambda;
    LevyState { sigma2: s2, integrated }
}

impl LevySv {
    fn sample_transition(
        &self,
        theta: &[f64],
        sigma2: f64,
        rng: &mut ChaCha8Rng,
    ) -> LevyState {
        let (kappa, delta, lambda) = (theta[0], theta[1], theta[3]);
        let n = Poisson::new(lambda * kappa * self.delta_t)
            .expect("positive jump rate")
            .sample(rng) as usize;
        let mut jumps = Vec::with_capacity(n);
        let u = Uniform::new(0.0, self.delta_t);
        let e = Exp::new(delta).expect("positive jump-size rate");
        for _ in 0..n {
            jumps.push((u.sample(rng), e.sample(rng)));
        }
        levy_transition_given_jumps(lambda, self.delta_t, sigma2, &jumps)
    }
}

impl StateSpaceModel for LevySv {
    type State = LevyState;

    fn dim_theta(&self) -> usize {
        4
    }

    fn prior_logdensity(&self, theta: &[f64]) -> f64 {
        exp1_prior_logdensity(theta)
    }

    fn prior_sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let e = Exp::new(1.0).unwrap();
        (0..4).map(|_| e.sample(rng)).collect()
    }

    fn init_sample(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> LevyState {
        // Stationary marginal of the variance process.
        let g = Gamma::new(theta[0], 1.0 / theta[1]).expect("valid gamma");
        LevyState { sigma2: g.sample(rng), integrated: 0.0 }
    }

    fn transition_sample(&self, theta: &[f64], x: &LevyState, rng: &mut ChaCha8Rng) -> LevyState {
        self.sample_transition(theta, x.sigma2, rng)
    }

    fn obs_logdensity(&self, theta: &[f64], x: &LevyState, y: f64) -> f64 {
        let v = x.integrated;
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        normal_logpdf(y, theta[2] * v, v)
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

    fn state_summary(&self, x: &LevyState) -> f64 {
        x.sigma2
    }

    /// kappa and delta are shape and rate of the same stationary marginal and
    /// are strongly correlated; they move in one block.
    fn default_blocks(&self) -> Vec<Vec<usize>> {
        vec![vec![0, 1], vec![2], vec![3]]
    }
}

/// Simulates a synthetic return series of length `n` from the model.
pub fn levy_simulate(
    params: LevySvParams,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<LevyState>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let (model, theta) = levy_sv_model(params)?;
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n);
    xs.push(model.init_sample(&theta, rng));
    for k in 1..=n {
        let x = model.transition_sample(&theta, &xs[k - 1], rng);
        let v = x.integrated;
        let e: f64 = rand_distr::StandardNormal.sample(rng);
        ys.push(params.gamma * v + v.sqrt() * e);
        xs.push(x);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngstream::derive_rng;

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(LevySvParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(LevySvParams::new(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn zero_jump_interval_is_pure_decay() {
        let lambda = 0.8;
        let s = levy_transition_given_jumps(lambda, 1.0, 2.0, &[]);
        assert!((s.sigma2 - 2.0 * (-lambda).exp()).abs() < 1e-12);
        // Integrated variance of pure decay: (sigma2_old - sigma2_new)/lambda.
        assert!((s.integrated - (2.0 - s.sigma2) / lambda).abs() < 1e-12);
        assert!(s.integrated > 0.0);
    }

    #[test]
    fn jumps_raise_spot_variance_and_integrated_stays_positive() {
        let s = levy_transition_given_jumps(1.0, 1.0, 1.0, &[(0.2, 0.5), (0.9, 1.5)]);
        let no_jumps = levy_transition_given_jumps(1.0, 1.0, 1.0, &[]);
        assert!(s.sigma2 > no_jumps.sigma2);
        assert!(s.integrated > 0.0);
    }

    #[test]
    fn long_run_variance_matches_stationary_gamma() {
        let params = LevySvParams::new(2.0, 1.5, 1.0, 1.0).unwrap();
        let (model, theta) = levy_sv_model(params).unwrap();
        let mut rng = derive_rng(21, 0, 0);
        let mut x = model.init_sample(&theta, &mut rng);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            x = model.transition_sample(&theta, &x, &mut rng);
            sum += x.sigma2;
        }
        let target = params.kappa / params.delta;
        assert!(
            (sum / n as f64 - target).abs() < 0.05 * target,
            "mean {} vs {}",
            sum / n as f64,
            target
        );
    }

    #[test]
    fn sampled_paths_keep_variance_positive() {
        let params = LevySvParams::new(1.0, 2.0, 0.5, 0.3).unwrap();
        let (model, theta) = levy_sv_model(params).unwrap();
        let mut rng = derive_rng(22, 0, 0);
        let mut x = model.init_sample(&theta, &mut rng);
        for _ in 0..100_000 {
            x = model.transition_sample(&theta, &x, &mut rng);
            assert!(x.sigma2 > 0.0 && x.integrated >= 0.0);
        }
    }

    #[test]
    fn transition_density_is_unavailable() {
        let (model, _) = levy_sv_model(LevySvParams::new(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(!model.has_transition_logdensity());
    }

    #[test]
    fn simulation_reproducible() {
        let params = LevySvParams::new(0.5, 1.0, 2.0, 0.1).unwrap();
        let (_, ys) = levy_simulate(params, 50, &mut derive_rng(23, 0, 0)).unwrap();
        let (_, ys2) = levy_simulate(params, 50, &mut derive_rng(23, 0, 0)).unwrap();
        assert_eq!(ys, ys2);
        assert_eq!(ys.len(), 50);
    }

    #[test]
    fn nonpositive_integrated_variance_kills_observation() {
        let (model, theta) =
            levy_sv_model(LevySvParams::new(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        let x = LevyState { sigma2: 1.0, integrated: 0.0 };
        assert_eq!(model.obs_logdensity(&theta, &x, 0.3), f64::NEG_INFINITY);
    }
}
