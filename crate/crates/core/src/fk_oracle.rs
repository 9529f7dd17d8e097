//! Exact computations on finite-state measure-potential flows.
//!
//! Everything here is deterministic linear algebra on explicit matrices:
//! exact filters, normalizing constants, Dobrushin coefficients,
//! minorization constants, the geometric filter-contraction bound and the
//! block-boundary perturbation profile used to show that injected bias does
//! not accumulate. These are the ground-truth references the stochastic
//! samplers are validated against.

use crate::error::{Error, Result};
use crate::models::{normal_logpdf, FiniteSsm};

/// A finite flow: an initial distribution, one row-stochastic kernel per
/// step and one positive potential per step. Step `p` propagates through
/// `kernels[p]` and then multiplies `potentials[p]`, so the first
/// observation is absorbed after one transition and no potential acts on the
/// initial distribution.
#[derive(Debug, Clone)]
pub struct FiniteFk {
    pub init: Vec<f64>,
    /// `kernels[p]` has one row per point of the step-`p` source space.
    pub kernels: Vec<Vec<Vec<f64>>>,
    /// `potentials[p]` lives on the target space of `kernels[p]`.
    pub potentials: Vec<Vec<f64>>,
}

impl FiniteFk {
    pub fn new(
        init: Vec<f64>,
        kernels: Vec<Vec<Vec<f64>>>,
        potentials: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if init.is_empty() || kernels.len() != potentials.len() {
            return Err(Error::InvalidConfig(
                "need one kernel and one potential per step".into(),
            ));
        }
        if (init.iter().sum::<f64>() - 1.0).abs() > 1e-9 || init.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidConfig("init must be a distribution".into()));
        }
        let mut dim = init.len();
        for (p, (m, g)) in kernels.iter().zip(&potentials).enumerate() {
            if m.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "kernel {p} has {} rows, expected {dim}",
                    m.len()
                )));
            }
            let out = m[0].len();
            for row in m {
                if row.len() != out || row.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidConfig(format!("kernel {p} is malformed")));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "kernel {p} rows must sum to one"
                    )));
                }
            }
            if g.len() != out {
                return Err(Error::InvalidConfig(format!("potential {p} has wrong length")));
            }
            if g.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::DegeneratePotential { step: p });
            }
            dim = out;
        }
        Ok(Self { init, kernels, potentials })
    }

    pub fn n_steps(&self) -> usize {
        self.kernels.len()
    }

    /// Time-homogeneous flow of the finite state-space model at parameter
    /// `a`: the Gibbs kernel each step and Gaussian observation potentials.
    pub fn from_finite_ssm(model: &FiniteSsm, a: f64, ys: &[f64]) -> Result<Self> {
        let m = model.transition_matrix(a);
        let var = model.obs_sd * model.obs_sd;
        let potentials: Vec<Vec<f64>> = ys
            .iter()
            .map(|&y| {
                model.levels.iter().map(|&s| normal_logpdf(y, s, var).exp()).collect()
            })
            .collect();
        Self::new(model.init_dist(), vec![m; ys.len()], potentials)
    }
}

/// Total variation distance, half the L1 distance.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// One step of the prediction-flow evolution map: reweight `mu` by the
/// potential `g`, then push through the kernel `m` and normalize.
pub fn phi_map(mu: &[f64], g: &[f64], m: &[Vec<f64>]) -> Result<Vec<f64>> {
    assert!(mu.len() == g.len() && mu.len() == m.len());
    let mass: f64 = mu.iter().zip(g).map(|(a, b)| a * b).sum();
    if !(mass > 0.0) {
        return Err(Error::DegeneratePotential { step: 0 });
    }
    let out = m[0].len();
    let mut nu = vec![0.0; out];
    for (x, row) in m.iter().enumerate() {
        let w = mu[x] * g[x] / mass;
        for (z, &p) in row.iter().enumerate() {
            nu[z] += w * p;
        }
    }
    Ok(nu)
}

#[derive(Debug, Clone)]
pub struct ExactMarginals {
    /// Distribution after the step-`p` kernel, before its potential;
    /// `predicted[0]` is the initial distribution.
    pub predicted: Vec<Vec<f64>>,
    /// Distribution after the step-`p` potential; `filtered[0] = init`.
    pub filtered: Vec<Vec<f64>>,
    /// `log mu_p(G_p)` per step; their sum is the exact log normalizer.
    pub log_increments: Vec<f64>,
}

impl ExactMarginals {
    pub fn log_normalizer(&self) -> f64 {
        self.log_increments.iter().sum()
    }
}

/// Exact forward recursion of the flow: predicted and filtered marginals and
/// the per-step log normalizing increments.
pub fn exact_marginals(fk: &FiniteFk) -> Result<ExactMarginals> {
    let mut predicted = vec![fk.init.clone()];
    let mut filtered = vec![fk.init.clone()];
    let mut log_increments = Vec::with_capacity(fk.n_steps());
    let mut mu = fk.init.clone();
    for (p, (m, g)) in fk.kernels.iter().zip(&fk.potentials).enumerate() {
        let out = m[0].len();
        let mut pred = vec![0.0; out];
        for (x, row) in m.iter().enumerate() {
            for (z, &pr) in row.iter().enumerate() {
                pred[z] += mu[x] * pr;
            }
        }
        let mass: f64 = pred.iter().zip(g).map(|(a, b)| a * b).sum();
        if !(mass > 0.0) {
            return Err(Error::DegeneratePotential { step: p });
        }
        let filt: Vec<f64> = pred.iter().zip(g).map(|(a, b)| a * b / mass).collect();
        predicted.push(pred);
        filtered.push(filt.clone());
        log_increments.push(mass.ln());
        mu = filt;
    }
    Ok(ExactMarginals { predicted, filtered, log_increments })
}

/// Dobrushin ergodicity coefficient: the maximal total variation distance
/// between two rows of the kernel. A value below one certifies contraction.
pub fn dobrushin(m: &[Vec<f64>]) -> f64 {
    let mut beta: f64 = 0.0;
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            beta = beta.max(tv_distance(&m[i], &m[j]));
        }
    }
    beta
}

/// Mixing constants of one kernel.
#[derive(Debug, Clone, Copy)]
pub struct MinorizationConstants {
    /// Column-minima mass: `sum_z min_x M(x, z)`. Bounds the Dobrushin
    /// coefficient via `beta <= 1 - eps`.
    pub eps_overlap: f64,
    /// Pairwise row-domination constant: the largest `eps` with
    /// `M(x, .) >= eps * M(y, .)` for every row pair. Satisfies the
    /// product rule `beta(M1 M2) <= (1 - eps1^2)(1 - eps2^2) ...` when the
    /// squared form of the constant is used.
    pub eps_pairwise: f64,
}

pub fn minorization_constants(m: &[Vec<f64>]) -> MinorizationConstants {
    let cols = m[0].len();
    let mut eps_overlap = 0.0;
    for z in 0..cols {
        eps_overlap += m.iter().map(|row| row[z]).fold(f64::INFINITY, f64::min);
    }
    let mut eps_pairwise = f64::INFINITY;
    for x in m {
        for y in m {
            for z in 0..cols {
                if y[z] > 0.0 {
                    eps_pairwise = eps_pairwise.min(x[z] / y[z]);
                }
            }
        }
    }
    if !eps_pairwise.is_finite() {
        eps_pairwise = 0.0;
    }
    MinorizationConstants { eps_overlap, eps_pairwise }
}

/// Per-step mixing constants of a whole flow: the column-minima overlap of
/// each kernel and the potential ratio `max G_p / min G_p`.
pub fn minorization_profile(fk: &FiniteFk) -> Vec<(f64, f64)> {
    fk.kernels
        .iter()
        .zip(&fk.potentials)
        .map(|(m, g)| {
            let eps = minorization_constants(m).eps_overlap;
            let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
            (eps, gmax / gmin)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ContractionReport {
    pub initial_tv: f64,
    pub final_tv: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Pushes two starting distributions through steps `s+1 ..= t` of the flow
/// and compares the resulting total variation distance with the geometric
/// bound `2 (delta / eps)^2 (1 - eps^2)^(t - s) * TV(mu, nu)`, where `eps`
/// is the smallest column-minima overlap of the kernels involved and
/// `delta` the largest potential ratio.
pub fn contraction_check(
    fk: &FiniteFk,
    s: usize,
    t: usize,
    mu: &[f64],
    nu: &[f64],
) -> Result<ContractionReport> {
    if !(s < t && t <= fk.n_steps()) {
        return Err(Error::InvalidConfig("need s < t <= number of steps".into()));
    }
    let initial_tv = tv_distance(mu, nu);
    let mut a = mu.to_vec();
    let mut b = nu.to_vec();
    let mut eps = f64::INFINITY;
    let mut delta: f64 = 1.0;
    for p in s..t {
        let m = &fk.kernels[p];
        let g = &fk.potentials[p];
        // The filter update: predict through the kernel, then reweight.
        a = predict_update(&a, m, g, p)?;
        b = predict_update(&b, m, g, p)?;
        eps = eps.min(minorization_constants(m).eps_overlap);
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        delta = delta.max(gmax / gmin);
    }
    let final_tv = tv_distance(&a, &b);
    let bound = 2.0
        * (delta / eps).powi(2)
        * (1.0 - eps * eps).powi((t - s) as i32)
        * initial_tv;
    Ok(ContractionReport { initial_tv, final_tv, bound, holds: final_tv <= bound + 1e-12 })
}

fn predict_update(mu: &[f64], m: &[Vec<f64>], g: &[f64], step: usize) -> Result<Vec<f64>> {
    let out = m[0].len();
    let mut pred = vec![0.0; out];
    for (x, row) in m.iter().enumerate() {
        for (z, &pr) in row.iter().enumerate() {
            pred[z] += mu[x] * pr;
        }
    }
    let mass: f64 = pred.iter().zip(g).map(|(a, b)| a * b).sum();
    if !(mass > 0.0) {
        return Err(Error::DegeneratePotential { step });
    }
    Ok(pred.iter().zip(g).map(|(a, b)| a * b / mass).collect())
}

/// Exact gap between the final filtered expectations of two flows that
/// share their potentials but may differ in initial distribution and
/// kernels: `|E_1[phi] - E_2[phi]|` at the terminal time.
pub fn bias_gap(fk1: &FiniteFk, fk2: &FiniteFk, phi: &[f64]) -> Result<f64> {
    if fk1.n_steps() != fk2.n_steps() {
        return Err(Error::InvalidConfig("flows must have equal length".into()));
    }
    for (a, b) in fk1.potentials.iter().zip(&fk2.potentials) {
        if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12) {
            return Err(Error::InvalidConfig("flows must share their potentials".into()));
        }
    }
    let m1 = exact_marginals(fk1)?;
    let m2 = exact_marginals(fk2)?;
    let f1 = m1.filtered.last().unwrap();
    let f2 = m2.filtered.last().unwrap();
    if f1.len() != phi.len() || f2.len() != phi.len() {
        return Err(Error::InvalidConfig("phi must live on the terminal space".into()));
    }
    let e1: f64 = f1.iter().zip(phi).map(|(p, v)| p * v).sum();
    let e2: f64 = f2.iter().zip(phi).map(|(p, v)| p * v).sum();
    Ok((e1 - e2).abs())
}

#[derive(Debug, Clone)]
pub struct BiasProfile {
    /// TV between the perturbed and the exact filtered marginal at every
    /// step (index 0 is the initial distribution).
    pub tv_per_step: Vec<f64>,
    /// `|E_twin[phi] - E_exact[phi]|` at every step.
    pub phi_gap_per_step: Vec<f64>,
    /// TV actually injected at each block boundary.
    pub injected: Vec<f64>,
    /// Sum of the geometric contraction bounds on the residual influence of
    /// each injection at the final time.
    pub final_bound: f64,
}

impl BiasProfile {
    pub fn final_tv(&self) -> f64 {
        *self.tv_per_step.last().unwrap()
    }

    /// The phi-gap at the end of each block, `b = 1..B`.
    pub fn block_gaps(&self, block_len: usize) -> Vec<f64> {
        (1..self.phi_gap_per_step.len())
            .filter(|p| p % block_len == 0)
            .map(|p| self.phi_gap_per_step[p])
            .collect()
    }
}

/// Runs the exact filter and a twin chain that is perturbed at the end of
/// every block of `block_len` steps by mixing weight `perturb_weight` of the
/// uniform distribution into the filtered marginal. The twin mimics an
/// algorithm whose block bridge carries a small systematic error; the
/// profile shows whether those errors pile up or are forgotten.
pub fn bias_check(
    fk: &FiniteFk,
    block_len: usize,
    perturb_weight: f64,
    phi: &[f64],
) -> Result<BiasProfile> {
    if block_len == 0 || fk.n_steps() % block_len != 0 {
        return Err(Error::InvalidConfig(
            "block length must divide the number of steps".into(),
        ));
    }
    if !(0.0..1.0).contains(&perturb_weight) {
        return Err(Error::InvalidConfig("perturb_weight must be in [0, 1)".into()));
    }
    let phi_gap = |a: &[f64], b: &[f64]| -> f64 {
        if a.len() == phi.len() {
            a.iter().zip(b).zip(phi).map(|((x, y), v)| (x - y) * v).sum::<f64>().abs()
        } else {
            f64::NAN
        }
    };
    let exact = exact_marginals(fk)?;
    let mut twin = fk.init.clone();
    let mut tv_per_step = vec![0.0];
    let mut phi_gap_per_step = vec![0.0];
    let mut injected = Vec::new();
    let mut boundaries = Vec::new();
    for p in 0..fk.n_steps() {
        twin = predict_update(&twin, &fk.kernels[p], &fk.potentials[p], p)?;
        let end_of_block = (p + 1) % block_len == 0 && p + 1 < fk.n_steps();
        if end_of_block {
            let n = twin.len() as f64;
            let before = twin.clone();
            for v in twin.iter_mut() {
                *v = (1.0 - perturb_weight) * *v + perturb_weight / n;
            }
            injected.push(tv_distance(&before, &twin));
            boundaries.push(p + 1);
        }
        tv_per_step.push(tv_distance(&twin, &exact.filtered[p + 1]));
        phi_gap_per_step.push(phi_gap(&twin, &exact.filtered[p + 1]));
    }
    // Residual influence of injection b at the final time, bounded by the
    // geometric contraction over the remaining steps.
    let t_final = fk.n_steps();
    let mut final_bound = 0.0;
    for (&b, &kappa) in boundaries.iter().zip(&injected) {
        let mut eps = f64::INFINITY;
        let mut delta: f64 = 1.0;
        for p in b..t_final {
            eps = eps.min(minorization_constants(&fk.kernels[p]).eps_overlap);
            let g = &fk.potentials[p];
            let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
            delta = delta.max(gmax / gmin);
        }
        final_bound += 2.0
            * (delta / eps).powi(2)
            * (1.0 - eps * eps).powi((t_final - b) as i32)
            * kappa;
    }
    Ok(BiasProfile { tv_per_step, phi_gap_per_step, injected, final_bound })
}

/// The exact block bridge of the finite model on a parameter grid: for each
/// grid value `a`, the log of `prior(a) * p_a(y_block)` and the one-step
/// predictive state distribution given the block. This is what the sampled
/// kernel-density bridge approximates.
#[derive(Debug, Clone)]
pub struct ExactZeta {
    pub grid: Vec<f64>,
    /// Normalized posterior mass of each grid value (trapezoid weights
    /// folded in).
    pub theta_weights: Vec<f64>,
    /// Predictive distribution of the first state of the next block, per
    /// grid value.
    pub state_predictive: Vec<Vec<f64>>,
}

impl ExactZeta {
    /// Posterior mean of the parameter under the gridded bridge.
    pub fn theta_mean(&self) -> f64 {
        self.grid.iter().zip(&self.theta_weights).map(|(a, w)| a * w).sum()
    }

    /// Marginal predictive state distribution, theta integrated out.
    pub fn marginal_state(&self) -> Vec<f64> {
        let s = self.state_predictive[0].len();
        let mut out = vec![0.0; s];
        for (w, pred) in self.theta_weights.iter().zip(&self.state_predictive) {
            for (o, &p) in out.iter_mut().zip(pred) {
                *o += w * p;
            }
        }
        out
    }
}

/// Exact bridge for the finite model over an equispaced grid on `(0, a_max]`
/// under the Exponential(1) prior, with trapezoid quadrature weights.
pub fn exact_zeta(
    model: &FiniteSsm,
    ys: &[f64],
    a_max: f64,
    grid_size: usize,
) -> Result<ExactZeta> {
    if grid_size < 2 || !(a_max > 0.0) {
        return Err(Error::InvalidConfig("need a proper grid".into()));
    }
    let step = a_max / grid_size as f64;
    let grid: Vec<f64> = (1..=grid_size).map(|k| step * k as f64).collect();
    let mut zeta = exact_zeta_on_grid(model, ys, &grid)?;
    // Fold trapezoid endpoint weights into the grid masses and renormalize.
    let last = zeta.theta_weights.len() - 1;
    zeta.theta_weights[0] *= 0.5;
    zeta.theta_weights[last] *= 0.5;
    let z: f64 = zeta.theta_weights.iter().sum();
    zeta.theta_weights.iter_mut().for_each(|w| *w /= z);
    Ok(zeta)
}

/// Exact bridge on an explicit parameter grid (equal quadrature weight per
/// grid point): per value, the Exponential(1) prior times the exact block
/// likelihood for the theta mass, and the one-step predictive distribution
/// of the next hidden state for the state factor.
pub fn exact_zeta_on_grid(model: &FiniteSsm, ys: &[f64], grid: &[f64]) -> Result<ExactZeta> {
    if ys.is_empty() || grid.is_empty() {
        return Err(Error::InvalidConfig("need observations and grid values".into()));
    }
    let mut logps = Vec::with_capacity(grid.len());
    let mut state_predictive = Vec::with_capacity(grid.len());
    for &a in grid {
        let fk = FiniteFk::from_finite_ssm(model, a, ys)?;
        let marg = exact_marginals(&fk)?;
        logps.push(-a + marg.log_normalizer());
        let filt = marg.filtered.last().unwrap();
        let m = model.transition_matrix(a);
        let mut pred = vec![0.0; model.n_states()];
        for (x, row) in m.iter().enumerate() {
            for (z, &pr) in row.iter().enumerate() {
                pred[z] += filt[x] * pr;
            }
        }
        state_predictive.push(pred);
    }
    let max = logps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut theta_weights: Vec<f64> = logps.iter().map(|&lp| (lp - max).exp()).collect();
    let z: f64 = theta_weights.iter().sum();
    theta_weights.iter_mut().for_each(|w| *w /= z);
    Ok(ExactZeta { grid: grid.to_vec(), theta_weights, state_predictive })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_fk(steps: usize) -> FiniteFk {
        let m = vec![vec![0.6, 0.4], vec![0.3, 0.7]];
        let g = vec![2.0, 1.0];
        FiniteFk::new(vec![0.5, 0.5], vec![m; steps], vec![g; steps]).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(FiniteFk::new(vec![0.5, 0.5], vec![], vec![]).is_ok());
        assert!(FiniteFk::new(vec![0.7, 0.7], vec![], vec![]).is_err());
        let bad_rows = vec![vec![vec![0.5, 0.4], vec![0.3, 0.7]]];
        assert!(FiniteFk::new(vec![0.5, 0.5], bad_rows, vec![vec![1.0, 1.0]]).is_err());
        let zero_g = vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]];
        assert!(FiniteFk::new(vec![0.5, 0.5], zero_g, vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn phi_map_with_constant_potential_is_markov() {
        let m = vec![vec![0.6, 0.4], vec![0.3, 0.7]];
        let mu = vec![0.2, 0.8];
        let out = phi_map(&mu, &[3.0, 3.0], &m).unwrap();
        let direct = [0.2 * 0.6 + 0.8 * 0.3, 0.2 * 0.4 + 0.8 * 0.7];
        assert!((out[0] - direct[0]).abs() < 1e-15 && (out[1] - direct[1]).abs() < 1e-15);
    }

    #[test]
    fn phi_map_identity_kernel_hand_case() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = phi_map(&[0.5, 0.5], &[2.0, 1.0], &id).unwrap();
        assert!((out[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn repeated_phi_map_matches_matrix_product() {
        // Unnormalized flow: v_t = v_{t-1} diag(G) M; normalizing at the end
        // must equal step-by-step normalized phi_map composition.
        let fk = two_state_fk(6);
        let mut mu = vec![0.35, 0.65];
        let mut v = mu.clone();
        for p in 0..fk.n_steps() {
            mu = phi_map(&mu, &fk.potentials[p], &fk.kernels[p]).unwrap();
            let mut next = vec![0.0; 2];
            for x in 0..2 {
                for z in 0..2 {
                    next[z] += v[x] * fk.potentials[p][x] * fk.kernels[p][x][z];
                }
            }
            v = next;
        }
        let mass: f64 = v.iter().sum();
        for (a, b) in mu.iter().zip(v.iter().map(|x| x / mass)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_marginals_pure_markov_flow() {
        let m = vec![vec![0.6, 0.4], vec![0.3, 0.7]];
        let fk = FiniteFk::new(
            vec![1.0, 0.0],
            vec![m.clone(), m.clone()],
            vec![vec![1.0, 1.0]; 2],
        )
        .unwrap();
        let marg = exact_marginals(&fk).unwrap();
        assert!((marg.log_normalizer()).abs() < 1e-12);
        let two = [
            0.6 * 0.6 + 0.4 * 0.3,
            0.6 * 0.4 + 0.4 * 0.7,
        ];
        for (a, b) in marg.filtered[2].iter().zip(two) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_marginals_one_step_bayes_update() {
        let fk = two_state_fk(1);
        let marg = exact_marginals(&fk).unwrap();
        // Predicted: (0.45, 0.55); potential (2,1): posterior (0.9, 0.55)/1.45.
        assert!((marg.filtered[1][0] - 0.9 / 1.45).abs() < 1e-12);
        assert!((marg.log_increments[0] - 1.45f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dobrushin_examples() {
        let same = vec![vec![0.2, 0.8], vec![0.2, 0.8]];
        assert_eq!(dobrushin(&same), 0.0);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(dobrushin(&id), 1.0);
        let m = vec![vec![0.6, 0.4], vec![0.3, 0.7]];
        assert!((dobrushin(&m) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn minorization_examples() {
        let same = vec![vec![0.2, 0.8], vec![0.2, 0.8]];
        assert!((minorization_constants(&same).eps_overlap - 1.0).abs() < 1e-15);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(minorization_constants(&id).eps_overlap, 0.0);
        let m = vec![vec![0.6, 0.4], vec![0.3, 0.7]];
        let c = minorization_constants(&m);
        assert!((c.eps_overlap - 0.7).abs() < 1e-15);
        // Pairwise: min over (x,y,z) of M(x,z)/M(y,z) = 0.3/0.6.
        assert!((c.eps_pairwise - 0.5).abs() < 1e-15);
    }

    #[test]
    fn minorization_profile_includes_potential_ratio() {
        let fk = two_state_fk(3);
        let prof = minorization_profile(&fk);
        assert_eq!(prof.len(), 3);
        for (eps, delta) in prof {
            assert!((eps - 0.7).abs() < 1e-15);
            assert!((delta - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn contraction_trivial_cases() {
        let fk = two_state_fk(4);
        let mu = vec![0.9, 0.1];
        let r = contraction_check(&fk, 0, 4, &mu, &mu).unwrap();
        assert!(r.final_tv < 1e-15 && r.holds);
        // Rank-one kernel forgets in one step.
        let rank1 = FiniteFk::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.3, 0.7], vec![0.3, 0.7]]],
            vec![vec![1.0, 2.0]],
        )
        .unwrap();
        let r = contraction_check(&rank1, 0, 1, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(r.final_tv < 1e-15 && r.holds);
    }

    #[test]
    fn bias_gap_trivial_cases() {
        let fk = two_state_fk(3);
        assert!(bias_gap(&fk, &fk, &[1.0, -1.0]).unwrap() < 1e-15);
        let mut other = fk.clone();
        other.init = vec![0.1, 0.9];
        other.kernels[1] = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
        // Constant phi: expectations agree regardless of the flows.
        assert!(bias_gap(&fk, &other, &[2.5, 2.5]).unwrap() < 1e-14);
        let mut mismatched = fk.clone();
        mismatched.potentials[0] = vec![1.0, 1.0];
        assert!(bias_gap(&fk, &mismatched, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn bias_check_no_perturbation_is_exact() {
        let fk = two_state_fk(6);
        let prof = bias_check(&fk, 3, 0.0, &[1.0, -1.0]).unwrap();
        assert!(prof.final_tv() < 1e-14);
        assert!(prof.injected.iter().all(|&k| k < 1e-15));
        assert!(prof.phi_gap_per_step.iter().all(|&g| g < 1e-14));
    }

    #[test]
    fn bias_check_injections_are_forgotten() {
        let fk = two_state_fk(12);
        let prof = bias_check(&fk, 4, 0.2, &[1.0, -1.0]).unwrap();
        assert_eq!(prof.injected.len(), 2);
        assert!(prof.final_tv() <= prof.final_bound + 1e-12);
        assert_eq!(prof.block_gaps(4).len(), 3);
    }

    #[test]
    fn exact_zeta_degenerate_cases() {
        // Uninformative (constant-density) observations: theta posterior
        // equals the prior restricted to the grid, state predictive follows
        // the prior Markov flow.
        let flat = FiniteSsm::new(vec![0.0, 0.0], 1.0);
        let zeta = exact_zeta_on_grid(&flat, &[0.0, 0.0], &[0.4, 1.1]).unwrap();
        let prior = [(-0.4f64).exp(), (-1.1f64).exp()];
        let z = prior[0] + prior[1];
        assert!((zeta.theta_weights[0] - prior[0] / z).abs() < 1e-12);
        for pred in &zeta.state_predictive {
            // Equal levels make the kernel uniform for any stickiness.
            assert!((pred[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_zeta_matches_path_enumeration() {
        // 2 grid values, 3 states, 4 observations: enumerate all 3^5 paths.
        let ssm = FiniteSsm::new(vec![-1.0, 0.2, 1.0], 0.7);
        let ys = [0.3, -0.5, 0.9, 0.1];
        let grid = [0.5, 1.7];
        let zeta = exact_zeta_on_grid(&ssm, &ys, &grid).unwrap();
        let s = ssm.n_states();
        let var = ssm.obs_sd * ssm.obs_sd;
        let mut joint = vec![vec![0.0; s]; grid.len()];
        let mut totals = vec![0.0; grid.len()];
        for (gi, &a) in grid.iter().enumerate() {
            let m = ssm.transition_matrix(a);
            // Path = (x0, x1..x4); next-state x5 pushed through the kernel.
            for path in 0..s.pow(5) {
                let mut digits = [0usize; 5];
                let mut rem = path;
                for d in digits.iter_mut() {
                    *d = rem % s;
                    rem /= s;
                }
                let mut p = (-a).exp() / s as f64;
                for k in 1..5 {
                    p *= m[digits[k - 1]][digits[k]];
                    p *= normal_logpdf(ys[k - 1], ssm.levels[digits[k]], var).exp();
                }
                for x5 in 0..s {
                    joint[gi][x5] += p * m[digits[4]][x5];
                }
            }
            totals[gi] = joint[gi].iter().sum();
        }
        let z: f64 = totals.iter().sum();
        for gi in 0..grid.len() {
            assert!(
                (zeta.theta_weights[gi] - totals[gi] / z).abs() < 1e-10,
                "theta mass mismatch"
            );
            for x5 in 0..s {
                let brute = joint[gi][x5] / totals[gi];
                assert!(
                    (zeta.state_predictive[gi][x5] - brute).abs() < 1e-10,
                    "state predictive mismatch"
                );
            }
        }
    }
}
