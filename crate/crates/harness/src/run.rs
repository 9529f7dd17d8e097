//! Experiment replication: per-replicate record files, final-time summaries
//! with weighted posterior quantiles, and aggregation against an optional
//! reference run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use smc2_core::models::{
    finite_simulate, levy_simulate, levy_sv_model, lg_model, lg_simulate, FiniteSsm,
    LevySvParams, LinearGaussianParams, StateSpaceModel,
};
use smc2_core::particle::PfState;
use smc2_core::rngstream::derive_rng;
use smc2_core::smc2::{InnerFilter, KalmanInner, PmmhProposal, Smc2Config, Smc2Sampler};
use smc2_core::smc2fw::{run_full_online, run_online, BandwidthSpec, FwConfig, StepRecord};

use crate::config::{AlgoKind, ModelKind, RunConfig};
use crate::records::{fmt_f64, write_records};

/// Final-time posterior summary of one replicate.
#[derive(Debug, Clone)]
pub struct FinalSummary {
    pub log_evidence: f64,
    pub state_mean: f64,
    pub theta_mean: Vec<f64>,
    pub theta_sd: Vec<f64>,
    pub theta_q05: Vec<f64>,
    pub theta_q95: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub records: Vec<StepRecord>,
    pub summary: FinalSummary,
}

/// Weighted quantile per theta coordinate from the final particle cloud.
pub fn weighted_quantile(values: &mut [(f64, f64)], q: f64) -> f64 {
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite particle values"));
    let mut acc = 0.0;
    for &(v, w) in values.iter() {
        acc += w;
        if acc >= q {
            return v;
        }
    }
    values.last().expect("nonempty cloud").0
}

fn finalize<M: StateSpaceModel, F: InnerFilter<M>>(
    sampler: &Smc2Sampler<'_, M, F>,
    records: Vec<StepRecord>,
) -> Result<ReplicateResult> {
    let (theta_mean, theta_sd) = sampler.theta_mean_sd().map_err(anyhow::Error::from)?;
    let w = sampler.state.weights().map_err(anyhow::Error::from)?;
    let d = theta_mean.len();
    let mut theta_q05 = Vec::with_capacity(d);
    let mut theta_q95 = Vec::with_capacity(d);
    for k in 0..d {
        let mut vals: Vec<(f64, f64)> = sampler
            .state
            .particles
            .iter()
            .zip(&w.normalized)
            .map(|(p, &wi)| (p.theta[k], wi))
            .collect();
        theta_q05.push(weighted_quantile(&mut vals, 0.05));
        theta_q95.push(weighted_quantile(&mut vals, 0.95));
    }
    let summary = FinalSummary {
        log_evidence: sampler.state.log_evidence,
        state_mean: sampler.state_mean().map_err(anyhow::Error::from)?,
        theta_mean,
        theta_sd,
        theta_q05,
        theta_q95,
    };
    Ok(ReplicateResult { records, summary })
}

fn fw_config(cfg: &RunConfig) -> FwConfig {
    FwConfig {
        base: Smc2Config {
            n_theta: cfg.n_theta,
            n_x: cfg.n_x,
            ess_threshold: cfg.ess_threshold,
            pmmh_sweeps: cfg.pmmh_sweeps,
            resample_every_step: false,
            retain_paths: false,
        },
        window_len: cfg.window,
        bandwidth: if cfg.bandwidth_rule_a3 {
            BandwidthSpec::RuleA3
        } else {
            BandwidthSpec::Fixed(cfg.bandwidth)
        },
        predict_samples: cfg.predict_samples,
        emit_timing: cfg.emit_timing,
    }
}

/// Simulates one replicate's observations from the configured model truth.
pub fn simulate_data(cfg: &RunConfig, seed: u64) -> Result<Vec<f64>> {
    // The sampler derives its streams from epochs counting up from zero;
    // the data stream lives at the far end so the two never overlap.
    let mut rng = derive_rng(seed, u64::MAX, 0);
    match cfg.model {
        ModelKind::Lg => {
            let params = LinearGaussianParams::new(cfg.lg_tau0, cfg.lg_tau, cfg.lg_lambda)?;
            Ok(lg_simulate(params, cfg.n_steps, &mut rng)?.1)
        }
        ModelKind::Levy => {
            let params = LevySvParams::new(
                cfg.levy_kappa,
                cfg.levy_delta,
                cfg.levy_gamma,
                cfg.levy_lambda,
            )?;
            Ok(levy_simulate(params, cfg.n_steps, &mut rng)?.1)
        }
        ModelKind::Finite => {
            let model = FiniteSsm::new(cfg.finite_levels.clone(), cfg.finite_obs_sd);
            Ok(finite_simulate(&model, cfg.finite_a, cfg.n_steps, &mut rng).1)
        }
    }
}

/// True parameter vector implied by the configuration, in model order.
pub fn truth_theta(cfg: &RunConfig) -> Vec<f64> {
    match cfg.model {
        ModelKind::Lg => vec![cfg.lg_tau, cfg.lg_lambda],
        ModelKind::Levy => {
            vec![cfg.levy_kappa, cfg.levy_delta, cfg.levy_gamma, cfg.levy_lambda]
        }
        ModelKind::Finite => vec![cfg.finite_a],
    }
}

pub fn dim_theta(cfg: &RunConfig) -> usize {
    truth_theta(cfg).len()
}

fn run_generic<M: StateSpaceModel>(
    model: &M,
    cfg: &RunConfig,
    ys: &[f64],
    seed: u64,
) -> Result<ReplicateResult> {
    let proposal = PmmhProposal::new(model.default_blocks(), cfg.proposal_scale, cfg.adapt_proposal);
    match cfg.algo {
        AlgoKind::Smc2Fw => {
            let (runner, records) = run_online(model, fw_config(cfg), proposal, ys, seed)?;
            finalize(&runner.sampler, records)
        }
        AlgoKind::Smc2 => {
            let (sampler, records) = run_full_online::<M, PfState<M::State>>(
                model,
                fw_config(cfg),
                proposal,
                ys,
                seed,
            )?;
            finalize(&sampler, records)
        }
        AlgoKind::KalmanIbis => bail!("kalman-ibis applies to the lg model only"),
    }
}

/// Runs one replicate on the given observations.
pub fn run_replicate(cfg: &RunConfig, ys: &[f64], seed: u64) -> Result<ReplicateResult> {
    match cfg.model {
        ModelKind::Lg => {
            let params = LinearGaussianParams::new(cfg.lg_tau0, 1.0, 1.0)?;
            let (model, _) = lg_model(params)?;
            if cfg.algo == AlgoKind::KalmanIbis {
                let proposal = PmmhProposal::new(
                    model.default_blocks(),
                    cfg.proposal_scale,
                    cfg.adapt_proposal,
                );
                let (sampler, records) = run_full_online::<_, KalmanInner>(
                    &model,
                    fw_config(cfg),
                    proposal,
                    ys,
                    seed,
                )?;
                finalize(&sampler, records)
            } else {
                run_generic(&model, cfg, ys, seed)
            }
        }
        ModelKind::Levy => {
            let params = LevySvParams::new(
                cfg.levy_kappa,
                cfg.levy_delta,
                cfg.levy_gamma,
                cfg.levy_lambda,
            )?;
            let (model, _) = levy_sv_model(params)?;
            run_generic(&model, cfg, ys, seed)
        }
        ModelKind::Finite => {
            let model = FiniteSsm::new(cfg.finite_levels.clone(), cfg.finite_obs_sd);
            run_generic(&model, cfg, ys, seed)
        }
    }
}

fn summary_header(dim: usize) -> String {
    let mut cols = vec!["replicate".to_string(), "log_evidence".to_string(), "state_mean".into()];
    for tag in ["theta_mean", "theta_sd", "theta_q05", "theta_q95"] {
        for k in 0..dim {
            cols.push(format!("{tag}_{k}"));
        }
    }
    cols.join(",")
}

fn summary_values(s: &FinalSummary) -> Vec<f64> {
    let mut vals = vec![s.log_evidence, s.state_mean];
    vals.extend(&s.theta_mean);
    vals.extend(&s.theta_sd);
    vals.extend(&s.theta_q05);
    vals.extend(&s.theta_q95);
    vals
}

/// Parses a summary file into labeled rows.
pub fn read_summary(path: &Path) -> Result<(Vec<String>, Vec<(String, Vec<f64>)>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading summary {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().context("empty summary")?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let mut fields = line.split(',');
        let label = fields.next().context("missing row label")?.to_string();
        let vals = fields
            .map(|f| f.parse().with_context(|| format!("bad value `{f}` in row {label}")))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((label, vals));
    }
    Ok((header, rows))
}

/// The across-replicate mean row of a summary file.
pub fn reference_mean(path: &Path) -> Result<Vec<f64>> {
    let (_, rows) = read_summary(path)?;
    rows.into_iter()
        .find(|(label, _)| label == "mean")
        .map(|(_, vals)| vals)
        .with_context(|| format!("summary {} has no mean row", path.display()))
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub record_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
    pub mean: Vec<f64>,
    /// Per-column mean absolute error of replicate finals vs the reference
    /// mean row, when a reference was configured.
    pub abs_err_vs_reference: Option<Vec<f64>>,
}

/// Runs all replicates (in parallel, one independent seed each), writes one
/// record file per replicate plus a summary file. If any replicate aborts,
/// the completed outputs are still written and the error is propagated.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dim = dim_theta(cfg);
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;

    let shared_data: Option<Vec<f64>> = match &cfg.data {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading data {}", path.display()))?;
            let mut ys = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let t = line.trim();
                if t.is_empty() {
                    continue;
                }
                ys.push(t.parse().with_context(|| {
                    format!("{}: line {}: bad observation", path.display(), lineno + 1)
                })?);
            }
            if ys.is_empty() {
                bail!("data file {} has no observations", path.display());
            }
            Some(ys)
        }
        None => None,
    };

    let results: Vec<Result<ReplicateResult>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed + r as u64;
            let ys = match &shared_data {
                Some(ys) => ys.clone(),
                None => simulate_data(cfg, seed)?,
            };
            run_replicate(cfg, &ys, seed)
        })
        .collect();

    let mut record_files = Vec::new();
    let mut summaries = Vec::new();
    let mut first_error = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(result) => {
                let path = cfg.out.join(format!("replicate_{r:03}.csv"));
                std::fs::write(&path, write_records(&result.records, dim))
                    .with_context(|| format!("writing {}", path.display()))?;
                record_files.push(path);
                summaries.push((r, result.summary));
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e.context(format!("replicate {r} aborted")));
                }
            }
        }
    }

    let ncols = 2 + 4 * dim;
    let mut mean = vec![0.0; ncols];
    let mut text = summary_header(dim);
    text.push('\n');
    for (r, s) in &summaries {
        let vals = summary_values(s);
        text.push_str(&format!(
            "{r},{}\n",
            vals.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
        ));
        for (m, v) in mean.iter_mut().zip(&vals) {
            *m += v / summaries.len() as f64;
        }
    }
    if !summaries.is_empty() {
        text.push_str(&format!(
            "mean,{}\n",
            mean.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
        ));
    }

    let abs_err = match (&cfg.reference, summaries.is_empty()) {
        (Some(path), false) => {
            let reference = reference_mean(path)?;
            if reference.len() != ncols {
                bail!(
                    "reference {} has {} columns, expected {ncols}",
                    path.display(),
                    reference.len()
                );
            }
            let mut abs_err = vec![0.0; ncols];
            let mut mse = vec![0.0; ncols];
            for (_, s) in &summaries {
                for (k, v) in summary_values(s).into_iter().enumerate() {
                    let e = v - reference[k];
                    abs_err[k] += e.abs() / summaries.len() as f64;
                    mse[k] += e * e / summaries.len() as f64;
                }
            }
            text.push_str(&format!(
                "abs_err_vs_reference,{}\n",
                abs_err.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
            ));
            text.push_str(&format!(
                "mse_vs_reference,{}\n",
                mse.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
            ));
            Some(abs_err)
        }
        _ => None,
    };

    let summary_file = cfg.out.join("summary.csv");
    std::fs::write(&summary_file, text)
        .with_context(|| format!("writing {}", summary_file.display()))?;

    match first_error {
        Some(e) => Err(e),
        None => Ok(ExperimentOutput {
            record_files,
            summary_file,
            mean,
            abs_err_vs_reference: abs_err,
        }),
    }
}
