use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use smc2_harness::config::{parse_algo, parse_kv, RunConfig};
use smc2_harness::ingest::ingest_prices;
use smc2_harness::records::fmt_f64;
use smc2_harness::run::{dim_theta, read_summary, run_experiment, simulate_data, truth_theta};
use smc2_harness::verify::{verify_theory, VerifySpec};

/// Online Bayesian inference for state-space models: full-history and
/// fixed-window samplers, experiment replication and theory verification.
#[derive(Parser)]
#[command(name = "smc2", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the experiment subcommands; every flag overrides the
/// matching configuration key.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Configuration file in "key = value" format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; replicate r runs with seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Outer (theta) particle count N.
    #[arg(long)]
    n_theta: Option<usize>,
    /// Inner (state) particle count N_x.
    #[arg(long)]
    n_x: Option<usize>,
    /// Observations per block T.
    #[arg(long)]
    window: Option<usize>,
    /// Fixed bridge bandwidth h.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Use the N^(-1/(2(d+1))) bandwidth rule instead of a fixed h.
    #[arg(long)]
    bandwidth_rule_a3: bool,
    /// Resample when ESS falls below this fraction of N.
    #[arg(long)]
    ess_threshold: Option<f64>,
    /// PMMH sweeps per rejuvenation.
    #[arg(long)]
    pmmh_sweeps: Option<usize>,
    /// Number of replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Observation file (one value per line); otherwise data are simulated.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Summary file of a previous run used as the error reference.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Output directory (run) or file (simulate, ingest).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic observation series from the configured model.
    Simulate(CommonArgs),
    /// Run a replicated experiment and write records plus a summary.
    Run {
        /// Algorithm: kalman-ibis, smc2 or smc2fw.
        #[arg(long)]
        algo: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Normalize a file of closing prices into unit-variance log returns.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the randomized theory-verification suites.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print a digest of a run's summary file.
    Report {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.n_theta {
        cfg.n_theta = v;
    }
    if let Some(v) = common.n_x {
        cfg.n_x = v;
    }
    if let Some(v) = common.window {
        cfg.window = v;
    }
    if let Some(v) = common.bandwidth {
        cfg.bandwidth = v;
    }
    if common.bandwidth_rule_a3 {
        cfg.bandwidth_rule_a3 = true;
    }
    if let Some(v) = common.ess_threshold {
        cfg.ess_threshold = v;
    }
    if let Some(v) = common.pmmh_sweeps {
        cfg.pmmh_sweeps = v;
    }
    if let Some(v) = common.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = &common.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &common.reference {
        cfg.reference = Some(v.clone());
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    Ok(cfg)
}

/// The only environment knob: worker-thread count for the global pool.
fn configure_workers() -> Result<()> {
    if let Ok(raw) = std::env::var("SMC2_WORKERS") {
        let n: usize = raw
            .parse()
            .with_context(|| format!("SMC2_WORKERS must be a positive integer, got `{raw}`"))?;
        if n == 0 {
            bail!("SMC2_WORKERS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing worker pool")?;
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    cfg.validate()?;
    let ys = simulate_data(&cfg, cfg.seed)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("observations.txt"));
    let text: String = ys.iter().map(|&y| fmt_f64(y) + "\n").collect();
    std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "simulated {} observations from model {} (truth {}) into {}",
        ys.len(),
        cfg.model,
        truth_theta(&cfg).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
        out.display()
    );
    Ok(())
}

fn cmd_run(algo: &Option<String>, common: &CommonArgs) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(a) = algo {
        cfg.algo = parse_algo(a)?;
    }
    let out = run_experiment(&cfg)?;
    let dim = dim_theta(&cfg);
    println!(
        "{} replicates of {} on model {} -> {}",
        out.record_files.len(),
        cfg.algo,
        cfg.model,
        out.summary_file.display()
    );
    for k in 0..dim {
        println!("theta[{k}] posterior mean (across replicates): {:.6}", out.mean[2 + k]);
    }
    if let Some(err) = &out.abs_err_vs_reference {
        for k in 0..dim {
            println!("theta[{k}] mean abs error vs reference: {:.6}", err[2 + k]);
        }
    }
    Ok(())
}

fn cmd_ingest(common: &CommonArgs) -> Result<()> {
    let data = common.data.clone().context("ingest requires --data <prices file>")?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("returns.txt"));
    let text =
        std::fs::read_to_string(&data).with_context(|| format!("reading {}", data.display()))?;
    let returns = ingest_prices(&text)?;
    let body: String = returns.iter().map(|&r| fmt_f64(r) + "\n").collect();
    std::fs::write(&out, body).with_context(|| format!("writing {}", out.display()))?;
    println!("ingested {} normalized returns into {}", returns.len(), out.display());
    Ok(())
}

fn cmd_verify(common: &CommonArgs) -> Result<()> {
    let mut spec = VerifySpec::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let map: BTreeMap<String, String> = parse_kv(&text)?;
        for (key, value) in &map {
            match key.as_str() {
                "contraction_trials" => spec.contraction_trials = value.parse()?,
                "bias_trials" => spec.bias_trials = value.parse()?,
                "seed" => spec.seed = value.parse()?,
                _ => {}
            }
        }
    }
    if let Some(v) = common.seed {
        spec.seed = v;
    }
    let report = verify_theory(&spec);
    println!(
        "contraction: {}/{} bounds hold",
        report.contraction_checked - report.violations.iter().filter(|v| v.suite == "contraction").count(),
        report.contraction_checked
    );
    println!(
        "bias non-accumulation: {}/{} models within cap (need {:.0}%)",
        report.bias_within_cap,
        report.bias_checked,
        100.0 * report.bias_pass_fraction
    );
    for v in &report.violations {
        println!("violation [{}] case {}: {}", v.suite, v.case, v.detail);
    }
    if report.passed() {
        println!("verify: PASS");
        Ok(())
    } else {
        bail!("verify: FAIL ({} violations)", report.violations.len());
    }
}

fn cmd_report(common: &CommonArgs) -> Result<()> {
    let path = common
        .data
        .clone()
        .or_else(|| common.out.as_ref().map(|d| d.join("summary.csv")))
        .context("report requires --data <summary file> or --out <run directory>")?;
    let (header, rows) = read_summary(&path)?;
    println!("{}", path.display());
    for (label, vals) in &rows {
        let cells: Vec<String> = header[1..]
            .iter()
            .zip(vals)
            .map(|(h, v)| format!("{h}={v:.6}"))
            .collect();
        println!("{label}: {}", cells.join("  "));
    }
    Ok(())
}

fn main() -> Result<()> {
    configure_workers()?;
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(common) => cmd_simulate(common),
        Command::Run { algo, common } => cmd_run(algo, common),
        Command::Ingest { common } => cmd_ingest(common),
        Command::Verify { common } => cmd_verify(common),
        Command::Report { common } => cmd_report(common),
    }
}
