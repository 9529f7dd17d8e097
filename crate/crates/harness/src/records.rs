//! Comma-separated record files. Floats are printed with 17 significant
//! digits so re-parsing a file reproduces the in-memory values exactly.

use anyhow::{bail, Context, Result};
use smc2_core::smc2fw::StepRecord;

/// 17 significant digits round-trip every finite f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn records_header(dim_theta: usize) -> String {
    let mut cols = vec![
        "time".to_string(),
        "block".to_string(),
        "log_evidence".to_string(),
        "ess".to_string(),
        "rejuvenated".to_string(),
        "transition_draws".to_string(),
        "millis".to_string(),
        "state_mean".to_string(),
        "prediction".to_string(),
    ];
    for k in 0..dim_theta {
        cols.push(format!("theta_mean_{k}"));
    }
    for k in 0..dim_theta {
        cols.push(format!("theta_sd_{k}"));
    }
    cols.join(",")
}

pub fn record_line(r: &StepRecord) -> String {
    let mut cols = vec![
        r.time.to_string(),
        r.block.to_string(),
        fmt_f64(r.log_evidence),
        fmt_f64(r.ess),
        (r.rejuvenated as u8).to_string(),
        r.transition_draws.to_string(),
        fmt_f64(r.millis),
        fmt_f64(r.state_mean),
    ];
    cols.push(r.prediction.map(fmt_f64).unwrap_or_default());
    cols.extend(r.theta_mean.iter().map(|&v| fmt_f64(v)));
    cols.extend(r.theta_sd.iter().map(|&v| fmt_f64(v)));
    cols.join(",")
}

pub fn write_records(records: &[StepRecord], dim_theta: usize) -> String {
    let mut out = String::new();
    out.push_str(&records_header(dim_theta));
    out.push('\n');
    for r in records {
        out.push_str(&record_line(r));
        out.push('\n');
    }
    out
}

/// Parses a record file produced by [`write_records`].
pub fn read_records(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty record file")?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = cols.iter().filter(|c| c.starts_with("theta_mean_")).count();
    if cols.len() != 9 + 2 * dim {
        bail!("malformed header `{header}`");
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            bail!("line {}: expected {} fields, got {}", lineno + 2, cols.len(), f.len());
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().with_context(|| format!("line {}: bad float `{s}`", lineno + 2))
        };
        records.push(StepRecord {
            time: f[0].parse().with_context(|| format!("line {}: bad time", lineno + 2))?,
            block: f[1].parse().with_context(|| format!("line {}: bad block", lineno + 2))?,
            log_evidence: parse_f(f[2])?,
            ess: parse_f(f[3])?,
            rejuvenated: f[4] == "1",
            transition_draws: f[5]
                .parse()
                .with_context(|| format!("line {}: bad draws", lineno + 2))?,
            millis: parse_f(f[6])?,
            state_mean: parse_f(f[7])?,
            prediction: if f[8].is_empty() { None } else { Some(parse_f(f[8])?) },
            theta_mean: f[9..9 + dim].iter().map(|s| parse_f(s)).collect::<Result<_>>()?,
            theta_sd: f[9 + dim..].iter().map(|s| parse_f(s)).collect::<Result<_>>()?,
        });
    }
    Ok(records)
}
