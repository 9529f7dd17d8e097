//! End-to-end checks of the command-line interface through the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn smc2(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smc2"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.txt");
    let text = format!(
        "\
[model]
model = finite
levels = -1, 0, 1
obs_sd = 0.8
a = 1.0
n_steps = 12

[sampler]
algo = smc2fw
n_theta = 40
n_x = 10
window = 5
bandwidth = 0.1

[run]
seed = 5
replicates = 2
{extra}
"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_produces_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("run");
    let result = smc2(
        &["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(out.join("replicate_000.csv").exists());
    assert!(out.join("replicate_001.csv").exists());
    assert!(out.join("summary.csv").exists());

    let report = smc2(
        &["report", "--data", out.join("summary.csv").to_str().unwrap()],
        &[],
    );
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("mean:"), "{text}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    // Same run twice but with different replicate counts via the flag.
    for (out, reps) in [(&out1, "1"), (&out2, "3")] {
        let result = smc2(
            &[
                "run",
                "--config",
                config.to_str().unwrap(),
                "--replicates",
                reps,
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    }
    assert!(out1.join("replicate_000.csv").exists());
    assert!(!out1.join("replicate_001.csv").exists());
    assert!(out2.join("replicate_002.csv").exists());
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out1 = dir.path().join("w1");
    let out8 = dir.path().join("w8");
    for (out, workers) in [(&out1, "1"), (&out8, "8")] {
        let result = smc2(
            &["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[("SMC2_WORKERS", workers)],
        );
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    }
    for name in ["replicate_000.csv", "replicate_001.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(out1.join(name)).unwrap(),
            std::fs::read(out8.join(name)).unwrap(),
            "{name} differs across worker counts"
        );
    }
}

#[test]
fn simulate_then_run_on_file_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let data = dir.path().join("obs.txt");
    let result = smc2(
        &["simulate", "--config", config.to_str().unwrap(), "--out", data.to_str().unwrap()],
        &[],
    );
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let lines = std::fs::read_to_string(&data).unwrap().lines().count();
    assert_eq!(lines, 12);

    let out = dir.path().join("run");
    let result = smc2(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(out.join("summary.csv").exists());
}

#[test]
fn ingest_normalizes_prices() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.txt");
    std::fs::write(&prices, "100\n101\n99\n102\n98\n103\n").unwrap();
    let out = dir.path().join("returns.txt");
    let result = smc2(
        &["ingest", "--data", prices.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let returns: Vec<f64> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(returns.len(), 5);
    let m = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / m;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m - 1.0);
    assert!((var - 1.0).abs() < 1e-12);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "100\noops\n").unwrap();
    let result = smc2(&["ingest", "--data", bad.to_str().unwrap()], &[]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("line 2"));
}

#[test]
fn verify_passes_and_reports() {
    let result = smc2(&["verify", "--seed", "3"], &[]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let text = String::from_utf8_lossy(&result.stdout);
    assert!(text.contains("verify: PASS"), "{text}");
    assert!(text.contains("contraction: 100/100"), "{text}");
}

#[test]
fn bad_inputs_exit_nonzero() {
    let result = smc2(&["run", "--config", "/nonexistent/config.txt"], &[]);
    assert!(!result.status.success());
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    // kalman-ibis is only defined for the lg model.
    let result = smc2(
        &[
            "run",
            "--algo",
            "kalman-ibis",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("x").to_str().unwrap(),
        ],
        &[],
    );
    assert!(!result.status.success());
    let result = smc2(&["run", "--algo", "nope", "--config", config.to_str().unwrap()], &[]);
    assert!(!result.status.success());
}
