//! Helpers that drive the `refprice` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use refprice::datagen::PriceProcessConfig;
use refprice::panelio::{write_config, Config, SimulationSettings};
use refprice::twostep::{grid_from_step, TwoStepConfig};
use refprice::EstimatorOptions;

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refprice"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A small two-segment configuration that every command finishes quickly on.
pub fn small_config(dir: &Path) -> PathBuf {
    let cfg = Config {
        simulation: Some(SimulationSettings {
            n_households: 60,
            n_periods: 24,
            seed: 3,
            shared_prices: false,
            prices: PriceProcessConfig {
                base_prices: vec![1.0, 1.1, 0.9, 0.8],
                promo_probability: 0.15,
                promo_depth: 0.3,
                noise_sd: 0.1,
            },
        }),
        truth: Some(super::two_segment_truth()),
        estimator: Some(EstimatorOptions::default().with_segments(2).with_starts(2)),
        twostep: Some(TwoStepConfig {
            grid: grid_from_step(0.25).unwrap(),
            init_fraction: 0.3,
        }),
    };
    let path = dir.join("small.toml");
    write_config(&cfg, &path).unwrap();
    path
}

fn record(dir: &Path, args: &[String], file: Option<&str>, failures: &mut Vec<String>) -> Vec<u8> {
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(dir, &args);
    if !out.status.success() {
        failures.push(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
    }
    let mut bytes = out.stdout;
    if let Some(f) = file {
        bytes.extend(std::fs::read(dir.join(f)).unwrap_or_default());
    }
    bytes
}

/// Runs every command twice under each thread count with timings off and
/// returns the commands whose output bytes differed.
pub fn determinism_failures(dir: &Path) -> Vec<String> {
    let config = small_config(dir).to_str().unwrap().to_string();
    let names = ["simulate", "truth", "fit", "fit-twostep", "compare", "report"];
    let mut runs: Vec<Vec<Vec<u8>>> = Vec::new();
    let mut failures = Vec::new();
    for (run_no, threads) in ["1", "1", "4", "4"].iter().enumerate() {
        let panel = format!("panel-{run_no}.csv");
        let truth = format!("panel-{run_no}.truth.toml");
        let fit_out = format!("fit-{run_no}.toml");
        let with = |cmd: &str, extra: &[&str]| -> Vec<String> {
            let mut v = vec![cmd, "--config", &config, "--threads", threads, "--seed", "7"];
            v.extend(extra);
            v.into_iter().map(String::from).collect()
        };
        let mut outputs = Vec::new();
        outputs.push(record(dir, &with("simulate", &["--out", &panel]), Some(&panel), &mut failures));
        outputs.push(std::fs::read(dir.join(&truth)).unwrap_or_default());
        let fit = with("fit", &["--panel", &panel, "--no-timing", "--out", &fit_out]);
        outputs.push(record(dir, &fit, Some(&fit_out), &mut failures));
        let twostep = with("fit-twostep", &["--panel", &panel, "--no-timing"]);
        outputs.push(record(dir, &twostep, None, &mut failures));
        let cmp = with("compare", &["--panel", &panel, "--no-timing"]);
        outputs.push(record(dir, &cmp, None, &mut failures));
        let report = vec!["report".to_string(), fit_out.clone()];
        outputs.push(record(dir, &report, None, &mut failures));
        runs.push(outputs);
    }
    for (i, name) in names.iter().enumerate() {
        if runs[0][i].is_empty() {
            failures.push(format!("{name}: no output"));
        }
        for (r, run) in runs.iter().enumerate().skip(1) {
            if run[i] != runs[0][i] {
                failures.push(format!("{name}: run {r} differs from run 0"));
            }
        }
    }
    failures
}
