//! Serialization fuzz corpus: valid panel, config and report files plus
//! corrupted variants of each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refprice::datagen::{simulate_panel, PriceProcessConfig, SimulationSpec};
use refprice::panelio::{
    format_config, format_panel, format_report, parse_config, parse_panel, parse_report, Config, FitReport,
    Method, SimulationSettings,
};
use refprice::twostep::{grid_search, TwoStepConfig};
use refprice::{CarryoverWeight, Error, EstimatorOptions, MixtureParameters, SegmentParameters};

pub const CORPUS_SIZE: usize = 50;

pub struct Case {
    pub seed: u64,
    pub panel: String,
    pub config: String,
    pub report: String,
}

fn random_truth(rng: &mut ChaCha8Rng, segments: usize, brands: usize) -> MixtureParameters {
    let segs = (0..segments)
        .map(|_| SegmentParameters {
            pi: CarryoverWeight::new(rng.random()).unwrap(),
            alpha0: rng.random_range(-2.0..2.0),
            alpha1: rng.random_range(0.1..3.0),
            intercepts: (1..brands).map(|_| rng.random_range(-1.0..1.0)).collect(),
            beta_gain: rng.random_range(0.0..3.0),
            beta_loss: rng.random_range(0.0..5.0),
            beta_price: rng.random_range(-4.0..-0.5),
        })
        .collect();
    let raw: Vec<f64> = (0..segments).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    MixtureParameters::new(segs, raw.iter().map(|w| w / total).collect()).unwrap()
}

/// Case `i`: a small simulated panel, the config that generated it, and a fit
/// report on it (a grid-search report for every fifth case).
pub fn case(i: usize) -> Case {
    let seed = 1000 + i as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let brands = rng.random_range(2..=5);
    let segments = rng.random_range(1..=3);
    let truth = random_truth(&mut rng, segments, brands);
    let settings = SimulationSettings {
        n_households: rng.random_range(2..=8),
        n_periods: rng.random_range(6..=12),
        seed,
        shared_prices: rng.random(),
        prices: PriceProcessConfig {
            base_prices: (0..brands).map(|_| rng.random_range(0.2..3.0)).collect(),
            promo_probability: rng.random_range(0.0..0.5),
            promo_depth: rng.random_range(0.05..0.5),
            noise_sd: rng.random_range(0.0..0.3),
        },
    };
    let spec = SimulationSpec {
        n_households: settings.n_households,
        n_periods: settings.n_periods,
        truth: truth.clone(),
        prices: settings.prices.clone(),
        seed,
        shared_prices: settings.shared_prices,
    };
    let panel = simulate_panel(&spec).unwrap().panel;
    let config = Config {
        simulation: Some(settings),
        truth: Some(truth),
        estimator: Some(EstimatorOptions::default().with_seed(seed)),
        twostep: Some(TwoStepConfig {
            grid: vec![0.1, 0.35, 0.9],
            init_fraction: 0.3,
        }),
    };
    let opts = EstimatorOptions::default().with_starts(1).with_seed(seed);
    let report = if i.is_multiple_of(5) {
        let cfg = TwoStepConfig {
            grid: vec![0.2, 0.6],
            init_fraction: 0.3,
        };
        FitReport::from_grid_search(&grid_search(&panel, &cfg, &opts).unwrap())
    } else {
        FitReport::from_fit(&refprice::fit(&panel, &opts, None).unwrap(), Method::Joint)
    };
    Case {
        seed,
        panel: format_panel(&panel),
        config: format_config(&config).unwrap(),
        report: format_report(&report).unwrap(),
    }
}

/// Corrupted panel text and the line the error must point at, when known.
pub fn panel_mutations(text: &str, rng: &mut ChaCha8Rng) -> Vec<(String, String, Option<usize>)> {
    let lines: Vec<&str> = text.lines().collect();
    let n = lines.len();
    // file line numbers are 1-based with the header on line 1
    let pick = |rng: &mut ChaCha8Rng| rng.random_range(1..n);
    let with = |idx: usize, row: String| {
        let mut out: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        out[idx] = row;
        out.join("\n") + "\n"
    };
    let fields = |idx: usize| lines[idx].split(',').map(str::to_string).collect::<Vec<_>>();
    let set = |idx: usize, col: usize, value: &str| {
        let mut f = fields(idx);
        f[col] = value.to_string();
        with(idx, f.join(","))
    };
    let mut out = Vec::new();
    out.push(("header".into(), with(0, "household,period,brand,cost,choice".into()), Some(1)));
    let i = pick(rng);
    out.push(("negative price".into(), set(i, 3, "-0.5"), Some(i + 1)));
    let i = pick(rng);
    out.push(("zero price".into(), set(i, 3, "0"), Some(i + 1)));
    let i = pick(rng);
    out.push(("non-numeric price".into(), set(i, 3, "abc"), Some(i + 1)));
    let i = pick(rng);
    out.push(("choice out of range".into(), set(i, 4, "2"), Some(i + 1)));
    let i = pick(rng);
    out.push(("period zero".into(), set(i, 1, "0"), Some(i + 1)));
    let i = pick(rng);
    out.push(("brand zero".into(), set(i, 2, "0"), Some(i + 1)));
    let i = pick(rng);
    out.push(("short row".into(), with(i, fields(i)[..4].join(",")), Some(i + 1)));
    let i = pick(rng);
    out.push(("duplicate row".into(), format!("{text}{}\n", lines[i]), Some(n + 1)));
    let i = pick(rng);
    let dropped: Vec<&str> = lines.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, l)| *l).collect();
    out.push(("missing brand row".into(), dropped.join("\n") + "\n", None));
    // two chosen brands in the period of a random row
    let i = pick(rng);
    let key = fields(i)[..2].join(",");
    let both: Vec<String> = lines
        .iter()
        .enumerate()
        .map(|(j, l)| if j > 0 && l.starts_with(&format!("{key},")) { set(j, 4, "1").lines().nth(j).unwrap().to_string() } else { l.to_string() })
        .collect();
    out.push(("two choices".into(), both.join("\n") + "\n", None));
    // drop the first period of one household
    let h = fields(pick(rng))[0].clone();
    let gap: Vec<&str> = lines
        .iter()
        .filter(|l| !l.starts_with(&format!("{h},1,")))
        .copied()
        .collect();
    out.push(("period gap".into(), gap.join("\n") + "\n", None));
    out.push(("no rows".into(), format!("{}\n", lines[0]), Some(1)));
    out
}

fn replace_line(text: &str, prefix: &str, replacement: &str) -> String {
    let mut done = false;
    text.lines()
        .map(|l| {
            if !done && l.starts_with(prefix) {
                done = true;
                replacement.to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn drop_line(text: &str, prefix: &str) -> String {
    replace_line(text, prefix, "")
}

pub fn config_mutations(text: &str) -> Vec<(String, String)> {
    vec![
        ("schema".into(), text.replace("refprice-config/1", "refprice-config/2")),
        ("pi above one".into(), replace_line(text, "pi = ", "pi = 1.5")),
        ("negative pi".into(), replace_line(text, "pi = ", "pi = -0.1")),
        ("unknown key".into(), text.replace("[truth]\n", "[truth]\nbogus = 1\n")),
        ("missing key".into(), drop_line(text, "alpha0 = ")),
        ("psi does not sum to one".into(), replace_line(text, "psi = ", "psi = [0.2]")),
        ("intercept count".into(), replace_line(text, "intercepts = ", "intercepts = []")),
        ("syntax".into(), replace_line(text, "beta_gain = ", "beta_gain : 1.0")),
        ("wrong type".into(), replace_line(text, "households = ", "households = \"many\"")),
        ("zero households".into(), replace_line(text, "households = ", "households = 0")),
        ("negative noise".into(), replace_line(text, "noise_sd = ", "noise_sd = -1.0")),
        ("grid out of range".into(), replace_line(text, "grid = ", "grid = [0.5, 1.5]")),
    ]
}

pub fn report_mutations(text: &str) -> Vec<(String, String)> {
    vec![
        ("schema".into(), text.replace("refprice-report/1", "refprice-report/0")),
        ("unknown key".into(), text.replace("\n[diagnostics]\n", "\n[diagnostics]\nbogus = 1\n")),
        ("missing key".into(), drop_line(text, "loglik = ")),
        ("wrong type".into(), replace_line(text, "converged = ", "converged = \"yes\"")),
        ("syntax".into(), replace_line(text, "iterations = ", "iterations = = 3")),
        ("unknown method".into(), replace_line(text, "method = ", "method = \"bayes\"")),
    ]
}

/// Whether an error names where in the file it occurred.
pub fn located(err: &Error) -> bool {
    match err {
        Error::Parse { line, .. } => *line >= 1,
        Error::Config(msg) => msg.contains("line ") || msg.contains("schema") || msg.starts_with('['),
        _ => false,
    }
}

/// Runs the whole corpus; returns a description of every failure.
pub fn check() -> Vec<String> {
    let mut failures = Vec::new();
    for i in 0..CORPUS_SIZE {
        let c = case(i);
        let tag = format!("case {i}");

        match parse_panel(&c.panel) {
            Ok(p) if format_panel(&p) == c.panel => {}
            Ok(_) => failures.push(format!("{tag}: panel text changed on round trip")),
            Err(e) => failures.push(format!("{tag}: panel rejected: {e}")),
        }
        match parse_config(&c.config) {
            Ok(cfg) if format_config(&cfg).unwrap() == c.config => {}
            Ok(_) => failures.push(format!("{tag}: config text changed on round trip")),
            Err(e) => failures.push(format!("{tag}: config rejected: {e}")),
        }
        match parse_report(&c.report) {
            Ok(r) if format_report(&r).unwrap() == c.report => {}
            Ok(_) => failures.push(format!("{tag}: report text changed on round trip")),
            Err(e) => failures.push(format!("{tag}: report rejected: {e}")),
        }

        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        for (what, text, line) in panel_mutations(&c.panel, &mut rng) {
            match parse_panel(&text) {
                Ok(_) => failures.push(format!("{tag}: panel {what} accepted")),
                Err(e) if !located(&e) => failures.push(format!("{tag}: panel {what} not located: {e}")),
                Err(Error::Parse { line: got, .. }) if line.is_some_and(|l| l != got) => {
                    failures.push(format!("{tag}: panel {what} at line {got}, expected {}", line.unwrap()))
                }
                Err(_) => {}
            }
        }
        for (what, text) in config_mutations(&c.config) {
            match parse_config(&text) {
                Ok(_) => failures.push(format!("{tag}: config {what} accepted")),
                Err(e) if !located(&e) => failures.push(format!("{tag}: config {what} not located: {e}")),
                Err(_) => {}
            }
        }
        for (what, text) in report_mutations(&c.report) {
            match parse_report(&text) {
                Ok(_) => failures.push(format!("{tag}: report {what} accepted")),
                Err(e) if !located(&e) => failures.push(format!("{tag}: report {what} not located: {e}")),
                Err(_) => {}
            }
        }
    }
    failures
}
