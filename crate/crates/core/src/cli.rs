//! Command-line driver.
//!
//! Exit statuses: 0 success, 2 invalid input or configuration, 3 estimation
//! failure or non-convergence, 4 file I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::compare::compare;
use crate::datagen::simulate_panel;
use crate::error::{Error, Result};
use crate::estimator::{fit, EstimatorOptions};
use crate::panel::ChoicePanel;
use crate::panelio::{
    format_comparison, parse_comparison, parse_report, read_config, read_panel, render_report_table,
    write_config, write_panel, write_report, ComparisonReport, Config, FitReport, Method,
};
use crate::presets;
use crate::twostep::{grid_from_step, grid_search, TwoStepConfig};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_ESTIMATION: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "refprice", version, about = "Reference-price choice models: simulate, estimate, compare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel and write it next to its generating parameters.
    Simulate(SimulateArgs),
    /// Fit all parameters jointly, carry-over weights included.
    Fit(FitArgs),
    /// Fit with one pooled carry-over weight chosen by grid search.
    FitTwostep(TwoStepArgs),
    /// Run both estimators and compare them on the full panel.
    Compare(TwoStepArgs),
    /// Print the parameter table of a fit or comparison report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (TOML, schema refprice-config/1).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of latent segments.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub segments: Option<u64>,
    /// Random seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Leave wall-clock timings out of reports.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Panel file (household,period,brand,price,choice).
    #[arg(long)]
    pub panel: PathBuf,
    /// Number of optimizer starts.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub starts: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TwoStepArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Spacing of the carry-over weight grid on [0, 1].
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Fraction of each household's periods used for initialization.
    #[arg(long)]
    pub init_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report file written by fit, fit-twostep or compare.
    pub report: PathBuf,
}

/// Parses the process arguments, runs the command and maps errors to exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Config(_) => EXIT_VALIDATION,
        Error::Estimation(_) => EXIT_ESTIMATION,
        Error::Io { .. } => EXIT_IO,
    }
}

pub fn execute(cli: Cli) -> Result<ExitCode> {
    let threads = match &cli.command {
        Command::Simulate(a) => a.common.threads,
        Command::Fit(a) => a.common.threads,
        Command::FitTwostep(a) | Command::Compare(a) => a.fit.common.threads,
        Command::Report(_) => None,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n as usize);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit_joint(&a),
        Command::FitTwostep(a) => fit_twostep(&a),
        Command::Compare(a) => run_compare(&a),
        Command::Report(a) => report(&a),
    })
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => read_config(p),
        None => presets::reformulation(),
    }
}

fn require_out(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Error::invalid("--out is required"))
}

/// Truth file written next to a simulated panel: `panel.csv` -> `panel.truth.toml`.
pub fn truth_path(panel: &Path) -> PathBuf {
    panel.with_extension("truth.toml")
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let c = &args.common;
    let out = require_out(c)?;
    let mut cfg = load_config(c.config.as_deref())?;
    let mut spec = cfg.simulation_spec()?;
    if let Some(seed) = c.seed {
        spec.seed = seed;
    }
    if let Some(s) = c.segments {
        spec.truth = presets::leading_segments(&spec.truth, s as usize)?;
    }
    let sim = simulate_panel(&spec)?;
    write_panel(&sim.panel, out)?;

    let sim_settings = cfg.simulation.get_or_insert_with(Default::default);
    sim_settings.seed = spec.seed;
    cfg.truth = Some(spec.truth.clone());
    write_config(&cfg, truth_path(out))?;
    eprintln!(
        "wrote {} households x {} periods x {} brands to {}",
        spec.n_households,
        spec.n_periods,
        spec.n_brands(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn estimator_options(args: &FitArgs, cfg: Option<&Config>) -> Result<EstimatorOptions> {
    let mut opts = cfg
        .and_then(|c| c.estimator.clone())
        .unwrap_or_default();
    let c = &args.common;
    if let Some(s) = c.segments {
        opts.n_segments = s as usize;
    }
    if let Some(seed) = c.seed {
        opts.seed = seed;
    }
    if let Some(n) = args.starts {
        opts.starts = n as usize;
    }
    opts.validate()?;
    Ok(opts)
}

fn twostep_config(args: &TwoStepArgs, cfg: Option<&Config>) -> Result<TwoStepConfig> {
    let mut ts = cfg.and_then(|c| c.twostep.clone()).unwrap_or_default();
    if let Some(step) = args.grid_step {
        ts.grid = grid_from_step(step)?;
    }
    if let Some(f) = args.init_fraction {
        ts.init_fraction = f;
    }
    ts.validate()?;
    Ok(ts)
}

fn inputs(args: &FitArgs) -> Result<(ChoicePanel, Option<Config>)> {
    let cfg = args.common.config.as_deref().map(read_config).transpose()?;
    let panel = read_panel(&args.panel).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", args.panel.display()),
        },
        other => other,
    })?;
    Ok((panel, cfg))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => crate::panelio::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish_fit(report: FitReport, common: &Common) -> Result<ExitCode> {
    let report = if common.no_timing { report.without_timing() } else { report };
    let report = &report;
    match common.out.as_deref() {
        Some(p) => write_report(report, p)?,
        None => emit(&crate::panelio::format_report(report)?, None)?,
    }
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "error: optimizer did not converge after {} iterations (gradient norm {:e})",
            report.iterations, report.diagnostics.gradient_norm
        );
        Ok(ExitCode::from(EXIT_ESTIMATION))
    }
}

fn fit_joint(args: &FitArgs) -> Result<ExitCode> {
    let (panel, cfg) = inputs(args)?;
    let opts = estimator_options(args, cfg.as_ref())?;
    let result = fit(&panel, &opts, None)?;
    finish_fit(FitReport::from_fit(&result, Method::Joint), &args.common)
}

fn fit_twostep(args: &TwoStepArgs) -> Result<ExitCode> {
    let (panel, cfg) = inputs(&args.fit)?;
    let opts = estimator_options(&args.fit, cfg.as_ref())?;
    let ts = twostep_config(args, cfg.as_ref())?;
    let result = grid_search(&panel, &ts, &opts)?;
    finish_fit(FitReport::from_grid_search(&result), &args.fit.common)
}

fn run_compare(args: &TwoStepArgs) -> Result<ExitCode> {
    let (panel, cfg) = inputs(&args.fit)?;
    let opts = estimator_options(&args.fit, cfg.as_ref())?;
    let ts = twostep_config(args, cfg.as_ref())?;
    let cmp = compare(&panel, &opts, &ts);
    let mut report = ComparisonReport::from_comparison(&cmp);
    if args.fit.common.no_timing {
        report = report.without_timing();
    }
    emit(&format_comparison(&report)?, args.fit.common.out.as_deref())?;
    if report.complete {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            eprintln!("error: {f}");
        }
        Ok(ExitCode::from(EXIT_ESTIMATION))
    }
}

fn report(args: &ReportArgs) -> Result<ExitCode> {
    let text = crate::panelio::read_text(&args.report)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let schema = table.get("schema").and_then(|v| v.as_str()).unwrap_or("");
    let rendered = if schema == crate::panelio::COMPARISON_SCHEMA {
        parse_comparison(&text)?.render()
    } else {
        render_report_table(&parse_report(&text)?)
    };
    print!("{rendered}");
    Ok(ExitCode::SUCCESS)
}
