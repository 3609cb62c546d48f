//! Fit and comparison reports.
//!
//! Reports are TOML documents preceded by a commented, human-readable
//! parameter table. The table is regenerated from the data on every write, so
//! parsing and re-writing a report reproduces it byte for byte. Timing fields
//! live in an optional trailing `[timing]` table; everything else is
//! deterministic for a fixed seed.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compare::Comparison;
use crate::error::{Error, Result};
use crate::estimator::{
    estimates_table, significance_flag, FitResult, SegmentTable, SIGNIFICANCE_LEVEL,
};
use crate::twostep::GridSearchResult;

pub const REPORT_SCHEMA: &str = "refprice-report/1";
pub const COMPARISON_SCHEMA: &str = "refprice-compare/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Joint,
    Twostep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDiagnostics {
    pub floor_events: usize,
    pub gradient_norm: f64,
    pub best_start: usize,
    pub pi_clamped: bool,
    pub n_parameters: usize,
    pub n_observations: usize,
}

/// Standard errors of one segment; absent scalars and `nan` intercepts are unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdErrorReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    pub intercepts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentReport {
    pub pi: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub intercepts: Vec<f64>,
    pub beta_gain: f64,
    pub beta_loss: f64,
    pub beta_price: f64,
    /// Omitted for a single-segment model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    pub std_error: StdErrorReport,
}

impl SegmentReport {
    fn estimates(&self) -> SegmentTable<f64> {
        SegmentTable {
            pi: self.pi,
            alpha0: self.alpha0,
            alpha1: self.alpha1,
            intercepts: self.intercepts.clone(),
            beta_gain: self.beta_gain,
            beta_loss: self.beta_loss,
            beta_price: self.beta_price,
            psi: self.psi.unwrap_or(1.0),
        }
    }

    fn std_errors(&self) -> SegmentTable<Option<f64>> {
        let e = &self.std_error;
        SegmentTable {
            pi: e.pi,
            alpha0: e.alpha0,
            alpha1: e.alpha1,
            intercepts: e.intercepts.iter().map(|v| (!v.is_nan()).then_some(*v)).collect(),
            beta_gain: e.beta_gain,
            beta_loss: e.beta_loss,
            beta_price: e.beta_price,
            psi: e.psi,
        }
    }

    /// Significance at the reporting level, recomputed from estimate and SE.
    pub fn significance(&self) -> SegmentTable<Option<bool>> {
        self.estimates()
            .zip(&self.std_errors(), |e, s| significance_flag(*e, *s, SIGNIFICANCE_LEVEL))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRow {
    pub pi: f64,
    /// `nan` when the conditional fit failed.
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTiming {
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReport {
    pub schema: String,
    pub method: Method,
    pub n_brands: usize,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_restarts_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_hat: Option<f64>,
    pub diagnostics: ReportDiagnostics,
    pub segment: Vec<SegmentReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profile: Vec<ProfileRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<FitTiming>,
}

impl FitReport {
    pub fn from_fit(fit: &FitResult, method: Method) -> Self {
        let mix = &fit.parameters;
        let single = mix.n_segments() == 1;
        let segment = (0..mix.n_segments())
            .map(|s| {
                let est = estimates_table(mix, s);
                let se = &fit.std_errors[s];
                SegmentReport {
                    pi: est.pi,
                    alpha0: est.alpha0,
                    alpha1: est.alpha1,
                    intercepts: est.intercepts,
                    beta_gain: est.beta_gain,
                    beta_loss: est.beta_loss,
                    beta_price: est.beta_price,
                    psi: (!single).then_some(est.psi),
                    std_error: StdErrorReport {
                        pi: se.pi,
                        alpha0: se.alpha0,
                        alpha1: se.alpha1,
                        intercepts: se.intercepts.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                        beta_gain: se.beta_gain,
                        beta_loss: se.beta_loss,
                        beta_price: se.beta_price,
                        psi: if single { None } else { se.psi },
                    },
                }
            })
            .collect();
        let d = &fit.diagnostics;
        Self {
            schema: REPORT_SCHEMA.to_string(),
            method,
            n_brands: mix.n_brands(),
            loglik: fit.loglik,
            converged: fit.converged,
            iterations: fit.iterations,
            n_restarts_used: fit.n_restarts_used,
            pinned_pi: fit.pinned_pi,
            pi_hat: None,
            diagnostics: ReportDiagnostics {
                floor_events: d.floor_events,
                gradient_norm: d.gradient_norm,
                best_start: d.best_start,
                pi_clamped: d.pi_clamped,
                n_parameters: d.n_parameters,
                n_observations: d.n_observations,
            },
            segment,
            profile: Vec::new(),
            timing: Some(FitTiming {
                wall_time_secs: fit.wall_time,
            }),
        }
    }

    pub fn from_grid_search(result: &GridSearchResult) -> Self {
        let mut report = Self::from_fit(&result.fit, Method::Twostep);
        report.pi_hat = Some(result.pi_hat);
        report.profile = result
            .profile
            .iter()
            .map(|p| ProfileRow {
                pi: p.pi,
                loglik: p.loglik.unwrap_or(f64::NAN),
                converged: p.converged,
            })
            .collect();
        report.timing = Some(FitTiming {
            wall_time_secs: result.wall_time,
        });
        report
    }

    /// The same report with the timing table dropped.
    pub fn without_timing(mut self) -> Self {
        self.timing = None;
        self
    }
}

fn cell(value: f64, flag: Option<bool>) -> String {
    let star = if flag == Some(true) { " (*)" } else { "" };
    format!("{value:.4}{star}")
}

/// Human-readable parameter table of a fit report.
pub fn render_report_table(report: &FitReport) -> String {
    let n = report.segment.len();
    let title = match report.method {
        Method::Joint => "Joint estimation",
        Method::Twostep => "Two-step estimation",
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{title}: {n} segment{}, {} brands",
        if n == 1 { "" } else { "s" },
        report.n_brands
    );
    let _ = writeln!(out);
    let mut header = format!("{:<14}", "Coefficient");
    for s in 1..=n {
        let _ = write!(header, "{:>18}", format!("Segment {s}"));
    }
    let _ = writeln!(out, "{}", header.trim_end());

    let tables: Vec<(SegmentTable<f64>, SegmentTable<Option<bool>>)> = report
        .segment
        .iter()
        .map(|s| (s.estimates(), s.significance()))
        .collect();
    let names: Vec<String> = tables[0].0.entries().into_iter().map(|(n, _)| n).collect();
    for (row, name) in names.iter().enumerate() {
        if name == "psi" && n == 1 {
            continue;
        }
        let mut line = format!("{name:<14}");
        for (est, sig) in &tables {
            let v = *est.entries()[row].1;
            let f = *sig.entries()[row].1;
            let _ = write!(line, "{:>18}", cell(v, f));
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Log-likelihood: {:.2}", report.loglik);
    if let Some(pi) = report.pi_hat {
        let _ = writeln!(
            out,
            "Pooled carry-over weight: {pi} (grid of {} points)",
            report.profile.len()
        );
    }
    let _ = writeln!(
        out,
        "Converged: {} after {} iterations, {} start(s)",
        report.converged, report.iterations, report.n_restarts_used
    );
    let _ = writeln!(out, "(*) significant at the {SIGNIFICANCE_LEVEL} level");
    out
}

fn commented(text: &str) -> String {
    text.lines()
        .map(|l| if l.is_empty() { "#".to_string() } else { format!("# {l}") })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn format_report(report: &FitReport) -> Result<String> {
    let body = toml::to_string(report).map_err(|e| Error::Config(e.to_string()))?;
    Ok(format!("{}\n\n{body}", commented(&render_report_table(report))))
}

fn check_schema(text: &str, expected: &str) -> Result<()> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    match table.get("schema").and_then(|v| v.as_str()) {
        Some(s) if s == expected => Ok(()),
        Some(s) => Err(Error::Config(format!(
            "schema version mismatch: expected {expected:?}, found {s:?}"
        ))),
        None => Err(Error::Config(format!("missing schema = {expected:?}"))),
    }
}

pub fn parse_report(text: &str) -> Result<FitReport> {
    check_schema(text, REPORT_SCHEMA)?;
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_report(report: &FitReport, path: impl AsRef<Path>) -> Result<()> {
    super::write_text(path.as_ref(), &format_report(report)?)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<FitReport> {
    parse_report(&super::read_text(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSummary {
    pub pi: Vec<f64>,
    pub psi: Vec<f64>,
    pub fitted_loglik: f64,
    pub full_loglik: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStepSummary {
    pub pi_hat: f64,
    pub psi: Vec<f64>,
    pub calibration_loglik: f64,
    pub full_loglik: f64,
    pub converged: bool,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonTiming {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twostep_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_ratio: Option<f64>,
}

const COMPARISON_NOTE: &str = "both log-likelihoods are evaluated on every period of the panel; \
the two-step fit was estimated on the calibration periods only";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonReport {
    pub schema: String,
    pub complete: bool,
    pub failures: Vec<String>,
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twostep: Option<TwoStepSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<ComparisonTiming>,
}

impl ComparisonReport {
    pub fn from_comparison(c: &Comparison) -> Self {
        let joint = c.joint.as_ref().zip(c.joint_full_loglik).map(|(f, full)| JointSummary {
            pi: f.parameters.segments().iter().map(|s| s.pi.value()).collect(),
            psi: f.parameters.psi().to_vec(),
            fitted_loglik: f.loglik,
            full_loglik: full,
            converged: f.converged,
        });
        let twostep = c.twostep.as_ref().zip(c.twostep_full_loglik).map(|(g, full)| TwoStepSummary {
            pi_hat: g.pi_hat,
            psi: g.fit.parameters.psi().to_vec(),
            calibration_loglik: g.fit.loglik,
            full_loglik: full,
            converged: g.fit.converged,
            grid_points: g.profile.len(),
        });
        Self {
            schema: COMPARISON_SCHEMA.to_string(),
            complete: c.is_complete(),
            failures: c.failures.clone(),
            note: COMPARISON_NOTE.to_string(),
            joint,
            twostep,
            timing: Some(ComparisonTiming {
                joint_secs: c.joint.as_ref().map(|f| f.wall_time),
                twostep_secs: c.twostep.as_ref().map(|g| g.wall_time),
                speed_ratio: c.speed_ratio,
            }),
        }
    }

    /// The same report with the timing table dropped.
    pub fn without_timing(mut self) -> Self {
        self.timing = None;
        self
    }

    /// Human-readable side-by-side summary.
    pub fn render(&self) -> String {
        let mut out = String::from("Joint estimation vs two-step grid search\n\n");
        let n = self
            .joint
            .as_ref()
            .map_or(self.twostep.as_ref().map_or(0, |t| t.psi.len()), |j| j.pi.len());
        let _ = writeln!(out, "{:<10}{:>14}{:>14}", "Segment", "joint pi", "two-step pi");
        for s in 0..n {
            let j = self.joint.as_ref().map_or("-".into(), |j| format!("{:.4}", j.pi[s]));
            let t = self.twostep.as_ref().map_or("-".into(), |t| format!("{:.4}", t.pi_hat));
            let _ = writeln!(out, "{:<10}{j:>14}{t:>14}", s + 1);
        }
        let _ = writeln!(out);
        let ll = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let _ = writeln!(
            out,
            "Full-panel log-likelihood: joint {}, two-step {}",
            ll(self.joint.as_ref().map(|j| j.full_loglik)),
            ll(self.twostep.as_ref().map(|t| t.full_loglik))
        );
        if let Some(t) = &self.timing {
            let secs = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}s"));
            let _ = write!(
                out,
                "Wall-clock: joint {}, two-step {}",
                secs(t.joint_secs),
                secs(t.twostep_secs)
            );
            match t.speed_ratio {
                Some(r) => {
                    let _ = writeln!(out, " (ratio {r:.1})");
                }
                None => {
                    let _ = writeln!(out);
                }
            }
        }
        let _ = writeln!(out, "Note: {}", self.note);
        for f in &self.failures {
            let _ = writeln!(out, "FAILED: {f}");
        }
        out
    }
}

pub fn format_comparison(report: &ComparisonReport) -> Result<String> {
    let body = toml::to_string(report).map_err(|e| Error::Config(e.to_string()))?;
    Ok(format!("{}\n\n{body}", commented(&report.render())))
}

pub fn parse_comparison(text: &str) -> Result<ComparisonReport> {
    check_schema(text, COMPARISON_SCHEMA)?;
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
