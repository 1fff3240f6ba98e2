use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CheckParams, Structure, Tolerances};
use crate::error::{Error, Result};
use crate::gd::{GdTrace, LossKind, MonitorSummary, Schedule};

/// Registered checks, in report order.
pub const CHECK_NAMES: [&str; 9] = [
    "log_approx",
    "smoothness",
    "risk_bound",
    "norm_bounds",
    "param_s",
    "perp_descent",
    "fenchel_young",
    "gen_iter",
    "direction",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// An exact inequality.
    Theorem,
    /// An inequality that uses the sampled strong convexity estimate.
    EstimateConditioned,
    /// A rate or monotonicity claim with unstated constants.
    Trend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub holds: bool,
    /// min over evaluations of bound − quantity; `None` when nothing was evaluated.
    pub worst_slack: Option<f64>,
    /// Checkpoint `t` (or step `j`, or sample index) of the worst slack.
    pub location: Option<usize>,
    pub status: CheckStatus,
    pub kind: CheckKind,
    pub evaluated: usize,
    pub violations: usize,
    pub note: String,
}

impl CheckResult {
    pub fn not_applicable(name: &str, kind: CheckKind, note: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            holds: true,
            worst_slack: None,
            location: None,
            status: CheckStatus::NotApplicable,
            kind,
            evaluated: 0,
            violations: 0,
            note: note.into(),
        }
    }

    pub fn from_tally(tally: &MonitorSummary, kind: CheckKind, note: impl Into<String>) -> Self {
        let holds = tally.violations == 0;
        CheckResult {
            name: tally.name.clone(),
            holds,
            worst_slack: tally.worst_slack,
            location: tally.worst_step,
            status: if tally.checked == 0 {
                CheckStatus::NotApplicable
            } else if holds {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            kind,
            evaluated: tally.checked,
            violations: tally.violations,
            note: note.into(),
        }
    }

    pub fn applicable(&self) -> bool {
        self.status != CheckStatus::NotApplicable
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub name: String,
    /// Log-log slope of the quantity against `t`.
    pub exponent: f64,
    /// `c` in `quantity ≈ c · model(t)`.
    pub coefficient: f64,
    /// RMS of `ln(quantity / (c · model))` over the fitted points.
    pub residual: f64,
    pub model: String,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub digest: String,
    pub loss: LossKind,
    pub schedule: Schedule,
    pub steps: usize,
    pub n: usize,
    pub n_c: usize,
    pub dim: usize,
    pub gamma: Option<f64>,
    pub v_bar_norm: f64,
    pub risk_inf: f64,
    #[serde(with = "crate::json_float")]
    pub lambda_est: f64,
    pub numeric_tol_abs: f64,
    pub numeric_tol_rel: f64,
    pub solver_tolerances: Tolerances,
    pub params: CheckParams,
}

impl ReportMeta {
    pub fn new(s: &Structure, trace: &GdTrace, params: &CheckParams) -> Self {
        ReportMeta {
            digest: s.a.digest(),
            loss: trace.loss,
            schedule: trace.schedule,
            steps: trace.steps,
            n: s.n(),
            n_c: s.n_c(),
            dim: s.a.dim(),
            gamma: s.gamma(),
            v_bar_norm: s.v_bar_norm(),
            risk_inf: s.risk_inf,
            lambda_est: s.lambda(),
            numeric_tol_abs: 1e-9,
            numeric_tol_rel: 1e-12,
            solver_tolerances: s.tolerances,
            params: *params,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub meta: ReportMeta,
    pub checks: Vec<CheckResult>,
    pub trends: Vec<TrendFit>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn trend(&self, name: &str) -> Option<&TrendFit> {
        self.trends.iter().find(|c| c.name == name)
    }

    /// Logical AND of `holds` over applicable checks.
    pub fn all_hold(&self) -> bool {
        self.checks.iter().filter(|c| c.applicable()).all(|c| c.holds)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.applicable() && !c.holds)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Orders results by registration and attaches the metadata.
pub fn build_report(
    meta: ReportMeta,
    mut checks: Vec<CheckResult>,
    trends: Vec<TrendFit>,
) -> Result<VerificationReport> {
    if checks.is_empty() {
        return Err(Error::Usage("a report needs at least one check".into()));
    }
    let rank = |name: &str| CHECK_NAMES.iter().position(|n| *n == name).unwrap_or(usize::MAX);
    checks.sort_by(|a, b| rank(&a.name).cmp(&rank(&b.name)).then(a.name.cmp(&b.name)));
    for w in checks.windows(2) {
        if w[0].name == w[1].name {
            return Err(Error::Usage(format!("check '{}' reported twice", w[0].name)));
        }
    }
    Ok(VerificationReport {
        meta,
        checks,
        trends,
    })
}

/// Least-squares slope of `ln y` on `ln t`; nonpositive `y` are skipped.
pub fn fit_power(ts: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Fits `y ≈ c · f` in log space; returns `(c, rms log residual, points used)`.
pub fn fit_model(ys: &[f64], fs: &[f64]) -> (f64, f64, usize) {
    let logs: Vec<f64> = ys
        .iter()
        .zip(fs)
        .filter(|(y, f)| **y > 0.0 && **f > 0.0 && y.is_finite() && f.is_finite())
        .map(|(y, f)| (y / f).ln())
        .collect();
    if logs.is_empty() {
        return (0.0, 0.0, 0);
    }
    let k = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / k;
    let rms = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / k).sqrt();
    (mean.exp(), rms, logs.len())
}
