use serde::{Deserialize, Serialize};

/// Scalars of one gradient step `w_j → w_{j+1}`.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub j: usize,
    pub eta: f64,
    /// η_j R(w_j)
    pub eta_hat: f64,
    /// |∇R(w_j)| / R(w_j)
    pub gamma: f64,
    pub grad_norm: f64,
    pub risk: f64,
    pub risk_next: f64,
}

/// Per-step observer; sees every step regardless of checkpointing.
pub trait StepMonitor {
    fn observe(&mut self, step: &StepInfo);
    fn summary(&self) -> MonitorSummary;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub name: String,
    /// Steps at which the inequality was evaluated.
    pub checked: usize,
    pub violations: usize,
    /// min over checked steps of bound − quantity.
    pub worst_slack: Option<f64>,
    pub worst_step: Option<usize>,
    /// First step at which the inequality applied.
    pub first_step: Option<usize>,
}

impl MonitorSummary {
    pub fn new(name: &str) -> Self {
        MonitorSummary {
            name: name.to_string(),
            checked: 0,
            violations: 0,
            worst_slack: None,
            worst_step: None,
            first_step: None,
        }
    }

    /// Records `slack = bound − quantity`; a violation when below `−tol`.
    pub fn record(&mut self, j: usize, slack: f64, tol: f64) {
        self.checked += 1;
        self.first_step.get_or_insert(j);
        if !(slack >= -tol) {
            self.violations += 1;
        }
        if self.worst_slack.is_none_or(|w| slack < w || slack.is_nan()) {
            self.worst_slack = Some(slack);
            self.worst_step = Some(j);
        }
    }
}

/// Absolute 1e-9 plus 1e-12 relative to the magnitude compared.
pub fn numeric_tol(magnitude: f64) -> f64 {
    1e-9 + 1e-12 * magnitude.abs()
}

/// `R(w_{j+1}) ≤ R(w_j) − η_j(1 − η̂_j/2)|∇R(w_j)|²`.
#[derive(Clone, Debug)]
pub struct SmoothnessMonitor(MonitorSummary);

impl Default for SmoothnessMonitor {
    fn default() -> Self {
        SmoothnessMonitor(MonitorSummary::new("smoothness"))
    }
}

impl StepMonitor for SmoothnessMonitor {
    fn observe(&mut self, s: &StepInfo) {
        let bound = s.risk - s.eta * (1.0 - s.eta_hat / 2.0) * s.grad_norm * s.grad_norm;
        self.0
            .record(s.j, bound - s.risk_next, numeric_tol(s.risk));
    }

    fn summary(&self) -> MonitorSummary {
        self.0.clone()
    }
}
