use super::Structure;
use crate::gd::{numeric_tol, MonitorSummary, StepInfo, StepMonitor};

/// Per-step contraction of the excess risk once it is small:
/// `R_{j+1} − R̄ ≤ (R_j − R̄) · exp(−r(1−ε) γ γ_j η̂_j (1 − η̂_j/2))`
/// whenever `R_j − R̄ ≤ min{ε/n, λ(1−r)/2}`.
#[derive(Clone, Debug)]
pub struct GenIterMonitor {
    summary: MonitorSummary,
    active: bool,
    risk_inf: f64,
    gamma: f64,
    threshold: f64,
    rate: f64,
    /// Smallest excess seen, for diagnosis when the threshold is never met.
    pub min_excess: f64,
}

impl GenIterMonitor {
    pub fn new(s: &Structure, eps: f64, r: f64) -> Self {
        let active = s.n_c() > 0 && !s.decomposition.sc_rows.is_empty();
        let lambda_part = if s.lambda().is_finite() {
            s.lambda() * (1.0 - r) / 2.0
        } else {
            f64::INFINITY
        };
        GenIterMonitor {
            summary: MonitorSummary::new("gen_iter"),
            active,
            risk_inf: s.risk_inf,
            gamma: s.gamma().unwrap_or(0.0),
            threshold: (eps / s.n() as f64).min(lambda_part),
            rate: r * (1.0 - eps),
            min_excess: f64::INFINITY,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl StepMonitor for GenIterMonitor {
    fn observe(&mut self, s: &StepInfo) {
        if !self.active {
            return;
        }
        let excess = s.risk - self.risk_inf;
        self.min_excess = self.min_excess.min(excess);
        if excess > self.threshold || excess <= 0.0 {
            return;
        }
        let exponent = self.rate * self.gamma * s.gamma * s.eta_hat * (1.0 - s.eta_hat / 2.0);
        let bound = excess * (-exponent).exp();
        let next = s.risk_next - self.risk_inf;
        self.summary.record(s.j, bound - next, numeric_tol(s.risk));
    }

    fn summary(&self) -> MonitorSummary {
        self.summary.clone()
    }
}
