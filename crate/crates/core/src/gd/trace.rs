use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LossKind, MonitorSummary, Schedule};
use crate::error::{Error, Result};

/// State of the run at iterate `w_t`; accumulators cover steps `j < t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    pub risk: f64,
    pub grad_norm: f64,
    /// |∇R(w_t)| / R(w_t)
    pub gamma_t: f64,
    /// η_t R(w_t)
    pub eta_hat: f64,
    pub norm_w: f64,
    pub proj_s_norm: f64,
    pub proj_perp_norm: f64,
    pub w: Vec<f64>,
    pub dir: Vec<f64>,
    pub proj_s: Vec<f64>,
    /// R_c(w_t) = L(A_c w_t)/n
    pub risk_c: f64,
    /// Σ η_j |∇L(A_c w_j)|₁ / n
    pub perceptron_sum: f64,
    pub sum_eta: f64,
    /// Σ η̂_j γ_j
    pub sum_etahat_gamma: f64,
    /// Σ η̂_j (1 − η̂_j/2) γ_j²
    pub descent_sum: f64,
    /// Σ η_j R_c(w_j)
    pub sum_eta_rc: f64,
    /// Σ η_j ⟨∇R_c(w_j), Π_S w_j⟩
    pub sum_eta_cross: f64,
    /// sup_{j<t} |Π_S w_j|
    pub sup_proj_s: f64,
    /// Minimizer of R over the ball of radius |w_t|.
    pub w_bar: Option<Vec<f64>>,
    pub w_bar_risk: Option<f64>,
    /// Gradient-mapping norm reached by the ball solver.
    pub w_bar_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdTrace {
    pub loss: LossKind,
    pub schedule: Schedule,
    pub steps: usize,
    pub per_decade: usize,
    pub dim: usize,
    pub digest: String,
    pub checkpoints: Vec<Checkpoint>,
    /// Streamed per-step results, the smoothness monitor first.
    pub monitors: Vec<MonitorSummary>,
}

const SCALAR_COLUMNS: [&str; 19] = [
    "t",
    "risk",
    "grad_norm",
    "gamma_t",
    "eta_hat",
    "norm_w",
    "proj_s_norm",
    "proj_perp_norm",
    "risk_c",
    "perceptron_sum",
    "sum_eta",
    "sum_etahat_gamma",
    "descent_sum",
    "sum_eta_rc",
    "sum_eta_cross",
    "sup_proj_s",
    "w_bar_norm",
    "w_bar_risk",
    "w_bar_residual",
];

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl GdTrace {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("trace has at least one checkpoint")
    }

    pub fn monitor(&self, name: &str) -> Option<&MonitorSummary> {
        self.monitors.iter().find(|m| m.name == name)
    }

    /// One row per checkpoint: the scalar columns, then `w_k`, `dir_k`, `proj_s_k`, `w_bar_k`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = SCALAR_COLUMNS.iter().map(|s| s.to_string()).collect();
        for prefix in ["w", "dir", "proj_s", "w_bar"] {
            header.extend((1..=self.dim).map(|k| format!("{prefix}_{k}")));
        }
        wtr.write_record(&header)?;
        for c in &self.checkpoints {
            let w_bar_norm = c.w_bar.as_ref().map(|w| crate::linalg::norm(w));
            let mut row = vec![
                c.t.to_string(),
                fmt_f64(c.risk),
                fmt_f64(c.grad_norm),
                fmt_f64(c.gamma_t),
                fmt_f64(c.eta_hat),
                fmt_f64(c.norm_w),
                fmt_f64(c.proj_s_norm),
                fmt_f64(c.proj_perp_norm),
                fmt_f64(c.risk_c),
                fmt_f64(c.perceptron_sum),
                fmt_f64(c.sum_eta),
                fmt_f64(c.sum_etahat_gamma),
                fmt_f64(c.descent_sum),
                fmt_f64(c.sum_eta_rc),
                fmt_f64(c.sum_eta_cross),
                fmt_f64(c.sup_proj_s),
                opt(w_bar_norm),
                opt(c.w_bar_risk),
                opt(c.w_bar_residual),
            ];
            row.extend(c.w.iter().map(|v| fmt_f64(*v)));
            row.extend(c.dir.iter().map(|v| fmt_f64(*v)));
            row.extend(c.proj_s.iter().map(|v| fmt_f64(*v)));
            match &c.w_bar {
                Some(wb) => row.extend(wb.iter().map(|v| fmt_f64(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), self.dim)),
            }
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("trace.csv", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(f))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
