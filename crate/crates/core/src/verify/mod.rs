//! Bound checks along a gradient descent trace.
//!
//! [`analyze`] computes the structural objects a trace is checked against
//! (decomposition, margin, `v̄`, `R̄`, `λ`); [`verify_trace`] evaluates every
//! registered check and collects trend fits into a [`VerificationReport`].

mod checks;
mod monitor;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MarginMatrix;
use crate::decompose::{partition, Decomposition};
use crate::error::Result;
use crate::gd::{self, GdTrace, LossKind, RunOptions, Schedule, StepMonitor};
use crate::linalg::norm;
use crate::margin::{self, MarginSolution};
use crate::scvx::{self, ScOptimum};

pub use checks::{
    norm_lower_bound, norm_upper_bound, excess_model, direction_bound,
    check_direction, check_fenchel_young, check_gen_iter, check_log_approx, check_norm_bounds,
    check_param_s, check_perp_descent, check_risk_bound, check_smoothness, direction_threshold,
};
pub use monitor::GenIterMonitor;
pub use report::{
    build_report, fit_model, fit_power, CheckKind, CheckResult, CheckStatus, ReportMeta, TrendFit,
    VerificationReport, CHECK_NAMES,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub margin: f64,
    pub scvx: f64,
    pub ball: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            margin: margin::MARGIN_TOL,
            scvx: scvx::SCVX_TOL,
            ball: gd::BALL_TOL,
        }
    }
}

/// Parameters of the checks that have free constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    /// Samples per ε level for the log-approximation check.
    pub log_approx_samples: usize,
    pub seed: u64,
    /// Fenchel–Young applies once `R(w_t) − R̄ ≤ ε/n`.
    pub fy_eps: f64,
    pub gen_iter_eps: f64,
    pub gen_iter_r: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            log_approx_samples: 10_000,
            seed: 0,
            fy_eps: 1.0,
            gen_iter_eps: 0.3,
            gen_iter_r: 0.9,
        }
    }
}

/// Decomposition, max-margin pair and strongly convex optimum of one dataset and loss.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Structure {
    pub a: MarginMatrix,
    pub loss: LossKind,
    pub decomposition: Decomposition,
    /// Present iff `A_c` is nonempty.
    pub margin: Option<MarginSolution>,
    pub scvx: ScOptimum,
    /// `inf_w R(w)`
    pub risk_inf: f64,
    pub tolerances: Tolerances,
}

impl Structure {
    pub fn n(&self) -> usize {
        self.decomposition.n()
    }

    pub fn n_c(&self) -> usize {
        self.decomposition.n_c()
    }

    pub fn gamma(&self) -> Option<f64> {
        self.margin.as_ref().map(|m| m.gamma)
    }

    pub fn v_bar_norm(&self) -> f64 {
        norm(&self.scvx.v_bar)
    }

    pub fn lambda(&self) -> f64 {
        self.scvx.lambda_est
    }

    /// `S ≠ {0}`
    pub fn s_nontrivial(&self) -> bool {
        self.decomposition.basis_s.rank() > 0
    }

    pub fn is_separable(&self) -> bool {
        self.decomposition.sc_rows.is_empty()
    }

    /// Ray-bound from the risk theorem at time `t` given `Σ_{j<t} η_j`.
    pub fn risk_bound(&self, t: usize, sum_eta: f64) -> f64 {
        let v = self.v_bar_norm();
        let lt = (t as f64).ln();
        let ray = match self.gamma() {
            Some(g) => lt * lt / (g * g),
            None => 0.0,
        };
        v.exp() / t as f64 + (v * v + ray) / (2.0 * sum_eta)
    }
}

pub fn analyze(a: &MarginMatrix, loss: LossKind, tol: &Tolerances) -> Result<Structure> {
    let dec = partition(a)?;
    let margin = if dec.n_c() > 0 {
        Some(margin::solve_dual(&dec.a_perp, tol.margin)?)
    } else {
        None
    };
    let a_s = dec.a_s(a);
    let opt = scvx::solve(&a_s, &dec.basis_s, loss, dec.n(), tol.scvx)?;
    let risk_inf = scvx::infimum_risk(&dec, &opt);
    Ok(Structure {
        a: a.clone(),
        loss,
        decomposition: dec,
        margin,
        scvx: opt,
        risk_inf,
        tolerances: *tol,
    })
}

/// Runs gradient descent with the streamed checks attached.
pub fn run_traced(
    structure: &Structure,
    schedule: Schedule,
    steps: usize,
    per_decade: usize,
    params: &CheckParams,
) -> Result<GdTrace> {
    let opts = RunOptions {
        per_decade,
        ball_tol: Some(structure.tolerances.ball),
        projection: Some((&structure.decomposition).into()),
    };
    let mut gen_iter = GenIterMonitor::new(structure, params.gen_iter_eps, params.gen_iter_r);
    let mut monitors: [&mut dyn StepMonitor; 1] = [&mut gen_iter];
    gd::run_observed(&structure.a, structure.loss, schedule, steps, &opts, &mut monitors)
}

/// Evaluates every registered check against `trace`, in parallel.
pub fn verify_trace(
    structure: &Structure,
    trace: &GdTrace,
    params: &CheckParams,
) -> Result<VerificationReport> {
    type CheckFn = fn(&Structure, &GdTrace, &CheckParams) -> CheckResult;
    let registry: [CheckFn; 9] = [
        |_, _, p| check_log_approx(p.log_approx_samples, p.seed),
        |s, tr, _| check_smoothness(s, tr),
        |s, tr, _| check_risk_bound(s, tr),
        |s, tr, _| check_norm_bounds(s, tr),
        |s, tr, _| check_param_s(s, tr),
        |s, tr, _| check_perp_descent(s, tr),
        |s, tr, p| check_fenchel_young(s, tr, p.fy_eps),
        |s, tr, _| check_gen_iter(s, tr),
        |s, tr, _| check_direction(s, tr),
    ];
    let results: Vec<CheckResult> = registry
        .par_iter()
        .map(|f| f(structure, trace, params))
        .collect();
    let trends = checks::trend_fits(structure, trace);
    build_report(ReportMeta::new(structure, trace, params), results, trends)
}

/// [`analyze`], [`run_traced`] and [`verify_trace`] in sequence.
pub fn pipeline(
    a: &MarginMatrix,
    loss: LossKind,
    schedule: Schedule,
    steps: usize,
    params: &CheckParams,
) -> Result<(Structure, GdTrace, VerificationReport)> {
    let structure = analyze(a, loss, &Tolerances::default())?;
    let trace = run_traced(&structure, schedule, steps, gd::PER_DECADE, params)?;
    let report = verify_trace(&structure, &trace, params)?;
    Ok((structure, trace, report))
}
