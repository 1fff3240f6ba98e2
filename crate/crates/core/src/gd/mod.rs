//! Gradient descent on the empirical risk `R(w) = L(Aw)/n`.

mod constrained;
mod loss;
mod monitor;
mod trace;

use crate::dataset::MarginMatrix;
use crate::decompose::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Basis, Matrix};

pub use constrained::{constrained_opt, constrained_opt_from, BallSolution, BALL_TOL};
pub use loss::{LossKind, Schedule};
pub use monitor::{numeric_tol, MonitorSummary, SmoothnessMonitor, StepInfo, StepMonitor};
pub use trace::{Checkpoint, GdTrace};

pub const PER_DECADE: usize = 20;

/// `Σ ℓ((Mw)_i) / n`
pub(crate) fn risk_rows(m: &Matrix, loss: LossKind, w: &[f64], n: f64) -> f64 {
    m.rows_iter().map(|r| loss.value(dot(r, w))).sum::<f64>() / n
}

/// `Mᵀ[ℓ′((Mw)_i)] / n`
pub(crate) fn grad_rows(m: &Matrix, loss: LossKind, w: &[f64], n: f64) -> Vec<f64> {
    let mut g = vec![0.0; m.ncols()];
    for r in m.rows_iter() {
        let d = loss.deriv(dot(r, w));
        for (gk, rk) in g.iter_mut().zip(r) {
            *gk += d * rk;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    g
}

pub fn risk(a: &MarginMatrix, loss: LossKind, w: &[f64]) -> f64 {
    risk_rows(a.matrix(), loss, w, a.nrows() as f64)
}

pub fn grad(a: &MarginMatrix, loss: LossKind, w: &[f64]) -> Vec<f64> {
    grad_rows(a.matrix(), loss, w, a.nrows() as f64)
}

/// Log-spaced checkpoint times in `[1, steps]`, always including `steps`.
pub fn checkpoint_plan(steps: usize, per_decade: usize) -> Vec<usize> {
    let per_decade = per_decade.max(1);
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        if t > steps {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        k += 1;
    }
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

/// Split used for the projected accumulators.
#[derive(Clone, Debug)]
pub struct Projection {
    pub basis_s: Basis,
    pub sep_rows: Vec<usize>,
}

impl Projection {
    /// Treats every row as separable and `S = {0}`.
    pub fn trivial(a: &MarginMatrix) -> Self {
        Projection {
            basis_s: Basis::zero(a.dim()),
            sep_rows: (0..a.nrows()).collect(),
        }
    }
}

impl From<&Decomposition> for Projection {
    fn from(d: &Decomposition) -> Self {
        Projection {
            basis_s: d.basis_s.clone(),
            sep_rows: d.sep_rows.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub per_decade: usize,
    /// Tolerance for `w̄_t` at checkpoints; `None` skips the constrained solves.
    pub ball_tol: Option<f64>,
    /// `None` means [`Projection::trivial`].
    pub projection: Option<Projection>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            per_decade: PER_DECADE,
            ball_tol: Some(BALL_TOL),
            projection: None,
        }
    }
}

impl RunOptions {
    pub fn with_decomposition(dec: &Decomposition) -> Self {
        RunOptions {
            projection: Some(dec.into()),
            ..Default::default()
        }
    }
}

/// Everything evaluated at one iterate.
struct Eval {
    risk: f64,
    grad: Vec<f64>,
    risk_c: f64,
    grad_c: Vec<f64>,
    /// `Σ_{i∈c} ℓ′((Aw)_i) / n`
    perc: f64,
}

fn evaluate(a: &Matrix, loss: LossKind, is_sep: &[bool], w: &[f64]) -> Eval {
    let n = a.nrows() as f64;
    let d = a.ncols();
    let mut e = Eval {
        risk: 0.0,
        grad: vec![0.0; d],
        risk_c: 0.0,
        grad_c: vec![0.0; d],
        perc: 0.0,
    };
    for (i, r) in a.rows_iter().enumerate() {
        let (v, dv) = loss.value_deriv(dot(r, w));
        e.risk += v;
        for (g, x) in e.grad.iter_mut().zip(r) {
            *g += dv * x;
        }
        if is_sep[i] {
            e.risk_c += v;
            e.perc += dv;
            for (g, x) in e.grad_c.iter_mut().zip(r) {
                *g += dv * x;
            }
        }
    }
    e.risk /= n;
    e.risk_c /= n;
    e.perc /= n;
    e.grad.iter_mut().for_each(|g| *g /= n);
    e.grad_c.iter_mut().for_each(|g| *g /= n);
    e
}

#[derive(Default)]
struct Sums {
    eta: f64,
    etahat_gamma: f64,
    descent: f64,
    perceptron: f64,
    eta_rc: f64,
    eta_cross: f64,
    sup_proj_s: f64,
}

pub fn run(
    a: &MarginMatrix,
    loss: LossKind,
    schedule: Schedule,
    steps: usize,
    opts: &RunOptions,
) -> Result<GdTrace> {
    run_observed(a, loss, schedule, steps, opts, &mut [])
}

/// Runs `steps` iterations from `w_0 = 0`, calling every monitor once per step.
pub fn run_observed(
    a: &MarginMatrix,
    loss: LossKind,
    schedule: Schedule,
    steps: usize,
    opts: &RunOptions,
    monitors: &mut [&mut dyn StepMonitor],
) -> Result<GdTrace> {
    if steps == 0 {
        return Err(Error::Usage("step count must be at least 1".into()));
    }
    let m = a.matrix();
    let d = a.dim();
    let proj = opts
        .projection
        .clone()
        .unwrap_or_else(|| Projection::trivial(a));
    let mut is_sep = vec![false; a.nrows()];
    proj.sep_rows.iter().for_each(|&i| is_sep[i] = true);

    let plan = checkpoint_plan(steps, opts.per_decade);
    let mut next_cp = 0;
    let mut checkpoints = Vec::with_capacity(plan.len());
    let mut smooth = SmoothnessMonitor::default();
    let mut sums = Sums::default();
    let mut ball_start: Option<Vec<f64>> = None;

    let mut w = vec![0.0; d];
    let mut cur = evaluate(m, loss, &is_sep, &w);
    for j in 0..=steps {
        if next_cp < plan.len() && plan[next_cp] == j {
            let eta_t = schedule.eta(j);
            let cp = checkpoint(a, loss, &proj, j, eta_t, &w, &cur, &sums, opts, &mut ball_start)?;
            checkpoints.push(cp);
            next_cp += 1;
        }
        if j == steps {
            break;
        }
        let eta = schedule.eta(j);
        let gn = norm(&cur.grad);
        let eta_hat = eta * cur.risk;
        if eta_hat > 1.0 + 1e-12 {
            return Err(Error::Numerical(format!(
                "effective step {eta_hat} exceeds 1 at step {j}"
            )));
        }
        let gamma = gn / cur.risk;
        let ps = proj.basis_s.project(&w);
        sums.eta += eta;
        sums.etahat_gamma += eta_hat * gamma;
        sums.descent += eta_hat * (1.0 - eta_hat / 2.0) * gamma * gamma;
        sums.perceptron += eta * cur.perc;
        sums.eta_rc += eta * cur.risk_c;
        sums.eta_cross += eta * dot(&cur.grad_c, &ps);
        sums.sup_proj_s = sums.sup_proj_s.max(norm(&ps));

        let w_next: Vec<f64> = w.iter().zip(&cur.grad).map(|(x, g)| x - eta * g).collect();
        let next = evaluate(m, loss, &is_sep, &w_next);
        if !next.risk.is_finite() || w_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericAbort {
                step: j + 1,
                last: checkpoints.pop().map(Box::new),
            });
        }
        let info = StepInfo {
            j,
            eta,
            eta_hat,
            gamma,
            grad_norm: gn,
            risk: cur.risk,
            risk_next: next.risk,
        };
        smooth.observe(&info);
        for mon in monitors.iter_mut() {
            mon.observe(&info);
        }
        w = w_next;
        cur = next;
    }

    let mut summaries = vec![smooth.summary()];
    summaries.extend(monitors.iter().map(|m| m.summary()));
    Ok(GdTrace {
        loss,
        schedule,
        steps,
        per_decade: opts.per_decade,
        dim: d,
        digest: a.digest(),
        checkpoints,
        monitors: summaries,
    })
}

#[allow(clippy::too_many_arguments)]
fn checkpoint(
    a: &MarginMatrix,
    loss: LossKind,
    proj: &Projection,
    t: usize,
    eta_t: f64,
    w: &[f64],
    cur: &Eval,
    sums: &Sums,
    opts: &RunOptions,
    ball_start: &mut Option<Vec<f64>>,
) -> Result<Checkpoint> {
    let norm_w = norm(w);
    let proj_s = proj.basis_s.project(w);
    let perp: Vec<f64> = w.iter().zip(&proj_s).map(|(x, p)| x - p).collect();
    let grad_norm = norm(&cur.grad);
    let dir = if norm_w > 0.0 {
        w.iter().map(|x| x / norm_w).collect()
    } else {
        vec![0.0; w.len()]
    };
    let (w_bar, w_bar_risk, w_bar_residual) = match opts.ball_tol {
        Some(tol) => {
            let start = match ball_start.take() {
                Some(prev) if risk(a, loss, &prev) < cur.risk && norm(&prev) <= norm_w => prev,
                _ => w.to_vec(),
            };
            let sol = constrained::solve_ball(a, loss, norm_w, tol, &start, constrained::MAX_ITERS);
            *ball_start = Some(sol.w.clone());
            let r = risk(a, loss, &sol.w);
            (Some(sol.w), Some(r), Some(sol.residual))
        }
        None => (None, None, None),
    };
    Ok(Checkpoint {
        t,
        risk: cur.risk,
        grad_norm,
        gamma_t: grad_norm / cur.risk,
        eta_hat: eta_t * cur.risk,
        norm_w,
        proj_s_norm: norm(&proj_s),
        proj_perp_norm: norm(&perp),
        w: w.to_vec(),
        dir,
        proj_s,
        risk_c: cur.risk_c,
        perceptron_sum: sums.perceptron,
        sum_eta: sums.eta,
        sum_etahat_gamma: sums.etahat_gamma,
        descent_sum: sums.descent,
        sum_eta_rc: sums.eta_rc,
        sum_eta_cross: sums.eta_cross,
        sup_proj_s: sums.sup_proj_s,
        w_bar,
        w_bar_risk,
        w_bar_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::partition;
    use proptest::prelude::*;

    fn one_step(rows: &[Vec<f64>], loss: LossKind) -> GdTrace {
        let a = MarginMatrix::from_rows(rows);
        run(&a, loss, Schedule::ConstantOne, 1, &RunOptions::default()).unwrap()
    }

    #[test]
    fn risk_examples() {
        let a = MarginMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert!((risk(&a, LossKind::Logistic, &[0.0, 0.0]) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(risk(&a, LossKind::Exponential, &[0.0, 0.0]), 1.0);
        let b = MarginMatrix::from_rows(&[vec![-1.0]]);
        assert!((risk(&b, LossKind::Logistic, &[10.0]) - 4.539889921686465e-5).abs() < 1e-18);
    }

    #[test]
    fn grad_at_origin() {
        let a = MarginMatrix::from_rows(&[vec![-1.0, 0.5], vec![0.25, 1.0]]);
        let g = grad(&a, LossKind::Logistic, &[0.0, 0.0]);
        assert_eq!(g, vec![(-1.0 + 0.25) / 4.0, (0.5 + 1.0) / 4.0]);
        let g = grad(&a, LossKind::Exponential, &[0.0, 0.0]);
        assert_eq!(g, vec![(-1.0 + 0.25) / 2.0, (0.5 + 1.0) / 2.0]);
    }

    #[test]
    fn hand_iterations() {
        assert_eq!(one_step(&[vec![-1.0]], LossKind::Exponential).last().w, vec![1.0]);
        assert_eq!(one_step(&[vec![-1.0]], LossKind::Logistic).last().w, vec![0.5]);
        let a = MarginMatrix::from_rows(&[vec![-1.0], vec![1.0]]);
        for loss in LossKind::ALL {
            for s in Schedule::ALL {
                let tr = run(&a, loss, s, 50, &RunOptions::default()).unwrap();
                assert!(tr.checkpoints.iter().all(|c| c.w == vec![0.0]));
            }
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let a = MarginMatrix::from_rows(&[vec![-1.0]]);
        let e = run(&a, LossKind::Logistic, Schedule::InvSqrt, 0, &RunOptions::default());
        assert!(matches!(e, Err(Error::Usage(_))));
    }

    #[test]
    fn plan_is_log_spaced() {
        let p = checkpoint_plan(1000, 20);
        assert_eq!(p[0], 1);
        assert_eq!(*p.last().unwrap(), 1000);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(checkpoint_plan(1, 20), vec![1]);
        assert_eq!(checkpoint_plan(7, 1), vec![1, 7]);
    }

    #[test]
    fn csv_has_one_row_per_checkpoint() {
        let a = MarginMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]]);
        let tr = run(&a, LossKind::Logistic, Schedule::InvSqrt, 100, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), tr.checkpoints.len() + 1);
        assert!(text.starts_with("t,risk,grad_norm"));
    }

    fn small_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 2..6).prop_map(|rows| {
            let m = rows
                .iter()
                .map(|r| norm(r))
                .fold(1.0f64, f64::max);
            rows.into_iter()
                .map(|r| r.into_iter().map(|v| v / m).collect())
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn grad_matches_central_differences(
            rows in small_matrix(),
            w in prop::collection::vec(-2.0f64..2.0, 2),
        ) {
            let a = MarginMatrix::from_rows(&rows);
            for loss in LossKind::ALL {
                let g = grad(&a, loss, &w);
                for k in 0..2 {
                    let h = 1e-6;
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[k] += h;
                    wm[k] -= h;
                    let fd = (risk(&a, loss, &wp) - risk(&a, loss, &wm)) / (2.0 * h);
                    prop_assert!((fd - g[k]).abs() <= 1e-6 * norm(&g).max(1e-3));
                }
            }
        }

        #[test]
        fn engine_invariants(rows in small_matrix()) {
            let a = MarginMatrix::from_rows(&rows);
            let dec = partition(&a).unwrap();
            let opts = RunOptions { ball_tol: None, ..RunOptions::with_decomposition(&dec) };
            for loss in LossKind::ALL {
                for s in Schedule::ALL {
                    let tr = run(&a, loss, s, 300, &opts).unwrap();
                    prop_assert_eq!(tr.monitors[0].violations, 0);
                    let mut prev = f64::INFINITY;
                    let ln_r0 = risk(&a, loss, &[0.0, 0.0]).ln();
                    for c in &tr.checkpoints {
                        prop_assert!(c.norm_w <= c.sum_etahat_gamma + 1e-9);
                        prop_assert!(c.proj_perp_norm <= c.perceptron_sum + 1e-9);
                        prop_assert!(c.risk <= prev + 1e-15);
                        prop_assert!(c.risk.ln() <= ln_r0 - c.descent_sum + 1e-9);
                        prev = c.risk;
                    }
                }
            }
        }
    }
}
