use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{fit_model, fit_power, CheckKind, CheckResult, TrendFit};
use super::Structure;
use crate::gd::{numeric_tol, Checkpoint, GdTrace, LossKind, MonitorSummary, Schedule};
use crate::linalg::{dot, norm, sub};

const LN2: f64 = std::f64::consts::LN_2;
const EPS_LEVELS: [f64; 4] = [1.0, 0.5, 0.1, 0.01];

fn merge(into: &mut MonitorSummary, other: &MonitorSummary, offset: usize) {
    into.checked += other.checked;
    into.violations += other.violations;
    if let Some(w) = other.worst_slack {
        if into.worst_slack.is_none_or(|cur| w < cur) {
            into.worst_slack = Some(w);
            into.worst_step = other.worst_step.map(|j| j + offset);
        }
    }
}

/// `|x/|x| − ū|²`, or `None` for `x = 0`.
fn dir_error(x: &[f64], u: &[f64]) -> Option<f64> {
    let n = norm(x);
    (n > 0.0).then(|| {
        x.iter()
            .zip(u)
            .map(|(a, b)| (a / n - b).powi(2))
            .sum::<f64>()
    })
}

/// Checkpoints inside the last two decades of the run, excluding `t = 1`.
fn last_decades(trace: &GdTrace) -> impl Iterator<Item = &Checkpoint> {
    let lo = (trace.steps as f64 / 100.0).max(2.0);
    trace.checkpoints.iter().filter(move |c| c.t as f64 >= lo)
}

/// ℓ′/ℓ ≥ 1 − ε and ℓ_exp/ℓ ≤ 2 whenever ℓ(z) ≤ ε, for both losses.
pub fn check_log_approx(samples: usize, seed: u64) -> CheckResult {
    let mut tally = MonitorSummary::new("log_approx");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = 0;
    for loss in LossKind::ALL {
        for eps in EPS_LEVELS {
            let z_max = loss.inverse(eps);
            for k in 0..samples.max(1) {
                let z = if k == 0 { z_max } else { z_max - rng.gen_range(0.0..60.0) };
                let v = loss.value(z);
                if v > eps {
                    continue;
                }
                tally.record(idx, loss.deriv(z) / v - (1.0 - eps), numeric_tol(1.0));
                tally.record(idx, 2.0 - LossKind::Exponential.value(z) / v, numeric_tol(2.0));
                idx += 1;
            }
        }
    }
    CheckResult::from_tally(
        &tally,
        CheckKind::Theorem,
        format!("{} samples per loss and eps level", samples.max(1)),
    )
}

/// Per-step descent (streamed) plus its checkpoint consequences: telescoped
/// log-risk decrease, monotone risk and `|w_t| ≤ Σ η̂_j γ_j`.
pub fn check_smoothness(s: &Structure, trace: &GdTrace) -> CheckResult {
    let mut tally = MonitorSummary::new("smoothness");
    let streamed = trace.monitor("smoothness");
    if let Some(m) = streamed {
        merge(&mut tally, m, 1);
    }
    let ln_r0 = s.loss.value(0.0).ln();
    let mut prev = s.loss.value(0.0);
    for c in &trace.checkpoints {
        let ln_r = c.risk.ln();
        tally.record(c.t, ln_r0 - c.descent_sum - ln_r, numeric_tol(ln_r));
        tally.record(c.t, prev - c.risk, numeric_tol(c.risk));
        tally.record(c.t, c.sum_etahat_gamma - c.norm_w, numeric_tol(c.norm_w));
        prev = c.risk;
    }
    let note = match streamed {
        Some(m) => format!("{} steps streamed, {} checkpoints", m.checked, trace.checkpoints.len()),
        None => format!("no streamed steps, {} checkpoints", trace.checkpoints.len()),
    };
    CheckResult::from_tally(&tally, CheckKind::Theorem, note)
}

/// `R(w_t) − R̄ ≤ e^{|v̄|}/t + (|v̄|² + ln²t/γ²)/(2 Σ_{j<t} η_j)`.
pub fn check_risk_bound(s: &Structure, trace: &GdTrace) -> CheckResult {
    let mut tally = MonitorSummary::new("risk_bound");
    for c in &trace.checkpoints {
        let bound = s.risk_bound(c.t, c.sum_eta);
        tally.record(c.t, bound - (c.risk - s.risk_inf), numeric_tol(c.risk));
    }
    let note = if s.n_c() == 0 {
        "no separable rows: ray term dropped".to_string()
    } else {
        String::new()
    };
    CheckResult::from_tally(&tally, CheckKind::Theorem, note)
}

/// Lower bound on `|w_t|` from the norm lemma; `+∞` terms when a logarithm diverges.
pub fn norm_lower_bound(s: &Structure, c: &Checkpoint) -> f64 {
    let g = s.gamma().expect("separable part present");
    let v = s.v_bar_norm();
    let lt = (c.t as f64).ln();
    let first = lt - LN2 - v;
    let denom = v * v + lt * lt / (g * g);
    let second = if denom > 0.0 {
        c.sum_eta.ln() - denom.ln()
    } else {
        f64::INFINITY
    };
    first.min(second) - c.sup_proj_s + LN2.ln() - (s.n() as f64 / s.n_c() as f64).ln()
}

pub fn norm_upper_bound(s: &Structure, c: &Checkpoint) -> f64 {
    let g = s.gamma().expect("separable part present");
    let lt = (c.t as f64).ln();
    (4.0 * lt / (g * g)).max(4.0 * c.sup_proj_s / (g * g)).max(2.0)
}

/// Upper/lower bounds on `|w_t|`, `|Π⊥w_t| ≤ ℓ′_{<t}`, and `|Π⊥w_t|/ln t`
/// within a factor-4 band over the last two decades.
pub fn check_norm_bounds(s: &Structure, trace: &GdTrace) -> CheckResult {
    if s.n_c() == 0 {
        return CheckResult::not_applicable("norm_bounds", CheckKind::Theorem, "no separable rows");
    }
    let mut tally = MonitorSummary::new("norm_bounds");
    for c in &trace.checkpoints {
        let tol = numeric_tol(c.norm_w);
        tally.record(c.t, norm_upper_bound(s, c) - c.norm_w, tol);
        tally.record(c.t, c.norm_w - norm_lower_bound(s, c), tol);
        tally.record(c.t, c.perceptron_sum - c.proj_perp_norm, tol);
    }
    let ratios: Vec<f64> = last_decades(trace)
        .map(|c| c.proj_perp_norm / (c.t as f64).ln())
        .collect();
    let note = if trace.steps >= 100 && ratios.len() >= 2 {
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let band = hi / lo;
        tally.record(trace.steps, 4.0 - band, 0.0);
        format!("|perp w|/ln t band over last two decades: {band:.4}")
    } else {
        "run shorter than two decades: band not evaluated".to_string()
    };
    CheckResult::from_tally(&tally, CheckKind::Theorem, note)
}

/// `|Π_S x − v̄|² ≤ (2/λ) min{1, risk bound}` for `x ∈ {w_t, w̄_t}`.
pub fn check_param_s(s: &Structure, trace: &GdTrace) -> CheckResult {
    if !s.s_nontrivial() {
        return CheckResult::not_applicable("param_s", CheckKind::EstimateConditioned, "S = {0}");
    }
    let lambda = s.lambda();
    let basis = &s.decomposition.basis_s;
    let mut tally = MonitorSummary::new("param_s");
    for c in &trace.checkpoints {
        let bound = 2.0 / lambda * s.risk_bound(c.t, c.sum_eta).min(1.0);
        let dist = norm(&sub(&c.proj_s, &s.scvx.v_bar));
        tally.record(c.t, bound - dist * dist, numeric_tol(bound));
        if let (Some(wb), Some(res)) = (&c.w_bar, c.w_bar_residual) {
            let d = norm(&sub(&basis.project(wb), &s.scvx.v_bar));
            tally.record(c.t, bound - d * d, numeric_tol(bound) + res * (2.0 * d + res));
        }
    }
    CheckResult::from_tally(
        &tally,
        CheckKind::EstimateConditioned,
        format!("uses sampled lambda estimate {lambda:.6e}"),
    )
}

/// `R_c(u) = Σ_{i∈c} ℓ(⟨A_i, u⟩)/n`
fn risk_c(s: &Structure, u: &[f64]) -> f64 {
    s.decomposition
        .sep_rows
        .iter()
        .map(|&i| s.loss.value(dot(s.a.row(i), u)))
        .sum::<f64>()
        / s.n() as f64
}

/// Projected descent inequality with comparator `u = ū ln(t)/γ`.
pub fn check_perp_descent(s: &Structure, trace: &GdTrace) -> CheckResult {
    let Some(m) = &s.margin else {
        return CheckResult::not_applicable("perp_descent", CheckKind::Theorem, "no separable rows");
    };
    let mut tally = MonitorSummary::new("perp_descent");
    for c in &trace.checkpoints {
        let scale = (c.t as f64).ln() / m.gamma;
        let u: Vec<f64> = m.u_bar.iter().map(|x| x * scale).collect();
        let perp = sub(&c.w, &c.proj_s);
        let lhs = norm(&sub(&perp, &u)).powi(2);
        let uu = dot(&u, &u);
        let ru = 2.0 * c.sum_eta * risk_c(s, &u);
        let rhs = uu + 2.0 + ru - 2.0 * c.sum_eta_rc + 2.0 * c.sum_eta_cross;
        let mag = uu + ru + 2.0 * c.sum_eta_rc + 2.0 * c.sum_eta_cross.abs();
        tally.record(c.t, rhs - lhs, numeric_tol(mag));
    }
    CheckResult::from_tally(&tally, CheckKind::Theorem, String::new())
}

/// Fenchel–Young lower bound on `⟨ū, w⟩/|w|` once `R(w_t) − R̄ ≤ ε/n`, with `g*(q̄) ≤ ln n`.
pub fn check_fenchel_young(s: &Structure, trace: &GdTrace, eps: f64) -> CheckResult {
    let Some(m) = &s.margin else {
        return CheckResult::not_applicable("fenchel_young", CheckKind::Theorem, "no separable rows");
    };
    let n = s.n();
    let g_star = m.conjugate_at_q(n);
    let threshold = eps / n as f64;
    let mut tally = MonitorSummary::new("fenchel_young");
    let basis = &s.decomposition.basis_s;
    for c in &trace.checkpoints {
        let excess = c.risk - s.risk_inf;
        if !(excess > 0.0 && excess <= threshold) {
            continue;
        }
        let mut points: Vec<(&[f64], f64)> = vec![(&c.w, 0.0)];
        if let (Some(wb), Some(rb), Some(res)) = (&c.w_bar, c.w_bar_risk, c.w_bar_residual) {
            if rb <= c.risk {
                points.push((wb, res));
            }
        }
        for (w, res) in points {
            let nw = norm(w);
            if nw == 0.0 {
                continue;
            }
            let lhs = dot(&m.u_bar, w) / nw;
            let ps = norm(&basis.project(w));
            let rhs = (-excess.ln() - LN2 - g_star - ps) / (m.gamma * nw);
            tally.record(c.t, lhs - rhs, numeric_tol(1.0) + res);
        }
    }
    let ln_n = (n as f64).ln();
    if tally.checked == 0 {
        let last = trace.last();
        let ex = last.risk - s.risk_inf;
        let pts: Vec<&Checkpoint> = last_decades(trace).collect();
        let slope = fit_power(
            &pts.iter().map(|c| c.t as f64).collect::<Vec<_>>(),
            &pts.iter().map(|c| c.risk - s.risk_inf).collect::<Vec<_>>(),
        );
        let estimate = if slope < 0.0 && ex > 0.0 {
            format!("{:.3e}", trace.steps as f64 * (threshold / ex).powf(1.0 / slope))
        } else {
            "unknown".to_string()
        };
        return CheckResult::not_applicable(
            "fenchel_young",
            CheckKind::Theorem,
            format!(
                "excess {ex:.3e} at T never below eps/n = {threshold:.3e}; first qualifying t ~ {estimate}; g*(q) = {g_star:.6} <= ln n = {ln_n:.6}"
            ),
        );
    }
    tally.record(0, ln_n - g_star, numeric_tol(ln_n));
    CheckResult::from_tally(
        &tally,
        CheckKind::Theorem,
        format!("g*(q) = {g_star:.6}, ln n = {ln_n:.6}"),
    )
}

/// Excess-risk contraction, streamed during the run by `GenIterMonitor`.
pub fn check_gen_iter(s: &Structure, trace: &GdTrace) -> CheckResult {
    let kind = CheckKind::EstimateConditioned;
    if s.n_c() == 0 {
        return CheckResult::not_applicable("gen_iter", kind, "no separable rows");
    }
    if s.is_separable() {
        return CheckResult::not_applicable("gen_iter", kind, "separable data: covered by smoothness");
    }
    let Some(m) = trace.monitor("gen_iter") else {
        return CheckResult::not_applicable("gen_iter", kind, "trace carries no streamed gen_iter data");
    };
    if m.checked == 0 {
        let ex = trace.last().risk - s.risk_inf;
        return CheckResult::not_applicable(
            "gen_iter",
            kind,
            format!("excess risk never reached the contraction threshold (excess at T {ex:.3e})"),
        );
    }
    CheckResult::from_tally(
        m,
        kind,
        format!(
            "{} steps past qualification at j = {}",
            m.checked,
            m.first_step.unwrap_or(0)
        ),
    )
}

/// Whether `t` is past the warm start the direction rates assume.
pub fn direction_threshold(s: &Structure, schedule: Schedule, t: usize, sup_proj_s: f64) -> bool {
    let Some(g) = s.gamma() else {
        return false;
    };
    if t < 5 {
        return false;
    }
    let tf = t as f64;
    let lt3 = tf.ln().powi(3);
    let n = s.n() as f64;
    match schedule {
        Schedule::ConstantOne if s.is_separable() => tf / lt3 >= n / g.powi(4),
        Schedule::InvSqrt => tf.sqrt() / lt3 >= n * (1.0 + sup_proj_s) / (g * g),
        Schedule::ConstantOne => false,
    }
}

/// Bound used for the direction error at the final step.
pub fn direction_bound(s: &Structure, t: usize) -> Option<f64> {
    let g = s.gamma()?;
    let lt = (t as f64).ln();
    if t < 3 {
        return None;
    }
    Some(10.0 * ((s.n() as f64).ln() + lt.ln()) / (g * g * lt))
}

/// Direction errors non-increasing past the warm start, and below
/// `10(ln n + ln ln T)/(γ² ln T)` at `T`, for `w_t` and `w̄_t`.
pub fn check_direction(s: &Structure, trace: &GdTrace) -> CheckResult {
    let Some(m) = &s.margin else {
        return CheckResult::not_applicable("direction", CheckKind::Trend, "no separable rows");
    };
    let mut tally = MonitorSummary::new("direction");
    let mut prev: Option<(f64, Option<f64>)> = None;
    let mut first_past = None;
    for c in &trace.checkpoints {
        if !direction_threshold(s, trace.schedule, c.t, c.sup_proj_s) {
            continue;
        }
        first_past.get_or_insert(c.t);
        let e = dir_error(&c.w, &m.u_bar).unwrap_or(f64::INFINITY);
        let eb = c.w_bar.as_ref().and_then(|wb| dir_error(wb, &m.u_bar));
        if let Some((pe, peb)) = prev {
            tally.record(c.t, pe - e, numeric_tol(1.0));
            if let (Some(a), Some(b)) = (peb, eb) {
                tally.record(c.t, a - b, numeric_tol(1.0) + c.w_bar_residual.unwrap_or(0.0));
            }
        }
        prev = Some((e, eb));
    }
    let last = trace.last();
    if let Some(bound) = direction_bound(s, last.t) {
        if let Some(e) = dir_error(&last.w, &m.u_bar) {
            tally.record(last.t, bound - e, numeric_tol(1.0));
        }
        if let Some(eb) = last.w_bar.as_ref().and_then(|wb| dir_error(wb, &m.u_bar)) {
            tally.record(last.t, bound - eb, numeric_tol(1.0) + last.w_bar_residual.unwrap_or(0.0));
        }
    }
    let note = match first_past {
        Some(t0) => format!("warm-start threshold reached at t = {t0}"),
        None => format!(
            "warm-start threshold not reached by T = {} under {}: monotonicity vacuous",
            trace.steps, trace.schedule
        ),
    };
    CheckResult::from_tally(&tally, CheckKind::Trend, note)
}

fn trend(name: &str, model: &str, pts: &[(f64, f64, f64)]) -> TrendFit {
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fs: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let (coefficient, residual, points) = fit_model(&ys, &fs);
    TrendFit {
        name: name.to_string(),
        exponent: fit_power(&ts, &ys),
        coefficient,
        residual,
        model: model.to_string(),
        points,
    }
}

/// Rate model of the excess risk: `ln²t/√t` for `1/√(j+1)` steps, `ln²t/t` for unit steps.
pub fn excess_model(schedule: Schedule, t: f64) -> f64 {
    let l2 = t.ln().powi(2);
    match schedule {
        Schedule::InvSqrt => l2 / t.sqrt(),
        Schedule::ConstantOne => l2 / t,
    }
}

/// Fitted trends over the last two decades of the run.
pub fn trend_fits(s: &Structure, trace: &GdTrace) -> Vec<TrendFit> {
    let window: Vec<&Checkpoint> = last_decades(trace).collect();
    let model_name = match trace.schedule {
        Schedule::InvSqrt => "ln(t)^2/sqrt(t)",
        Schedule::ConstantOne => "ln(t)^2/t",
    };
    let mut out = vec![trend(
        "excess_risk",
        model_name,
        &window
            .iter()
            .map(|c| {
                let t = c.t as f64;
                (t, c.risk - s.risk_inf, excess_model(trace.schedule, t))
            })
            .collect::<Vec<_>>(),
    )];
    if let Some(m) = &s.margin {
        let g = m.gamma;
        let ln_n = (s.n() as f64).ln();
        out.push(trend(
            "direction_error",
            "(ln n + ln ln t)/(gamma^2 ln t)",
            &window
                .iter()
                .filter(|c| c.t >= 3)
                .filter_map(|c| {
                    let t = c.t as f64;
                    let f = (ln_n + t.ln().ln()) / (g * g * t.ln());
                    dir_error(&c.w, &m.u_bar).map(|e| (t, e, f))
                })
                .collect::<Vec<_>>(),
        ));
        out.push(trend(
            "perp_norm",
            "ln(t)",
            &window
                .iter()
                .map(|c| (c.t as f64, c.proj_perp_norm, (c.t as f64).ln()))
                .collect::<Vec<_>>(),
        ));
    }
    if s.s_nontrivial() {
        out.push(trend(
            "proj_s_norm",
            "1",
            &window
                .iter()
                .map(|c| (c.t as f64, c.proj_s_norm, 1.0))
                .collect::<Vec<_>>(),
        ));
        out.push(trend(
            "param_s_error",
            model_name,
            &window
                .iter()
                .map(|c| {
                    let t = c.t as f64;
                    let d = norm(&sub(&c.proj_s, &s.scvx.v_bar));
                    (t, d * d, excess_model(trace.schedule, t))
                })
                .collect::<Vec<_>>(),
        ));
    }
    out.retain(|f| f.points > 0);
    out
}
