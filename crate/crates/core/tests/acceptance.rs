//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use implicit_ray::decompose::{row_feasible, validate, Decomposition};
use implicit_ray::gd::{self, LossKind, Schedule};
use implicit_ray::linalg::{dot, norm, sub, Matrix};
use implicit_ray::margin::{primal_margin, solve_dual, MARGIN_TOL};
use implicit_ray::scvx::{self, projected_grad_norm, SCVX_TOL};
use implicit_ray::verify::{
    analyze, check_log_approx, check_smoothness, excess_model, pipeline, CheckParams,
    CheckStatus, Structure, Tolerances, VerificationReport,
};
use implicit_ray::{partition, synth, GdTrace, MarginMatrix, SynthKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Random margin matrix with n ≤ 8, d ≤ 4, mixing free rows, negated rows,
/// negated sums and zero rows so that every decomposition shape occurs.
fn random_instance(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=8);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let p: f64 = rng.gen();
        let row = if !rows.is_empty() && p < 0.25 {
            let i = rng.gen_range(0..rows.len());
            let s = rng.gen_range(0.3..2.0);
            rows[i].iter().map(|x| -s * x).collect()
        } else if rows.len() >= 2 && p < 0.4 {
            let i = rng.gen_range(0..rows.len());
            let j = rng.gen_range(0..rows.len());
            rows[i].iter().zip(&rows[j]).map(|(x, y)| -(x + y)).collect()
        } else if p < 0.45 {
            vec![0.0; d]
        } else {
            (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        rows.push(row);
    }
    rows
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut shapes = [0usize; 3];
    for _ in 0..200 {
        let rows = random_instance(&mut rng);
        let a = MarginMatrix::from_rows(&rows);
        let dec = partition(&a).expect("partition");
        let oracle: Vec<usize> = (0..rows.len())
            .filter(|&i| row_feasible(&a, i).expect("lp"))
            .collect();
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let pdec = partition(&MarginMatrix::from_rows(&permuted)).expect("partition");
        let mut back: Vec<usize> = pdec.sep_rows.iter().map(|&k| perm[k]).collect();
        back.sort_unstable();
        if dec.sep_rows != oracle || back != oracle {
            mismatches += 1;
        }
        let idx = if dec.sc_rows.is_empty() {
            0
        } else if dec.sep_rows.is_empty() {
            1
        } else {
            2
        };
        shapes[idx] += 1;
    }
    outcome(
        mismatches == 0,
        format!(
            "200 instances, {mismatches} mismatches (separable {}, no separable rows {}, mixed {})",
            shapes[0], shapes[1], shapes[2]
        ),
    )
}

fn criterion_2() -> Outcome {
    let one = solve_dual(&Matrix::from_rows(&[vec![-1.0, 0.0]], 2), MARGIN_TOL).unwrap();
    let two = solve_dual(&Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 2), MARGIN_TOL).unwrap();
    let canon = (one.gamma - 1.0).abs() <= 1e-6 && (two.gamma - 0.5f64.sqrt()).abs() <= 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gap: f64 = 0.0;
    let mut worst_row = f64::NEG_INFINITY;
    let mut worst_primal: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=8);
        let mut u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let un = norm(&u);
        u.iter_mut().for_each(|x| *x /= un);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let m = dot(&a, &u);
                let target = -rng.gen_range(0.05..0.5);
                if m > target {
                    a.iter_mut().zip(&u).for_each(|(x, ui)| *x -= (m - target) * ui);
                }
                a
            })
            .collect();
        let a = MarginMatrix::from_rows(&rows);
        let dec = partition(&a).unwrap();
        assert_eq!(dec.n_c(), n, "generated instance is separable");
        let sol = solve_dual(&dec.a_perp, MARGIN_TOL).unwrap();
        worst_gap = worst_gap.max(sol.gap);
        let au = dec.a_perp.mul_vec(&sol.u_bar);
        worst_row = au.iter().map(|v| v + sol.gamma).fold(worst_row, f64::max);
        worst_primal = worst_primal.max((primal_margin(&dec.a_perp, &sol.u_bar).unwrap() - sol.gamma).abs());
    }
    outcome(
        canon && worst_gap <= 1e-8 && worst_row <= 1e-8,
        format!(
            "gamma {:.12} / {:.12}; 200 random: max gap {worst_gap:.2e}, max (A u)_i + gamma {worst_row:.2e}, |primal - gamma| {worst_primal:.2e}",
            one.gamma, two.gamma
        ),
    )
}

fn criterion_3() -> Outcome {
    let a = MarginMatrix::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0]]);
    let s = analyze(&a, LossKind::Exponential, &Tolerances::default()).unwrap();
    let v_err = (s.scvx.v_bar[0] - 2f64.ln() / 2.0).abs();
    let r_err = (s.risk_inf - 2.0 * 2f64.sqrt() / 3.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_grad: f64 = 0.0;
    let mut instances = 0;
    while instances < 100 {
        let rows = random_instance(&mut rng);
        let a = MarginMatrix::from_rows(&rows);
        let dec = partition(&a).unwrap();
        if dec.basis_s.rank() == 0 {
            continue;
        }
        instances += 1;
        for loss in LossKind::ALL {
            let a_s = dec.a_s(&a);
            let opt = scvx::solve(&a_s, &dec.basis_s, loss, dec.n(), SCVX_TOL).unwrap();
            let g = projected_grad_norm(&a_s, &dec.basis_s, loss, dec.n(), &opt.v_bar);
            worst_grad = worst_grad.max(g);
        }
    }
    let g_closed = projected_grad_norm(&a.matrix().clone(), &s.decomposition.basis_s, LossKind::Exponential, 3, &s.scvx.v_bar);
    worst_grad = worst_grad.max(g_closed);
    outcome(
        v_err <= 1e-8 && r_err <= 1e-8 && worst_grad <= 1e-10,
        format!("|v - ln2/2| {v_err:.2e}, |R - 2sqrt2/3| {r_err:.2e}, max |grad| over 100 instances x 2 losses {worst_grad:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let rows = random_instance(&mut rng);
        let a = MarginMatrix::from_rows(&rows);
        let d = a.dim();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let loss = LossKind::ALL[rng.gen_range(0..2)];
        let g = gd::grad(&a, loss, &w);
        let gn = norm(&g);
        if gn < 1e-6 {
            continue;
        }
        count += 1;
        let h = 1e-3;
        let fd: Vec<f64> = (0..d)
            .map(|k| {
                let f = |s: f64| {
                    let mut x = w.clone();
                    x[k] += s * h;
                    gd::risk(&a, loss, &x)
                };
                (-f(2.0) + 8.0 * f(1.0) - 8.0 * f(-1.0) + f(-2.0)) / (12.0 * h)
            })
            .collect();
        worst = worst.max(norm(&sub(&g, &fd)) / gn);
    }
    outcome(worst <= 1e-6, format!("100 triples, max relative error {worst:.2e}"))
}

struct MatrixRun {
    kind: SynthKind,
    loss: LossKind,
    schedule: Schedule,
    seed: u64,
    s: Structure,
    trace: GdTrace,
    report: VerificationReport,
}

fn run_matrix() -> Vec<MatrixRun> {
    let mut cells = Vec::new();
    for kind in [SynthKind::Separable, SynthKind::Touching, SynthKind::Mixed, SynthKind::Overlap] {
        for loss in LossKind::ALL {
            for schedule in Schedule::ALL {
                for seed in 0..3 {
                    cells.push((kind, loss, schedule, seed));
                }
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(kind, loss, schedule, seed)| {
            let a = synth(kind, 20, seed).unwrap().to_margin_matrix();
            let params = CheckParams {
                seed,
                log_approx_samples: 100,
                ..CheckParams::default()
            };
            let (s, trace, report) = pipeline(&a, loss, schedule, 100_000, &params).unwrap();
            MatrixRun {
                kind,
                loss,
                schedule,
                seed,
                s,
                trace,
                report,
            }
        })
        .collect()
}

fn label(r: &MatrixRun) -> String {
    format!("{}/{}/{}/seed{}", r.kind, r.loss, r.schedule, r.seed)
}

/// Every run passes `name` (or it is not applicable where `applicable` is false).
fn all_pass(runs: &[MatrixRun], name: &str, applicable: impl Fn(&MatrixRun) -> bool) -> (bool, usize, Vec<String>) {
    let mut bad = Vec::new();
    let mut evaluated = 0;
    for r in runs {
        let c = r.report.check(name).unwrap();
        evaluated += c.evaluated;
        let ok = if applicable(r) {
            c.status == CheckStatus::Pass
        } else {
            c.status == CheckStatus::NotApplicable
        };
        if !ok {
            bad.push(format!("{} ({:?}, worst {:?} at {:?})", label(r), c.status, c.worst_slack, c.location));
        }
    }
    (bad.is_empty(), evaluated, bad)
}

fn criterion_5(runs: &[MatrixRun]) -> Outcome {
    let (ok, n, bad) = all_pass(runs, "smoothness", |_| true);
    let steps: usize = runs
        .iter()
        .map(|r| r.trace.monitor("smoothness").map_or(0, |m| m.checked))
        .sum();
    outcome(
        ok && steps >= runs.len() * 100_000,
        format!("{} runs, {steps} streamed steps, {n} evaluations, failures {bad:?}", runs.len()),
    )
}

fn criterion_6(runs: &[MatrixRun]) -> Outcome {
    let (ok, n, bad) = all_pass(runs, "risk_bound", |_| true);
    let mut fits = Vec::new();
    let mut fit_ok = true;
    for r in runs
        .iter()
        .filter(|r| r.kind == SynthKind::Mixed && r.schedule == Schedule::InvSqrt)
    {
        let f = r.report.trend("excess_risk").unwrap();
        let last = r.trace.last();
        let excess = last.risk - r.s.risk_inf;
        let predicted = f.coefficient * excess_model(Schedule::InvSqrt, last.t as f64);
        let within = f.residual <= 0.2 && excess <= 1.2 * predicted;
        fit_ok &= within;
        fits.push(format!("{}/seed{}: c {:.3e} rms {:.3} ratio {:.3}", r.loss, r.seed, f.coefficient, f.residual, excess / predicted));
    }
    outcome(
        ok && fit_ok && fits.len() == 6,
        format!("{n} checkpoint evaluations, failures {bad:?}; fits {}", fits.join("; ")),
    )
}

fn criterion_7(runs: &[MatrixRun]) -> Outcome {
    let (ok, n, bad) = all_pass(runs, "norm_bounds", |r| r.s.n_c() > 0);
    let bands: Vec<f64> = runs
        .iter()
        .filter(|r| r.s.n_c() > 0)
        .map(|r| {
            let ratios: Vec<f64> = r
                .trace
                .checkpoints
                .iter()
                .filter(|c| c.t >= 1000)
                .map(|c| c.proj_perp_norm / (c.t as f64).ln())
                .collect();
            ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect();
    let widest = bands.iter().copied().fold(0.0, f64::max);
    outcome(
        ok && widest <= 4.0,
        format!("{n} evaluations, widest |perp w|/ln t band {widest:.3}, failures {bad:?}"),
    )
}

fn criterion_8(runs: &[MatrixRun]) -> Outcome {
    let (ok, n, bad) = all_pass(runs, "param_s", |r| r.s.s_nontrivial());
    let a = MarginMatrix::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0]]);
    let (s, trace, report) = pipeline(&a, LossKind::Exponential, Schedule::ConstantOne, 100_000, &CheckParams::default()).unwrap();
    let dist = (trace.last().proj_s[0] - 2f64.ln() / 2.0).abs();
    let one_d = report.check("param_s").unwrap().status == CheckStatus::Pass;
    outcome(
        ok && one_d && dist <= 1e-3,
        format!(
            "{n} evaluations, failures {bad:?}; 1-D instance: |proj_S w_T - v| = {dist:.2e} (lambda {:.4})",
            s.lambda()
        ),
    )
}

fn criterion_9() -> Outcome {
    let sep3 = vec![vec![-1.0, 0.2], vec![-0.6, -0.8], vec![-0.8, 0.3]];
    let axis = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
    let mixed = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]];
    let synth_sep = synth(SynthKind::Separable, 20, 0).unwrap().to_margin_matrix();
    let synth_mixed = synth(SynthKind::Mixed, 20, 0).unwrap().to_margin_matrix();
    let mut cases = Vec::new();
    for loss in LossKind::ALL {
        cases.push(("separable 3 rows", MarginMatrix::from_rows(&sep3), loss, Schedule::ConstantOne));
        cases.push(("separable axis", MarginMatrix::from_rows(&axis), loss, Schedule::ConstantOne));
        cases.push(("separable synth", synth_sep.clone(), loss, Schedule::ConstantOne));
        cases.push(("mixed canonical", MarginMatrix::from_rows(&mixed), loss, Schedule::InvSqrt));
        cases.push(("mixed synth", synth_mixed.clone(), loss, Schedule::InvSqrt));
    }
    let results: Vec<(String, bool, usize, String)> = cases
        .into_par_iter()
        .map(|(name, a, loss, schedule)| {
            let (_, _, report) = pipeline(&a, loss, schedule, 1_000_000, &CheckParams {
                log_approx_samples: 10,
                ..CheckParams::default()
            })
            .unwrap();
            let c = report.check("direction").unwrap().clone();
            (format!("{name}/{loss}"), c.status == CheckStatus::Pass, c.evaluated, c.note)
        })
        .collect();
    let ok = results.iter().all(|r| r.1);
    let monotone_runs = results.iter().filter(|r| r.3.contains("reached at")).count();
    let detail: Vec<String> = results
        .iter()
        .map(|r| format!("{} {} ({} evals)", r.0, if r.1 { "ok" } else { "FAILED" }, r.2))
        .collect();
    outcome(
        ok && monotone_runs > 0,
        format!("T = 1e6, warm start reached in {monotone_runs} runs: {}", detail.join(", ")),
    )
}

fn criterion_10(runs: &[MatrixRun]) -> Outcome {
    let log = check_log_approx(10_000, 10);
    let mut g_ok = true;
    let mut fy_evals = 0;
    let mut gi_evals = 0;
    let mut bad = Vec::new();
    for r in runs {
        if let Some(m) = &r.s.margin {
            g_ok &= m.conjugate_at_q(r.s.n()) <= (r.s.n() as f64).ln() + 1e-12;
        }
        for name in ["fenchel_young", "gen_iter"] {
            let c = r.report.check(name).unwrap();
            if c.status == CheckStatus::Fail {
                bad.push(format!("{name} {}", label(r)));
            }
        }
        fy_evals += r.report.check("fenchel_young").unwrap().evaluated;
        gi_evals += r.report.check("gen_iter").unwrap().evaluated;
    }
    // the contraction lemma needs a small excess; run the canonical mixed case long enough
    let mixed = MarginMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]]);
    let (_, _, rep) = pipeline(&mixed, LossKind::Logistic, Schedule::InvSqrt, 1_000_000, &CheckParams::default()).unwrap();
    for name in ["fenchel_young", "gen_iter"] {
        let c = rep.check(name).unwrap();
        if c.status == CheckStatus::Fail {
            bad.push(format!("{name} canonical mixed"));
        }
    }
    let fy_mixed = rep.check("fenchel_young").unwrap().evaluated;
    let gi_mixed = rep.check("gen_iter").unwrap().evaluated;
    outcome(
        log.status == CheckStatus::Pass && g_ok && bad.is_empty() && fy_evals + fy_mixed > 0,
        format!(
            "log_approx {} samples worst {:.3e}; g*(q) <= ln n in all runs: {g_ok}; fenchel_young evaluations {fy_evals} (+{fy_mixed} canonical mixed); gen_iter evaluations {gi_evals} (+{gi_mixed} canonical mixed); failures {bad:?}",
            log.evaluated,
            log.worst_slack.unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_11(runs: &[MatrixRun]) -> Outcome {
    let mut caught = 0;
    let mut total = 0;
    for r in runs.iter().filter(|r| r.seed == 0) {
        let mut tr = r.trace.clone();
        let k = tr.checkpoints.len() / 2;
        tr.checkpoints[k].risk = tr.checkpoints[k - 1].risk * 1.01 + 1e-6;
        total += 1;
        if check_smoothness(&r.s, &tr).status == CheckStatus::Fail {
            caught += 1;
        }
    }
    let mut swaps = 0;
    let mut swaps_caught = 0;
    for kind in [SynthKind::Touching, SynthKind::Mixed] {
        for seed in 0..3 {
            let a = synth(kind, 20, seed).unwrap().to_margin_matrix();
            let dec = partition(&a).unwrap();
            assert!(validate(&dec, &a).passed());
            let mut sep = dec.sep_rows.clone();
            let mut sc = dec.sc_rows.clone();
            std::mem::swap(&mut sep[0], &mut sc[0]);
            let bad = Decomposition::from_split(&a, sep, sc);
            swaps += 1;
            if !validate(&bad, &a).passed() {
                swaps_caught += 1;
            }
        }
    }
    outcome(
        caught == total && swaps_caught == swaps,
        format!("risk corruption caught {caught}/{total}; row swap caught {swaps_caught}/{swaps}"),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((id, name, o, t.elapsed().as_secs_f64()));
    };
    timed(1, "decomposition oracle equivalence", &criterion_1);
    timed(2, "margin duality", &criterion_2);
    timed(3, "strongly convex optimum", &criterion_3);
    timed(4, "gradient correctness", &criterion_4);
    let t = Instant::now();
    let runs = run_matrix();
    let matrix_secs = t.elapsed().as_secs_f64();
    timed(5, "smoothness inequality", &|| criterion_5(&runs));
    timed(6, "risk bound and excess-risk rate", &|| criterion_6(&runs));
    timed(7, "norm bounds", &|| criterion_7(&runs));
    timed(8, "parameter convergence over S", &|| criterion_8(&runs));
    timed(9, "direction convergence", &criterion_9);
    timed(10, "Fenchel-Young and log-approximation", &|| criterion_10(&runs));
    timed(11, "negative controls", &|| criterion_11(&runs));

    let mut failed = 0;
    for (id, name, o, secs) in &results {
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} ({secs:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria pass; shared 48-run matrix {matrix_secs:.1}s; total {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
