//! Runs the full analyze/run/verify pipeline on one synthetic geometry and
//! prints every check and trend fit.
//!
//! cargo run --release --example verify_bounds -- [kind] [loss] [schedule] [steps] [seed]

use implicit_ray::verify::{pipeline, CheckParams};
use implicit_ray::{synth, LossKind, Schedule, SynthKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let kind: SynthKind = arg(0, "mixed").parse()?;
    let loss: LossKind = arg(1, "logistic").parse()?;
    let schedule: Schedule = arg(2, "inv_sqrt").parse()?;
    let steps: usize = arg(3, "10000").parse()?;
    let seed: u64 = arg(4, "0").parse()?;

    let a = synth(kind, 20, seed)?.to_margin_matrix();
    let started = std::time::Instant::now();
    let (s, trace, report) = pipeline(&a, loss, schedule, steps, &CheckParams::default())?;
    println!(
        "{kind} n={} n_c={} gamma={:?} |v|={:.6} risk_inf={:.6e} lambda={:.3e} ({:.2?})",
        s.n(),
        s.n_c(),
        s.gamma(),
        s.v_bar_norm(),
        s.risk_inf,
        s.lambda(),
        started.elapsed()
    );
    let last = trace.last();
    println!(
        "T={} risk={:.6e} |w|={:.4} |perp w|={:.4} |proj_s w|={:.4}",
        last.t, last.risk, last.norm_w, last.proj_perp_norm, last.proj_s_norm
    );
    for c in &report.checks {
        println!(
            "{:<14} {:<15?} holds={:<5} n={:<7} worst={:>12} at {:<8} {}",
            c.name,
            c.status,
            c.holds,
            c.evaluated,
            c.worst_slack.map_or("-".into(), |w| format!("{w:.3e}")),
            c.location.map_or("-".into(), |l| l.to_string()),
            c.note
        );
    }
    for f in &report.trends {
        println!(
            "trend {:<16} model {:<32} c={:.4e} slope={:+.4} rms={:.4} ({} pts)",
            f.name, f.model, f.coefficient, f.exponent, f.residual, f.points
        );
    }
    println!("all applicable checks hold: {}", report.all_hold());
    Ok(())
}
