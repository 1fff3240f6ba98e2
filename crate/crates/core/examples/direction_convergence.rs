//! Tracks |w_t/|w_t| − ū|² and the same for the ball-constrained optimum w̄_t
//! on a small separable instance, past the warm start, against the
//! 10(ln n + ln ln t)/(γ² ln t) rate.
//!
//! cargo run --release --example direction_convergence -- [steps]

use implicit_ray::linalg::{norm, sub};
use implicit_ray::verify::{analyze, direction_threshold, run_traced, CheckParams, Tolerances};
use implicit_ray::{LossKind, MarginMatrix, Schedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map_or(Ok(1_000_000), |s| s.parse())?;
    let a = MarginMatrix::from_rows(&[vec![-1.0, 0.2], vec![-0.6, -0.8], vec![-0.8, 0.3]]);
    let s = analyze(&a, LossKind::Logistic, &Tolerances::default())?;
    let m = s.margin.as_ref().expect("separable data");
    let trace = run_traced(&s, Schedule::ConstantOne, steps, 10, &CheckParams::default())?;
    println!("gamma = {:.6}, u = {:?}", m.gamma, m.u_bar);
    println!("{:>8} {:>6} {:>12} {:>12} {:>12}", "t", "warm", "err(w)", "err(w_bar)", "rate");
    for c in trace.checkpoints.iter().filter(|c| c.t >= 3) {
        let err = |x: &[f64]| norm(&sub(&x.iter().map(|v| v / norm(x)).collect::<Vec<_>>(), &m.u_bar)).powi(2);
        let lt = (c.t as f64).ln();
        let rate = 10.0 * ((s.n() as f64).ln() + lt.ln()) / (m.gamma * m.gamma * lt);
        println!(
            "{:>8} {:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            c.t,
            direction_threshold(&s, trace.schedule, c.t, c.sup_proj_s),
            err(&c.w),
            c.w_bar.as_deref().map_or(f64::NAN, err),
            rate
        );
    }
    Ok(())
}
