//! Runs gradient descent on the mixed geometry and writes the plot-ready
//! checkpoint CSV; the perpendicular norm grows like ln t while the
//! projection onto S settles.
//!
//! cargo run --release --example gd_trace -- [steps] [out.csv]

use implicit_ray::gd::{run, RunOptions};
use implicit_ray::{partition, synth, LossKind, Schedule, SynthKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map_or(Ok(100_000), |s| s.parse())?;
    let a = synth(SynthKind::Mixed, 20, 0)?.to_margin_matrix();
    let dec = partition(&a)?;
    let trace = run(&a, LossKind::Logistic, Schedule::InvSqrt, steps, &RunOptions::with_decomposition(&dec))?;
    println!("{:>8} {:>12} {:>10} {:>10} {:>12}", "t", "risk", "|perp w|", "|proj w|", "|perp w|/ln t");
    for c in trace.checkpoints.iter().filter(|c| c.t >= 10).step_by(5) {
        println!(
            "{:>8} {:>12.6e} {:>10.4} {:>10.4} {:>12.4}",
            c.t,
            c.risk,
            c.proj_perp_norm,
            c.proj_s_norm,
            c.proj_perp_norm / (c.t as f64).ln()
        );
    }
    if let Some(path) = std::env::args().nth(2) {
        trace.save_csv(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
