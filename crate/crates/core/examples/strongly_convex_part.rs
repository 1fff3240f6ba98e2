//! Minimizes the risk restricted to the strongly convex part and compares
//! against the closed form for A = {(−1), (−1), (1)} with exponential loss.
//!
//! cargo run --example strongly_convex_part

use implicit_ray::scvx::{infimum_risk, solve, SCVX_TOL};
use implicit_ray::{partition, LossKind, MarginMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = MarginMatrix::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0]]);
    let dec = partition(&a)?;
    for loss in LossKind::ALL {
        let opt = solve(&dec.a_s(&a), &dec.basis_s, loss, dec.n(), SCVX_TOL)?;
        println!(
            "{:<11} v = {:.12} inf R = {:.12} |grad| = {:.1e} lambda ~ {:.6}",
            loss.to_string(),
            opt.v_bar[0],
            infimum_risk(&dec, &opt),
            opt.grad_norm,
            opt.lambda_est
        );
    }
    // 2e^{−v} = e^{v} gives v = ln2/2 and R = (2e^{−v} + e^{v})/3 = 2√2/3
    println!("closed form (exponential): v = {:.12} inf R = {:.12}", 2f64.ln() / 2.0, 2.0 * 2f64.sqrt() / 3.0);
    Ok(())
}
