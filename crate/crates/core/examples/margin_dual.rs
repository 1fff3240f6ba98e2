//! Solves the max-margin problem over the separable rows through its
//! simplex-constrained dual and checks strong duality against the primal.
//!
//! cargo run --example margin_dual

use implicit_ray::linalg::Matrix;
use implicit_ray::margin::{primal_margin, solve_dual, MARGIN_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases: [(&str, Vec<Vec<f64>>); 3] = [
        ("single row", vec![vec![-1.0, 0.0]]),
        ("two axis rows", vec![vec![-1.0, 0.0], vec![0.0, -1.0]]),
        ("three rows", vec![vec![-1.0, 0.2], vec![-0.6, -0.8], vec![-0.8, 0.3]]),
    ];
    for (name, rows) in cases {
        let m = Matrix::from_rows(&rows, 2);
        let sol = solve_dual(&m, MARGIN_TOL)?;
        let primal = primal_margin(&m, &sol.u_bar)?;
        println!(
            "{name:<14} gamma = {:.12}  primal = {:.12}  gap = {:.1e}  u = {:?}  q = {:?}",
            sol.gamma, primal, sol.gap, sol.u_bar, sol.q_bar
        );
    }
    Ok(())
}
