//! Splits a small mixed dataset into its maximal separable rows and the
//! strongly convex remainder, then validates the split independently.
//!
//! cargo run --example decompose_mixed

use implicit_ray::decompose::{row_feasible, validate};
use implicit_ray::{partition, MarginMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // rows of A = −y xᵀ: one strictly separable row, two opposing rows on the second axis
    let a = MarginMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]]);
    let dec = partition(&a)?;
    println!("separable rows: {:?}", dec.sep_rows);
    println!("remaining rows: {:?}", dec.sc_rows);
    println!("basis of S:     {:?}", dec.basis_s.columns());
    println!("basis of S⊥:    {:?}", dec.basis_perp.columns());
    for i in 0..a.nrows() {
        println!("row {i} feasible by its own LP: {}", row_feasible(&a, i)?);
    }
    for c in validate(&dec, &a).checks {
        println!("{:<24} passed = {} residual = {:.3e}", c.name, c.passed || c.skipped, c.residual);
    }
    Ok(())
}
