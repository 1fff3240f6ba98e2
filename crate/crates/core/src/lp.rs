//! Dense tableau simplex for `maximize cᵀx  s.t.  Gx ≤ h, x ≥ 0` with `h ≥ 0`.
//!
//! With a nonnegative right-hand side the slack basis is feasible, so no phase
//! one is needed. Bland's rule guards against cycling on the heavily degenerate
//! certificate programs built by [`crate::decompose`].

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Matrix,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: Matrix, rhs: Vec<f64>) -> Self {
        assert_eq!(objective.len(), constraints.ncols());
        assert_eq!(rhs.len(), constraints.nrows());
        assert!(rhs.iter().all(|&b| b >= 0.0), "rhs must be nonnegative");
        LinearProgram {
            objective,
            constraints,
            rhs,
        }
    }

    pub fn solve(&self, max_iters: usize) -> Result<LpSolution> {
        let m = self.constraints.nrows();
        let k = self.constraints.ncols();
        let width = k + m + 1;
        // rows 0..m constraints, row m reduced costs; last column is the rhs
        let mut t = vec![0.0; (m + 1) * width];
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            row[..k].copy_from_slice(self.constraints.row(i));
            row[k + i] = 1.0;
            row[width - 1] = self.rhs[i];
        }
        for j in 0..k {
            t[m * width + j] = -self.objective[j];
        }
        let mut basis: Vec<usize> = (k..k + m).collect();

        let mut iterations = 0;
        loop {
            // Bland: lowest-index improving column
            let obj = &t[m * width..(m + 1) * width];
            let Some(enter) = (0..k + m).find(|&j| obj[j] < -COST_TOL) else {
                break;
            };
            if iterations >= max_iters {
                return Err(Error::NonConvergence {
                    solver: "simplex",
                    iterations,
                    residual: -obj[enter],
                });
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = t[i * width + enter];
                if a > PIVOT_TOL {
                    let ratio = t[i * width + width - 1] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && basis[i] < basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            pivot(&mut t, width, m + 1, pr, enter);
            basis[pr] = enter;
            iterations += 1;
        }

        let mut x = vec![0.0; k];
        for (i, &b) in basis.iter().enumerate() {
            if b < k {
                x[b] = t[i * width + width - 1].max(0.0);
            }
        }
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            value,
            iterations,
        })
    }
}

fn pivot(t: &mut [f64], width: usize, rows: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for v in &mut t[pr * width..(pr + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = t[pr * width..(pr + 1) * width].to_vec();
    for i in 0..rows {
        if i == pr {
            continue;
        }
        let f = t[i * width + pc];
        if f == 0.0 {
            continue;
        }
        let row = &mut t[i * width..(i + 1) * width];
        for (r, p) in row.iter_mut().zip(&pivot_row) {
            *r -= f * p;
        }
        row[pc] = 0.0;
    }
}
