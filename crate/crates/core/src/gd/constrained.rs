//! `w̄ = argmin { R(w) : |w| ≤ radius }`.
//!
//! A Newton solve of `min R(w) + μ|w|²/2` with `μ` found by bisection so
//! that `|w(μ)| = radius` gets close; projected gradient on `ln R` (same
//! minimizer, curvature bounded independently of how small the risk is)
//! then drives the gradient-mapping residual below the tolerance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{grad, risk, LossKind};
use crate::dataset::MarginMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

pub const BALL_TOL: f64 = 1e-9;
pub(crate) const MAX_ITERS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSolution {
    pub w: Vec<f64>,
    /// |w − P(w − ∇ln R(w))|
    pub residual: f64,
    pub iterations: usize,
}

fn project(w: &mut [f64], radius: f64) {
    let n = norm(w);
    if n > radius {
        let s = radius / n;
        w.iter_mut().for_each(|v| *v *= s);
    }
}

fn log_risk_grad(a: &MarginMatrix, loss: LossKind, w: &[f64]) -> (f64, Vec<f64>) {
    let r = risk(a, loss, w);
    let g = grad(a, loss, w).into_iter().map(|v| v / r).collect();
    (r.ln(), g)
}

fn residual(w: &[f64], g: &[f64], radius: f64) -> f64 {
    let mut p: Vec<f64> = w.iter().zip(g).map(|(x, d)| x - d).collect();
    project(&mut p, radius);
    norm(&w.iter().zip(&p).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Minimizer of `R(w) + μ|w|²/2` by damped Newton from `w0`.
fn newton(a: &MarginMatrix, loss: LossKind, mu: f64, w0: &[f64]) -> Vec<f64> {
    let d = a.dim();
    let n = a.nrows() as f64;
    let obj = |w: &[f64]| risk(a, loss, w) + 0.5 * mu * dot(w, w);
    let mut w = w0.to_vec();
    let mut f = obj(&w);
    for _ in 0..100 {
        let mut g = grad(a, loss, &w);
        g.iter_mut().zip(&w).for_each(|(gk, wk)| *gk += mu * wk);
        let mut h = DMatrix::from_diagonal_element(d, d, mu);
        for r in a.matrix().rows_iter() {
            let c = loss.second(dot(r, &w)) / n;
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += c * r[i] * r[j];
                }
            }
        }
        let scale = h.diagonal().max().max(f64::MIN_POSITIVE);
        let rhs = DVector::from_column_slice(&g);
        let p = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match (h + DMatrix::identity(d, d) * (1e-12 * scale)).cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => rhs.clone() / scale,
            },
        };
        let dec = p.dot(&rhs);
        if !(dec > 4.0 * f64::EPSILON * f.abs()) {
            break;
        }
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-12 {
            let cand: Vec<f64> = w.iter().zip(p.iter()).map(|(x, q)| x - step * q).collect();
            let fc = obj(&cand);
            if fc <= f - 1e-4 * step * dec {
                w = cand;
                f = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    w
}

/// Point on the ball boundary (or interior optimum) from the regularization path.
fn path_start(a: &MarginMatrix, loss: LossKind, radius: f64, start: &[f64]) -> Vec<f64> {
    let d = a.dim();
    let bound = a.nrows() as f64 * risk(a, loss, &vec![0.0; d]) * a.max_row_norm().max(1e-300);
    let mut hi = (bound / radius).max(f64::MIN_POSITIVE).ln();
    let mut w_hi = newton(a, loss, hi.exp(), start);
    let floor = hi - 80.0;
    let mut lo = hi;
    let mut w_lo = w_hi.clone();
    // walk μ down until the path leaves the ball
    while norm(&w_lo) <= radius {
        if lo < floor {
            let w = newton(a, loss, 0.0, &w_lo);
            return if norm(&w) <= radius { w } else { w_lo };
        }
        hi = lo;
        w_hi = w_lo.clone();
        lo -= 2.0;
        w_lo = newton(a, loss, lo.exp(), &w_hi);
    }
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let w = newton(a, loss, mid.exp(), &w_hi);
        let nw = norm(&w);
        if (nw - radius).abs() <= 1e-14 * radius {
            return w;
        }
        if nw > radius {
            lo = mid;
        } else {
            hi = mid;
            w_hi = w;
        }
    }
    w_hi
}

/// Regularization path start, then projected gradient with backtracking.
pub(crate) fn solve_ball(
    a: &MarginMatrix,
    loss: LossKind,
    radius: f64,
    tol: f64,
    start: &[f64],
    max_iters: usize,
) -> BallSolution {
    let d = a.dim();
    if radius <= 0.0 {
        return BallSolution {
            w: vec![0.0; d],
            residual: 0.0,
            iterations: 0,
        };
    }
    let mut w = start.to_vec();
    project(&mut w, radius);
    let (mut f, mut g) = log_risk_grad(a, loss, &w);
    let mut res = residual(&w, &g, radius);
    if res > tol {
        let mut cand = path_start(a, loss, radius, &w);
        project(&mut cand, radius);
        let (fc, gc) = log_risk_grad(a, loss, &cand);
        let rc = residual(&cand, &gc, radius);
        if rc < res {
            (w, f, g, res) = (cand, fc, gc, rc);
        }
    }
    let mut step: f64 = 1.0;
    let mut it = 0;
    'outer: while res > tol && it < max_iters {
        step = (step * 2.0).min(1e6);
        loop {
            let mut cand: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            project(&mut cand, radius);
            let diff: Vec<f64> = cand.iter().zip(&w).map(|(c, x)| c - x).collect();
            let (fc, gc) = log_risk_grad(a, loss, &cand);
            let model = f + dot(&g, &diff) + dot(&diff, &diff) / (2.0 * step);
            let noise = 64.0 * f64::EPSILON * f.abs().max(1.0);
            let rc = residual(&cand, &gc, radius);
            // below rounding the model test is uninformative; fall back to the residual
            if fc <= model && f - fc > noise || (fc - f).abs() <= noise && rc < res {
                w = cand;
                f = fc;
                g = gc;
                res = rc;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break 'outer;
            }
        }
        it += 1;
    }
    BallSolution {
        w,
        residual: res,
        iterations: it,
    }
}

/// Minimizer of the risk over the ball of radius `radius`, from `w = 0`.
pub fn constrained_opt(a: &MarginMatrix, loss: LossKind, radius: f64, tol: f64) -> Result<Vec<f64>> {
    constrained_opt_from(a, loss, radius, tol, &vec![0.0; a.dim()]).map(|s| s.w)
}

/// As [`constrained_opt`], warm-started; fails with the best residual when `tol` is not reached.
pub fn constrained_opt_from(
    a: &MarginMatrix,
    loss: LossKind,
    radius: f64,
    tol: f64,
    start: &[f64],
) -> Result<BallSolution> {
    if !(radius >= 0.0) {
        return Err(Error::Validation(format!("ball radius {radius} is negative")));
    }
    let sol = solve_ball(a, loss, radius, tol, start, MAX_ITERS);
    if sol.residual > tol {
        return Err(Error::NonConvergence {
            solver: "constrained optimum",
            iterations: sol.iterations,
            residual: sol.residual,
        });
    }
    Ok(sol)
}
