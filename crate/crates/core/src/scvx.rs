//! The strongly convex restricted problem over `S`.
//!
//! All work happens in the coordinates of an orthonormal basis `B` of `S`,
//! where `c ↦ L(A_S B c)/n` is strictly convex and coercive.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decompose::Decomposition;
use crate::error::{Error, Result};
use crate::gd::{grad_rows, risk_rows, LossKind};
use crate::linalg::{norm, sym_eigen_range, Basis, Matrix};

pub const SCVX_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 1_000_000;
const ARMIJO: f64 = 1e-4;
const LAMBDA_DIRECTIONS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScOptimum {
    /// Minimizer in `S`, ambient coordinates.
    pub v_bar: Vec<f64>,
    /// `L(A_S v̄)/n` with `n` the normalization count below.
    pub risk_inf: f64,
    /// Smallest sampled Hessian eigenvalue over the 1-sublevel set; `+∞` when `S = {0}`.
    #[serde(with = "crate::json_float")]
    pub lambda_est: f64,
    pub grad_norm: f64,
    /// Row count the risk is averaged over.
    pub n: usize,
    pub iterations: usize,
}

/// Minimizes `L(A_S v)/n_S` over `v ∈ S`; `lambda_est` is filled in by [`estimate_lambda`].
pub fn solve_vbar(a_s: &Matrix, basis_s: &Basis, loss: LossKind, tol: f64) -> Result<ScOptimum> {
    solve_vbar_scaled(a_s, basis_s, loss, a_s.nrows().max(1), tol)
}

/// As [`solve_vbar`], averaging over `n` rows (the full dataset size inside a decomposition).
pub fn solve_vbar_scaled(
    a_s: &Matrix,
    basis_s: &Basis,
    loss: LossKind,
    n: usize,
    tol: f64,
) -> Result<ScOptimum> {
    let d = basis_s.dim();
    let nf = n as f64;
    if a_s.nrows() == 0 {
        return Ok(ScOptimum {
            v_bar: vec![0.0; d],
            risk_inf: 0.0,
            lambda_est: f64::INFINITY,
            grad_norm: 0.0,
            n,
            iterations: 0,
        });
    }
    let m = reduced(a_s, basis_s);
    let r = basis_s.rank();
    if r == 0 {
        return Ok(ScOptimum {
            v_bar: vec![0.0; d],
            risk_inf: risk_rows(a_s, loss, &vec![0.0; d], nf),
            lambda_est: f64::INFINITY,
            grad_norm: 0.0,
            n,
            iterations: 0,
        });
    }

    let mut c = vec![0.0; r];
    let mut f = risk_rows(&m, loss, &c, nf);
    let mut g = grad_rows(&m, loss, &c, nf);
    let mut gn = norm(&g);
    let mut step = 1.0;
    let mut it = 0;
    while gn > tol {
        if it >= MAX_ITERS {
            return Err(Error::NonConvergence {
                solver: "strongly convex part",
                iterations: it,
                residual: gn,
            });
        }
        // backtracking from twice the last accepted step
        step *= 2.0;
        let (next, fnext) = loop {
            let cand: Vec<f64> = c.iter().zip(&g).map(|(ci, gi)| ci - step * gi).collect();
            let fc = risk_rows(&m, loss, &cand, nf);
            let noise = 64.0 * f64::EPSILON * f.abs();
            if fc.is_finite() && fc <= f - ARMIJO * step * gn * gn && f - fc > noise {
                break (cand, fc);
            }
            // below the resolution of f, fall back to a decrease in gradient norm
            if (fc - f).abs() <= noise && norm(&grad_rows(&m, loss, &cand, nf)) < (1.0 - ARMIJO) * gn {
                break (cand, fc.min(f));
            }
            step *= 0.5;
            if step < 1e-300 {
                // no representable decrease left
                return finish(a_s, basis_s, loss, n, c, gn, it, tol);
            }
        };
        if !(fnext <= f) {
            return Err(Error::Numerical("risk increased along an accepted step".into()));
        }
        c = next;
        f = fnext;
        g = grad_rows(&m, loss, &c, nf);
        gn = norm(&g);
        it += 1;
    }
    finish(a_s, basis_s, loss, n, c, gn, it, tol)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    a_s: &Matrix,
    basis_s: &Basis,
    loss: LossKind,
    n: usize,
    c: Vec<f64>,
    gn: f64,
    it: usize,
    tol: f64,
) -> Result<ScOptimum> {
    if gn > tol {
        return Err(Error::NonConvergence {
            solver: "strongly convex part",
            iterations: it,
            residual: gn,
        });
    }
    let v_bar = basis_s.embed(&c);
    Ok(ScOptimum {
        risk_inf: risk_rows(a_s, loss, &v_bar, n as f64),
        v_bar,
        lambda_est: f64::INFINITY,
        grad_norm: gn,
        n,
        iterations: it,
    })
}

/// The infimum of the full risk, `L(A_S v̄)/n` with `n` the dataset size.
pub fn infimum_risk(dec: &Decomposition, opt: &ScOptimum) -> f64 {
    opt.risk_inf * opt.n as f64 / dec.n() as f64
}

/// Smallest eigenvalue of the reduced Hessian `Bᵀ A_Sᵀ diag(ℓ″) A_S B / n`, minimized
/// over `v̄` and a quasi-random sample of the sublevel set `{R_S ≤ 1}`.
///
/// This is an upper estimate of the true modulus.
pub fn estimate_lambda(a_s: &Matrix, basis_s: &Basis, loss: LossKind, opt: &ScOptimum) -> Result<f64> {
    let r = basis_s.rank();
    if r == 0 || a_s.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let nf = opt.n as f64;
    let m = reduced(a_s, basis_s);
    let center = basis_s.coords(&opt.v_bar);
    let level = |c: &[f64]| risk_rows(&m, loss, c, nf);

    let mut points = vec![center.clone()];
    if level(&center) < 1.0 {
        for k in 0..LAMBDA_DIRECTIONS {
            let dir = direction(r, k);
            let s = boundary(&level, &center, &dir);
            let frac = halton(k + 1, 2);
            points.push(along(&center, &dir, s));
            points.push(along(&center, &dir, s * frac));
        }
    }

    let mut lambda = f64::INFINITY;
    for c in &points {
        let z = m.mul_vec(c);
        let mut h = DMatrix::zeros(r, r);
        for (i, zi) in z.iter().enumerate() {
            let w = loss.second(*zi) / nf;
            let row = m.row(i);
            for a in 0..r {
                for b in 0..r {
                    h[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        let (lo, _) = sym_eigen_range(h);
        lambda = lambda.min(lo);
    }
    if !(lambda > 0.0) {
        return Err(Error::Numerical(format!(
            "strong convexity estimate is not positive ({lambda:e})"
        )));
    }
    Ok(lambda)
}

/// Solves for `v̄` and attaches the λ estimate.
pub fn solve(a_s: &Matrix, basis_s: &Basis, loss: LossKind, n: usize, tol: f64) -> Result<ScOptimum> {
    let mut opt = solve_vbar_scaled(a_s, basis_s, loss, n, tol)?;
    opt.lambda_est = estimate_lambda(a_s, basis_s, loss, &opt)?;
    Ok(opt)
}

fn reduced(a_s: &Matrix, basis_s: &Basis) -> Matrix {
    let rows: Vec<Vec<f64>> = a_s.rows_iter().map(|row| basis_s.coords(row)).collect();
    Matrix::from_rows(&rows, basis_s.rank())
}

fn along(c: &[f64], dir: &[f64], s: f64) -> Vec<f64> {
    c.iter().zip(dir).map(|(a, b)| a + s * b).collect()
}

/// Largest `s` with `level(c + s·dir) ≤ 1`, by doubling then bisection.
fn boundary(level: &impl Fn(&[f64]) -> f64, c: &[f64], dir: &[f64]) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while level(&along(c, dir, hi)) <= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return lo;
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if level(&along(c, dir, mid)) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut out = 0.0;
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

/// Deterministic unit direction number `k` in `r` dimensions.
fn direction(r: usize, k: usize) -> Vec<f64> {
    if r == 1 {
        return vec![if k.is_multiple_of(2) { 1.0 } else { -1.0 }];
    }
    // Box–Muller on Halton pairs gives roughly isotropic Gaussians
    let mut g = Vec::with_capacity(r);
    let mut p = 0;
    while g.len() < r {
        let b1 = PRIMES[p % PRIMES.len()];
        let b2 = PRIMES[(p + 1) % PRIMES.len()];
        let u1 = halton(k + 1, b1).max(1e-12);
        let u2 = halton(k + 1, b2);
        let rad = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        g.push(rad * th.cos());
        if g.len() < r {
            g.push(rad * th.sin());
        }
        p += 2;
    }
    let nn = norm(&g);
    if nn == 0.0 {
        let mut e = vec![0.0; r];
        e[k % r] = 1.0;
        return e;
    }
    g.iter().map(|v| v / nn).collect()
}

/// Norm of `Π_S ∇(L∘A_S)(v)/n`.
pub fn projected_grad_norm(a_s: &Matrix, basis_s: &Basis, loss: LossKind, n: usize, v: &[f64]) -> f64 {
    let g = grad_rows(a_s, loss, v, n as f64);
    norm(&basis_s.project(&g))
}
