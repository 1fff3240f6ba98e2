//! Maximum-margin primal/dual pair over `S⊥`.
//!
//! The dual is the minimum-norm point of the convex hull of the rows of `A⊥`:
//! `γ = min_{q∈Δ} |A⊥ᵀq|`, and `ū = −A⊥ᵀq̄/γ`. It is solved by projected
//! gradient on `½|A⊥ᵀq|²` with the duality gap as stopping rule. Once the
//! support of `q` settles, an affine least-squares solve on that support
//! finishes the job to machine precision. Instances where projected gradient
//! stalls within its budget fall back to Wolfe's active-set method, which
//! terminates finitely; either way the returned point carries a gap certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, least_squares, norm, simplex_project, sym_eigen_range, Matrix};

pub const MARGIN_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 1_000_000;
const POLISH_EVERY: usize = 64;
/// Projected-gradient iterations before switching to the active-set method.
const PG_BUDGET: usize = 50_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSolution {
    pub gamma: f64,
    pub u_bar: Vec<f64>,
    pub q_bar: Vec<f64>,
    /// `|A⊥ᵀq̄| − (−max_i (A⊥ū)_i)`, nonnegative by weak duality.
    pub gap: f64,
    pub iterations: usize,
}

impl MarginSolution {
    /// `ln n + Σ q̄_i ln q̄_i`, the conjugate of `ln(Σ exp(·)/n)` at `q̄`.
    pub fn conjugate_at_q(&self, n: usize) -> f64 {
        (n as f64).ln()
            + self
                .q_bar
                .iter()
                .filter(|&&q| q > 0.0)
                .map(|&q| q * q.ln())
                .sum::<f64>()
    }
}

/// State of the dual at a simplex point.
#[derive(Clone, Debug)]
pub(crate) struct MinNorm {
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub z_norm: f64,
    /// min_i ⟨m_i, z⟩
    pub min_inner: f64,
    pub iterations: usize,
}

impl MinNorm {
    fn at(rows: &Matrix, q: Vec<f64>, iterations: usize) -> Self {
        let z = rows.tr_mul_vec(&q);
        let min_inner = rows
            .rows_iter()
            .map(|r| dot(r, &z))
            .fold(f64::INFINITY, f64::min);
        MinNorm {
            z_norm: norm(&z),
            q,
            z,
            min_inner,
            iterations,
        }
    }

    /// Wolfe gap |z|² − min_i⟨m_i, z⟩; zero exactly at the minimum-norm point.
    fn wolfe_gap(&self) -> f64 {
        (self.z_norm * self.z_norm - self.min_inner).max(0.0)
    }

    /// Margin duality gap γ_dual − γ_primal.
    fn margin_gap(&self) -> f64 {
        if self.z_norm == 0.0 {
            return 0.0;
        }
        self.z_norm - self.min_inner / self.z_norm
    }
}

/// Minimum-norm point of the convex hull of the rows, stopping once the
/// Wolfe gap drops to `tol` (or the maximal iteration count is reached).
pub(crate) fn min_norm_point(rows: &Matrix, tol: f64, max_iters: usize) -> MinNorm {
    solve_min_norm(rows, max_iters, |s| s.wolfe_gap() <= tol || s.z_norm <= tol)
}

/// Projected gradient within its budget, then the active-set method; keeps the smaller Wolfe gap.
fn solve_min_norm(rows: &Matrix, max_iters: usize, done: impl Fn(&MinNorm) -> bool) -> MinNorm {
    let pg = run_dual(rows, max_iters.min(PG_BUDGET), &done);
    if done(&pg) || max_iters <= PG_BUDGET {
        return pg;
    }
    let mut ws = wolfe(rows, max_iters - pg.iterations);
    ws.iterations += pg.iterations;
    if ws.wolfe_gap() < pg.wolfe_gap() || done(&ws) {
        ws
    } else {
        pg
    }
}

/// Barycentric weights of the minimum-norm point of the affine hull of `corral`.
fn affine_min(rows: &Matrix, corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in corral.iter().enumerate() {
        for (b, &j) in corral.iter().enumerate() {
            kkt[(a, b)] = dot(rows.row(i), rows.row(j));
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = least_squares(kkt, rhs)?;
    let alpha: Vec<f64> = (0..k).map(|a| sol[a]).collect();
    alpha.iter().all(|v| v.is_finite()).then_some(alpha)
}

/// Wolfe's minimum-norm-point algorithm: a corral of affinely independent rows
/// whose affine minimizer is moved toward while it leaves the simplex.
fn wolfe(rows: &Matrix, max_iters: usize) -> MinNorm {
    let n = rows.nrows();
    let start = (0..n)
        .min_by(|&i, &j| norm(rows.row(i)).total_cmp(&norm(rows.row(j))))
        .expect("at least one row");
    let mut corral = vec![start];
    let mut lam = vec![1.0];
    let to_q = |corral: &[usize], lam: &[f64]| {
        let mut q = vec![0.0; n];
        for (&i, &l) in corral.iter().zip(lam) {
            q[i] += l;
        }
        q
    };
    let mut state = MinNorm::at(rows, to_q(&corral, &lam), 0);
    let mut it = 0;
    while it < max_iters {
        it += 1;
        let (j, inner) = rows
            .rows_iter()
            .map(|r| dot(r, &state.z))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one row");
        let zz = state.z_norm * state.z_norm;
        if zz - inner <= 1e-15 * zz.max(f64::MIN_POSITIVE) || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lam.push(0.0);
        let mut ok = false;
        for _ in 0..=n {
            let Some(alpha) = affine_min(rows, &corral) else {
                break;
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                let s: f64 = alpha.iter().sum();
                lam = alpha.iter().map(|a| a / s).collect();
                ok = true;
                break;
            }
            let theta = lam
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= 1e-14)
                .map(|(&l, &a)| if l - a > 0.0 { l / (l - a) } else { 0.0 })
                .fold(1.0, f64::min)
                .clamp(0.0, 1.0);
            let mixed: Vec<f64> = lam
                .iter()
                .zip(&alpha)
                .map(|(&l, &a)| theta * a + (1.0 - theta) * l)
                .collect();
            let drop = mixed
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .expect("nonempty corral");
            let keep: Vec<usize> = (0..corral.len())
                .filter(|&k| k != drop && mixed[k] > 1e-16)
                .collect();
            corral = keep.iter().map(|&k| corral[k]).collect();
            let s: f64 = keep.iter().map(|&k| mixed[k]).sum();
            lam = keep.iter().map(|&k| mixed[k] / s).collect();
            if corral.is_empty() {
                break;
            }
        }
        let cand = if ok && !corral.is_empty() {
            MinNorm::at(rows, to_q(&corral, &lam), it)
        } else {
            state.clone()
        };
        if !ok || cand.z_norm >= state.z_norm {
            break;
        }
        state = cand;
    }
    state.iterations = it;
    state
}

fn run_dual(rows: &Matrix, max_iters: usize, done: impl Fn(&MinNorm) -> bool) -> MinNorm {
    let n = rows.nrows();
    let (_, lmax) = sym_eigen_range(rows.gram());
    let mut state = MinNorm::at(rows, vec![1.0 / n as f64; n], 0);
    if lmax <= 0.0 {
        return state;
    }
    let step = 1.0 / lmax;
    let mut best = state.clone();
    let mut it = 0;
    while it < max_iters {
        if done(&state) {
            break;
        }
        if it % POLISH_EVERY == POLISH_EVERY - 1 {
            if let Some(p) = polish(rows, &state.q) {
                let cand = MinNorm::at(rows, p, it);
                if cand.wolfe_gap() < state.wolfe_gap() {
                    state = cand;
                    if done(&state) {
                        break;
                    }
                }
            }
        }
        let grad = rows.mul_vec(&state.z);
        let moved: Vec<f64> = state
            .q
            .iter()
            .zip(&grad)
            .map(|(q, g)| q - step * g)
            .collect();
        it += 1;
        state = MinNorm::at(rows, simplex_project(&moved), it);
        if state.wolfe_gap() < best.wolfe_gap() {
            best = state.clone();
        }
    }
    if !done(&state) && best.wolfe_gap() < state.wolfe_gap() {
        state = best;
    }
    // a last polish can only help
    if let Some(p) = polish(rows, &state.q) {
        let cand = MinNorm::at(rows, p, state.iterations);
        if cand.wolfe_gap() < state.wolfe_gap() {
            state = cand;
        }
    }
    state.iterations = it;
    state
}

/// Minimum-norm point of the affine hull of the current support, if its
/// barycentric weights are nonnegative.
fn polish(rows: &Matrix, q: &[f64]) -> Option<Vec<f64>> {
    let qmax = q.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 1e-12 * qmax).collect();
    let k = support.len();
    if k == 0 {
        return None;
    }
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = dot(rows.row(i), rows.row(j));
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = least_squares(kkt, rhs)?;
    let sum: f64 = (0..k).map(|a| sol[a]).sum();
    if (sum - 1.0).abs() > 1e-9 || (0..k).any(|a| sol[a] < -1e-12 || !sol[a].is_finite()) {
        return None;
    }
    let mut out = vec![0.0; q.len()];
    for (a, &i) in support.iter().enumerate() {
        out[i] = sol[a].max(0.0);
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    Some(out)
}

/// Solves the margin dual over the rows of `a_perp` until the duality gap is at most `tol`.
pub fn solve_dual(a_perp: &Matrix, tol: f64) -> Result<MarginSolution> {
    solve_dual_with(a_perp, tol, MAX_ITERS)
}

pub fn solve_dual_with(a_perp: &Matrix, tol: f64, max_iters: usize) -> Result<MarginSolution> {
    assert!(a_perp.nrows() > 0, "margin problem needs at least one row");
    let state = solve_min_norm(a_perp, max_iters, |s| s.z_norm <= tol || s.margin_gap() <= tol);
    if state.z_norm <= tol {
        return Err(Error::NotSeparable {
            gamma: state.z_norm,
        });
    }
    let gap = state.margin_gap();
    if gap > tol {
        return Err(Error::NonConvergence {
            solver: "margin dual",
            iterations: state.iterations,
            residual: gap,
        });
    }
    let gamma = state.z_norm;
    let u_bar: Vec<f64> = state.z.iter().map(|v| -v / gamma).collect();
    Ok(MarginSolution {
        gamma,
        u_bar,
        q_bar: state.q,
        gap: gap.max(0.0),
        iterations: state.iterations,
    })
}

/// `−max_i (A⊥u)_i` for a unit vector `u`.
pub fn primal_margin(a_perp: &Matrix, u: &[f64]) -> Result<f64> {
    let nu = norm(u);
    if (nu - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("direction has norm {nu}, expected 1")));
    }
    Ok(-a_perp
        .rows_iter()
        .map(|r| dot(r, u))
        .fold(f64::NEG_INFINITY, f64::max))
}
