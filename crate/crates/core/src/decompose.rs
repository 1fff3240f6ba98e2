//! Unique split of the margin matrix into a separable part `A_c` and a
//! strongly convex part `A_S`, with the subspaces `S = span(A_Sᵀ)` and `S⊥`.
//!
//! Rows are classified with linear-programming certificates: row `i` is
//! separable iff some `u` has `Au ≤ 0` and `(Au)_i < 0`.

use serde::{Deserialize, Serialize};

use crate::dataset::MarginMatrix;
use crate::error::Result;
use crate::linalg::{norm, orthonormal_basis, Basis, Matrix, RANK_TOL};
use crate::lp::LinearProgram;
use crate::margin;

/// Slack above which a row counts as strictly separable.
pub const SLACK_TOL: f64 = 1e-7;
/// Residual allowed for exact-zero conditions in [`validate`].
pub const ZERO_TOL: f64 = 1e-9;
const LP_MAX_ITERS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Rows of `A_c`, ascending.
    pub sep_rows: Vec<usize>,
    /// Rows of `A_S`, ascending.
    pub sc_rows: Vec<usize>,
    pub basis_s: Basis,
    pub basis_perp: Basis,
    /// Rows of `A_c` projected onto `S⊥`, in `sep_rows` order.
    pub a_perp: Matrix,
}

impl Decomposition {
    pub fn n(&self) -> usize {
        self.sep_rows.len() + self.sc_rows.len()
    }

    pub fn n_c(&self) -> usize {
        self.sep_rows.len()
    }

    pub fn dim(&self) -> usize {
        self.basis_s.dim()
    }

    pub fn a_s(&self, a: &MarginMatrix) -> Matrix {
        a.matrix().select_rows(&self.sc_rows)
    }

    pub fn a_c(&self, a: &MarginMatrix) -> Matrix {
        a.matrix().select_rows(&self.sep_rows)
    }

    /// Builds the subspaces for a given row split.
    pub fn from_split(a: &MarginMatrix, mut sep_rows: Vec<usize>, mut sc_rows: Vec<usize>) -> Self {
        sep_rows.sort_unstable();
        sc_rows.sort_unstable();
        let sc_vecs: Vec<Vec<f64>> = sc_rows.iter().map(|&i| a.row(i).to_vec()).collect();
        let basis_s = orthonormal_basis(&sc_vecs, a.dim(), RANK_TOL);
        let basis_perp = basis_s.complement();
        let projected: Vec<Vec<f64>> = sep_rows
            .iter()
            .map(|&i| basis_perp.project(a.row(i)))
            .collect();
        let a_perp = Matrix::from_rows(&projected, a.dim());
        Decomposition {
            sep_rows,
            sc_rows,
            basis_s,
            basis_perp,
            a_perp,
        }
    }
}

/// A direction `u` with per-row slacks `s`: `Au ≤ −s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub u: Vec<f64>,
    pub slacks: Vec<f64>,
    pub lp_iterations: usize,
}

/// Maximizes Σ_{i∈active} s_i subject to `(Au)_i ≤ −s_i` on active rows,
/// `Au ≤ 0` on the rest, `0 ≤ s ≤ 1` and `|u|_∞ ≤ 10 n`.
pub fn separable_certificate(a: &MarginMatrix, active: &[usize]) -> Result<Certificate> {
    assert!(!active.is_empty(), "active set must be nonempty");
    let n = a.nrows();
    let d = a.dim();
    let k = active.len();
    let bound = 10.0 * n as f64;
    // variables: u⁺ (d), u⁻ (d), s (k)
    let nvars = 2 * d + k;
    let ncons = n + 2 * d + k;
    let mut g = Matrix::zeros(ncons, nvars);
    let mut h = vec![0.0; ncons];
    for i in 0..n {
        let row = a.row(i);
        for (j, &x) in row.iter().enumerate() {
            g.set(i, j, x);
            g.set(i, d + j, -x);
        }
    }
    for (slot, &i) in active.iter().enumerate() {
        g.set(i, 2 * d + slot, 1.0);
    }
    for j in 0..2 * d {
        g.set(n + j, j, 1.0);
        h[n + j] = bound;
    }
    for slot in 0..k {
        g.set(n + 2 * d + slot, 2 * d + slot, 1.0);
        h[n + 2 * d + slot] = 1.0;
    }
    let mut c = vec![0.0; nvars];
    for v in &mut c[2 * d..] {
        *v = 1.0;
    }
    let sol = LinearProgram::new(c, g, h).solve(LP_MAX_ITERS)?;
    let u: Vec<f64> = (0..d).map(|j| sol.x[j] - sol.x[d + j]).collect();
    let mut slacks = vec![0.0; n];
    for (slot, &i) in active.iter().enumerate() {
        slacks[i] = sol.x[2 * d + slot].clamp(0.0, 1.0);
    }
    Ok(Certificate {
        u,
        slacks,
        lp_iterations: sol.iterations,
    })
}

/// Per-row oracle: is row `i` strictly separable while every row keeps `(Au)_j ≤ 0`?
pub fn row_feasible(a: &MarginMatrix, i: usize) -> Result<bool> {
    assert!(i < a.nrows(), "row index out of range");
    let cert = separable_certificate(a, &[i])?;
    Ok(cert.slacks[i] > SLACK_TOL)
}

/// Computes the unique decomposition by repeated certificate solves.
pub fn partition(a: &MarginMatrix) -> Result<Decomposition> {
    let mut open: Vec<usize> = (0..a.nrows()).collect();
    let mut sep = Vec::new();
    while !open.is_empty() {
        let cert = separable_certificate(a, &open)?;
        let (moved, kept): (Vec<usize>, Vec<usize>) =
            open.iter().partition(|&&i| cert.slacks[i] > SLACK_TOL);
        if moved.is_empty() {
            break;
        }
        sep.extend(moved);
        open = kept;
    }
    Ok(Decomposition::from_split(a, sep, open))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.skipped)
    }

    pub fn get(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Independent consistency checks on a decomposition of `a`.
///
/// * `separable_certificate`: some `u` has `A_c u ≤ −SLACK_TOL` and `A_S u = 0`.
/// * `remainder_not_separable`: no row of `A_S` admits a certificate, and
///   `min_{q∈Δ} |A_Sᵀq|` vanishes in S-coordinates.
/// * `remainder_orthogonal`: every row of `A_S` is orthogonal to `S⊥`.
pub fn validate(dec: &Decomposition, a: &MarginMatrix) -> ValidationReport {
    let mut checks = Vec::new();

    if dec.sep_rows.is_empty() {
        checks.push(ValidationCheck {
            name: "separable_certificate".into(),
            passed: true,
            skipped: true,
            residual: 0.0,
        });
    } else {
        let check = match separable_certificate(a, &dec.sep_rows) {
            Ok(cert) => {
                let au = a.matrix().mul_vec(&cert.u);
                let worst_sep = dec.sep_rows.iter().map(|&i| au[i]).fold(f64::NEG_INFINITY, f64::max);
                let sc_leak = dec.sc_rows.iter().map(|&i| au[i].abs()).fold(0.0, f64::max);
                let ok = worst_sep <= -SLACK_TOL && sc_leak <= ZERO_TOL;
                ValidationCheck {
                    name: "separable_certificate".into(),
                    passed: ok,
                    skipped: false,
                    residual: worst_sep.max(sc_leak),
                }
            }
            Err(_) => ValidationCheck {
                name: "separable_certificate".into(),
                passed: false,
                skipped: false,
                residual: f64::INFINITY,
            },
        };
        checks.push(check);
    }

    if dec.sc_rows.is_empty() {
        checks.push(ValidationCheck {
            name: "remainder_not_separable".into(),
            passed: true,
            skipped: true,
            residual: 0.0,
        });
    } else {
        let lp_slack = separable_certificate(a, &dec.sc_rows)
            .map(|c| dec.sc_rows.iter().map(|&i| c.slacks[i]).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY);
        let coords: Vec<Vec<f64>> = dec
            .sc_rows
            .iter()
            .map(|&i| dec.basis_s.coords(a.row(i)))
            .collect();
        let hull_dist = if dec.basis_s.rank() == 0 {
            0.0
        } else {
            let m = Matrix::from_rows(&coords, dec.basis_s.rank());
            margin::min_norm_point(&m, 1e-14, 200_000).z_norm
        };
        checks.push(ValidationCheck {
            name: "remainder_not_separable".into(),
            passed: lp_slack <= SLACK_TOL && hull_dist <= 1e-6,
            skipped: false,
            residual: lp_slack.max(hull_dist),
        });
    }

    let leak = dec
        .sc_rows
        .iter()
        .map(|&i| norm(&dec.basis_perp.project(a.row(i))))
        .fold(0.0, f64::max);
    checks.push(ValidationCheck {
        name: "remainder_orthogonal".into(),
        passed: leak <= ZERO_TOL,
        skipped: dec.sc_rows.is_empty(),
        residual: leak,
    });

    ValidationReport { checks }
}
