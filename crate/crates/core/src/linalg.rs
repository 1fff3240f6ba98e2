//! Small dense linear-algebra kernels.
//!
//! Everything here works on plain `f64` slices plus a row-major [`Matrix`].
//! Problem sizes are tiny (n, d ≤ 10³) so clarity wins over blocking.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Default relative rank tolerance for [`orthonormal_basis`].
pub const RANK_TOL: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], alpha: f64) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row vectors. All rows must have length `cols`.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Returns the sub-matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.rows_iter().map(|r| dot(r, x)).collect()
    }

    /// Aᵀ y
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.rows_iter().zip(y) {
            if yi != 0.0 {
                axpy(yi, r, &mut out);
            }
        }
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows_iter().map(norm).fold(0.0, f64::max)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows_iter().map(|r| r.to_vec()).collect()
    }

    /// Aᵀ A as a nalgebra matrix.
    pub(crate) fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.cols, self.cols);
        for r in self.rows_iter() {
            for a in 0..self.cols {
                for b in 0..self.cols {
                    g[(a, b)] += r[a] * r[b];
                }
            }
        }
        g
    }
}

/// Orthonormal basis of a subspace of ℝᵈ, stored as `rank` column vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl Basis {
    /// The zero subspace of ℝᵈ.
    pub fn zero(dim: usize) -> Self {
        Basis {
            dim,
            columns: Vec::new(),
        }
    }

    pub fn full(dim: usize) -> Self {
        let columns = (0..dim)
            .map(|k| {
                let mut e = vec![0.0; dim];
                e[k] = 1.0;
                e
            })
            .collect();
        Basis { dim, columns }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Coordinates Bᵀw.
    pub fn coords(&self, w: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, w)).collect()
    }

    /// B c.
    pub fn embed(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (col, &ci) in self.columns.iter().zip(c) {
            axpy(ci, col, &mut out);
        }
        out
    }

    /// Orthogonal projection B(Bᵀw).
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim, "dimension mismatch");
        self.embed(&self.coords(w))
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Basis {
        let mut cols = self.columns.clone();
        let start = cols.len();
        let mut candidates: Vec<Vec<f64>> = Basis::full(self.dim).columns;
        while cols.len() < self.dim {
            for c in candidates.iter_mut() {
                for _ in 0..2 {
                    for q in &cols {
                        let p = dot(q, c);
                        axpy(-p, q, c);
                    }
                }
            }
            let (best, best_norm) = candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (i, norm(c)))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best_norm <= 1e-8 {
                break;
            }
            let v = scaled(&candidates.swap_remove(best), 1.0 / best_norm);
            cols.push(v);
        }
        Basis {
            dim: self.dim,
            columns: cols.split_off(start),
        }
    }

    /// max |BᵀB − I| over entries.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

/// Orthonormal basis for the span of `vectors` via modified Gram–Schmidt with
/// column pivoting and re-orthogonalization.
///
/// A direction is kept while its residual norm exceeds `rank_tol` times the
/// largest input norm; the pivoted residuals track the singular values closely
/// at these sizes.
pub fn orthonormal_basis(vectors: &[Vec<f64>], dim: usize, rank_tol: f64) -> Basis {
    assert!(rank_tol > 0.0, "rank_tol must be positive");
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if vectors.is_empty() || scale == 0.0 {
        return Basis::zero(dim);
    }
    let mut rest: Vec<Vec<f64>> = vectors.to_vec();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < dim && !rest.is_empty() {
        let (best, best_norm) = rest
            .iter()
            .enumerate()
            .map(|(i, c)| (i, norm(c)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_norm <= rank_tol * scale {
            break;
        }
        let mut v = rest.swap_remove(best);
        // second pass cleans up cancellation from the first
        for q in &cols {
            let p = dot(q, &v);
            axpy(-p, q, &mut v);
        }
        let nv = norm(&v);
        if nv <= rank_tol * scale {
            continue;
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        for r in rest.iter_mut() {
            let p = dot(&v, r);
            axpy(-p, &v, r);
        }
        cols.push(v);
    }
    Basis { dim, columns: cols }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "simplex_project needs n >= 1");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
        }
    }
    let mut q: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // absorb rounding so the sum is 1 to the last ulp or so
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        for x in &mut q {
            *x /= total;
        }
    }
    q
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn sym_eigen_range(m: DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (f64::INFINITY, 0.0);
    }
    let eig = SymmetricEigen::new(m);
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Minimum-norm least-squares solution of `m x = rhs`.
pub(crate) fn least_squares(m: DMatrix<f64>, rhs: DVector<f64>) -> Option<DVector<f64>> {
    let svd = m.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.solve(&rhs, smax * 1e-12).ok()
}
