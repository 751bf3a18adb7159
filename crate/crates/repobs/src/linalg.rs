//! Dense linear algebra for the transform optimizers.
//!
//! Everything here is sized for desk-scale problems (d up to a few
//! hundred): a row-major `Matrix`, a cyclic Jacobi symmetric
//! eigensolver, Cholesky factorization/solve, and the generalized
//! symmetric-definite eigenproblem reduced through the Cholesky factor,
//! which is exactly the simultaneous diagonalization the optimizers need.

use thiserror::Error;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Jacobi sweep cap; exceeding it is an error, never a silent partial result.
const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: |m[{i},{j}] - m[{j},{i}]| = {dev:e} exceeds tolerance")]
    NotSymmetric { i: usize, j: usize, dev: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flatten().copied().collect();
        Matrix { rows: rows.len(), cols, data }
    }

    /// Row-major construction from a flat slice.
    pub fn from_slice(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        Matrix { rows, cols, data: entries.to_vec() }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= c;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace needs a square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Checks symmetry within `SYMMETRY_TOL` relative to the largest entry.
    pub fn check_symmetric(&self) -> Result<(), LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} matrix cannot be symmetric",
                self.rows, self.cols
            )));
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let dev = (self[(i, j)] - self[(j, i)]).abs();
                if dev > SYMMETRY_TOL * scale {
                    return Err(LinalgError::NotSymmetric { i, j, dev });
                }
            }
        }
        Ok(())
    }

    /// Replaces the matrix by (M + Mᵀ)/2, absorbing accumulation error.
    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// ── vector helpers ──────────────────────────────────────────────────

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot of unequal lengths");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Quadratic form (a, M a).
pub fn quad_form(m: &Matrix, a: &[f64]) -> f64 {
    dot(a, &m.matvec(a))
}

/// Outer product a bᵀ.
pub fn outer(a: &[f64], b: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(a.len(), b.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            m[(i, j)] = x * y;
        }
    }
    m
}

// ── symmetric eigendecomposition (cyclic Jacobi) ────────────────────

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// the columns of an orthonormal matrix. Input symmetry is checked to
/// `SYMMETRY_TOL` and then enforced by averaging, so scatter-matrix
/// accumulation error does not leak into the iteration.
pub fn sym_eig(m: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    m.check_symmetric()?;
    let a = m.symmetrized();
    let n = a.rows();
    let mut a = a;
    let mut v = Matrix::identity(n);

    if n == 1 {
        return Ok((vec![a[(0, 0)]], v));
    }

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if off_norm(&a) <= 1e-14 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // Classic Jacobi rotation annihilating a[p][q].
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_norm(&a) > 1e-14 * scale {
        return Err(LinalgError::NoConvergence(MAX_JACOBI_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok((eigenvalues, vectors))
}

// ── Cholesky, SPD solve ─────────────────────────────────────────────

/// Lower-triangular L with L Lᵀ = m for SPD m.
pub fn cholesky(m: &Matrix) -> Result<Matrix, LinalgError> {
    m.check_symmetric()?;
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves L x = b for lower-triangular L.
pub fn forward_substitute(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves Lᵀ x = b for lower-triangular L.
pub fn back_substitute_lt(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves m x = rhs for SPD m via Cholesky.
pub fn solve_spd(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != m.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs length {} vs matrix order {}",
            rhs.len(),
            m.rows()
        )));
    }
    let l = cholesky(m)?;
    let y = forward_substitute(&l, rhs);
    Ok(back_substitute_lt(&l, &y))
}

// ── generalized symmetric-definite eigenproblem ─────────────────────

/// Solves b v = λ w v for symmetric `b` and SPD `w`.
///
/// Reduction through w = L Lᵀ: the standard problem L⁻¹ b L⁻ᵀ u = λ u is
/// solved by Jacobi and the vectors are back-transformed as v = L⁻ᵀ u, so
/// the returned eigenvector matrix B satisfies Bᵀ w B = I and
/// Bᵀ b B = diag(λ) — the simultaneous diagonalization of the pencil.
/// Eigenvalues come out sorted descending.
pub fn gen_eig_spd(b: &Matrix, w: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    b.check_symmetric()?;
    if b.rows() != w.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "pencil orders {} and {} differ",
            b.rows(),
            w.rows()
        )));
    }
    let n = b.rows();
    let l = cholesky(w)?;

    // C = L⁻¹ b L⁻ᵀ, built column by column.
    let mut c = Matrix::zeros(n, n);
    for j in 0..n {
        let col = b.column(j);
        let y = forward_substitute(&l, &col);
        for i in 0..n {
            c[(i, j)] = y[i];
        }
    }
    let mut c2 = Matrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| c[(i, j)]).collect();
        let y = forward_substitute(&l, &row);
        for j in 0..n {
            c2[(i, j)] = y[j];
        }
    }
    let c2 = c2.symmetrized();

    let (eigenvalues, u) = sym_eig(&c2)?;
    let mut vectors = Matrix::zeros(n, n);
    for j in 0..n {
        let col = u.column(j);
        let v = back_substitute_lt(&l, &col);
        for i in 0..n {
            vectors[(i, j)] = v[i];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Gram-Schmidt orthonormalization of the columns; panics on rank collapse.
pub fn orthonormalize_columns(m: &Matrix) -> Matrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q = m.clone();
    for j in 0..cols {
        for prev in 0..j {
            let proj: f64 = (0..rows).map(|i| q[(i, j)] * q[(i, prev)]).sum();
            for i in 0..rows {
                q[(i, j)] -= proj * q[(i, prev)];
            }
        }
        let norm: f64 = (0..rows).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "rank-deficient column set in orthonormalization");
        for i in 0..rows {
            q[(i, j)] /= norm;
        }
    }
    q
}
