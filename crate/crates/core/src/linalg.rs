//! Small dense matrix algebra.
//!
//! Every matrix in this crate is tiny (information matrices are at most 3x3,
//! covariance matrices are p x p for modest p). The wrappers here keep the
//! symmetric/general distinction in the types; factorizations go through
//! nalgebra.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative determinant floor used by [`SymMatrix::invert`].
pub const SINGULAR_TOL: f64 = 1e-12;

/// General dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: bad.len(),
            });
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        Ok(Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        }))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|k| self[(i, k)] * v[k]).sum())
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Symmetrizes a square matrix whose asymmetry is below `tol` relative
    /// to its largest entry.
    pub fn symmetrize(&self, tol: f64) -> Result<SymMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        if worst > tol * scale {
            return Err(Error::Asymmetric(worst / scale));
        }
        Ok(SymMatrix::from_fn(self.rows, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        }))
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

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.cols).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Dense symmetric matrix. Both triangles are stored and kept bit-identical.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * m.dim + i] = v;
        }
        m
    }

    /// Builds from a function evaluated on the upper triangle (`i <= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from rows; the input must be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        m.symmetrize(0.0)
    }

    pub fn scalar(v: f64) -> Self {
        Self::diag(&[v])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(other)?;
        Ok(SymMatrix::from_fn(self.dim, |i, j| self.get(i, j) + other.get(i, j)))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(other)?;
        Ok(SymMatrix::from_fn(self.dim, |i, j| self.get(i, j) - other.get(i, j)))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix::from_fn(self.dim, |i, j| s * self.get(i, j))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        SymMatrix::from_fn(self.dim, |i, j| f(self.get(i, j)))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.to_matrix().mul_vec(v)
    }

    /// `x' M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.get(i, j) * x[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// Principal sub-block on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Off-diagonal block `M[rows, cols]`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |a, b| self.get(rows[a], cols[b]))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn determinant(&self) -> f64 {
        self.to_nalgebra().determinant()
    }

    /// Inverse, symmetrized.
    ///
    /// Fails when `|det| <= SINGULAR_TOL * max|m_ij|^dim`.
    pub fn invert(&self) -> Result<SymMatrix> {
        let n = self.dim;
        let m = self.to_nalgebra();
        let det = m.determinant();
        let floor = SINGULAR_TOL * self.max_abs().powi(n as i32);
        if !det.is_finite() || det.abs() <= floor {
            return Err(Error::SingularMatrix { det, floor });
        }
        let inv = m.try_inverse().ok_or(Error::SingularMatrix { det, floor })?;
        Ok(SymMatrix::from_fn(n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)])))
    }

    /// Lower Cholesky factor `L` with `L L' = self`.
    pub fn cholesky_lower(&self) -> Result<Matrix> {
        let n = self.dim;
        match Cholesky::new(self.to_nalgebra()) {
            Some(c) => {
                let l = c.l();
                Ok(Matrix::from_fn(n, n, |i, j| l[(i, j)]))
            }
            None => {
                // Report the first leading minor that fails.
                let mut prev = 1.0;
                for k in 1..=n {
                    let idx: Vec<usize> = (0..k).collect();
                    let det = self.submatrix(&idx).determinant();
                    if !(det > 0.0) || Cholesky::new(self.submatrix(&idx).to_nalgebra()).is_none() {
                        return Err(Error::NotPositiveDefinite {
                            index: k - 1,
                            pivot: det / prev,
                        });
                    }
                    prev = det;
                }
                Err(Error::NotPositiveDefinite {
                    index: n - 1,
                    pivot: f64::NAN,
                })
            }
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_nalgebra())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    /// True iff every eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// `A B A'` for a general `A`, symmetrized.
    pub fn congruence(&self, a: &Matrix) -> Result<SymMatrix> {
        let abat = a.mul(&self.to_matrix())?.mul(&a.transpose())?;
        abat.symmetrize(1e-8)
    }
}

/// Loewner order: `a - b` is positive semidefinite up to `tol`.
pub fn loewner_geq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(a.sub(b)?.is_psd(tol))
}

/// `H J^{-1} H`, the sandwich (Godambe) form.
pub fn sandwich(h: &SymMatrix, j: &SymMatrix) -> Result<SymMatrix> {
    let jinv = j.invert()?;
    jinv.congruence(&h.to_matrix())
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.dim).collect();
        f.debug_list().entries(rows).finish()
    }
}
