//! Small dense row-major matrices over any [`Scalar`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::ops::{Index, IndexMut};

/// Solves refuse systems whose 1-norm condition estimate exceeds this.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::dims("Matrix::new", format!("{rows}x{cols} with {} entries", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_diag(diag: &[T]) -> Self {
        Self::from_fn(diag.len(), diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    /// Build from `f64` rows; panics on ragged input (test and literal use).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| T::lit(rows[i][j]))
    }

    pub fn column(v: &[T]) -> Self {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn values(&self) -> Matrix<f64> {
        self.map(|x| x.value())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != b.rows {
            return Err(Error::dims("matmul", format!("{}x{} · {}x{}", self.rows, self.cols, b.rows, b.cols)));
        }
        let mut out = Matrix::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                // no zero skipping: a tracked zero still carries a derivative
                let a = self[(i, k)];
                for j in 0..b.cols {
                    out.data[i * b.cols + j] = out.data[i * b.cols + j] + a * b[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(Error::dims("mul_vec", format!("{}x{} · {}", self.rows, self.cols, v.len())));
        }
        Ok((0..self.rows).map(|i| crate::scalar::dot(self.row(i), v)).collect())
    }

    fn zip_with(&self, b: &Matrix<T>, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != b.rows || self.cols != b.cols {
            return Err(Error::dims(op, format!("{}x{} vs {}x{}", self.rows, self.cols, b.rows, b.cols)));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn add(&self, b: &Matrix<T>) -> Result<Self> {
        self.zip_with(b, "add", |x, y| x + y)
    }

    pub fn sub(&self, b: &Matrix<T>) -> Result<Self> {
        self.zip_with(b, "sub", |x, y| x - y)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.value().abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].value().abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.value().abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.value().is_finite())
    }

    /// Kronecker product; block `(i, j)` is `a[i][j] · b`.
    pub fn kron(&self, b: &Matrix<T>) -> Self {
        let (p, q) = (b.rows, b.cols);
        Self::from_fn(self.rows * p, self.cols * q, |r, c| self[(r / p, c / q)] * b[(r % p, c % q)])
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    /// Inverse of [`Matrix::vec`].
    pub fn unvec(v: &[T], rows: usize, cols: usize) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::dims("unvec", format!("{} entries into {rows}x{cols}", v.len())));
        }
        Ok(Self::from_fn(rows, cols, |i, j| v[j * rows + i]))
    }

    pub fn pow(&self, n: usize) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::dims("pow", "matrix must be square"));
        }
        let mut out = Matrix::identity(self.rows);
        for _ in 0..n {
            out = out.matmul(self)?;
        }
        Ok(out)
    }

    /// Solve `self · X = b` with the default condition bound.
    pub fn solve(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        self.solve_with_bound(b, DEFAULT_MAX_CONDITION)
    }

    /// LU with partial pivoting. Fails when the 1-norm condition estimate
    /// exceeds `max_condition`.
    pub fn solve_with_bound(&self, b: &Matrix<T>, max_condition: f64) -> Result<Matrix<T>> {
        if !self.is_square() || self.rows != b.rows {
            return Err(Error::dims("solve", format!("{}x{} \\ {}x{}", self.rows, self.cols, b.rows, b.cols)));
        }
        let lu = Lu::factor(self)?;
        let condition = lu.condition_estimate(self.one_norm());
        if !(condition <= max_condition) {
            return Err(Error::Singular { condition });
        }
        Ok(lu.solve(b))
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        self.solve(&Matrix::identity(self.rows))
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Matrix<T>> {
        if !self.is_square() {
            return Err(Error::dims("cholesky", "matrix must be square"));
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d.value() > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Solve `L x = b` for lower-triangular `L`.
    pub fn forward_substitute(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self[(i, k)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }
}

impl Matrix<f64> {
    /// Eigenvalues as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        assert!(self.is_square(), "eigenvalues of a non-square matrix");
        let m = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        m.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max)
    }

    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues().iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

struct Lu<T> {
    n: usize,
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| lu[(i, k)].value().abs().total_cmp(&lu[(j, k)].value().abs())).unwrap_or(k);
            if lu[(p, k)].value() == 0.0 || !lu[(p, k)].value().is_finite() {
                return Err(Error::Singular { condition: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.n;
        let mut x = Matrix::zeros(n, b.cols);
        for c in 0..b.cols {
            let mut y: Vec<T> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] = y[i] - self.lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    y[i] = y[i] - self.lu[(i, k)] * y[k];
                }
                y[i] = y[i] / self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        x
    }

    /// `‖A‖₁ ‖A⁻¹‖₁`, with the inverse formed from the factorization in `f64`.
    fn condition_estimate(&self, a_norm: f64) -> f64 {
        let values = Lu { n: self.n, lu: self.lu.values(), perm: self.perm.clone() };
        let inv = values.solve(&Matrix::identity(self.n));
        a_norm * inv.one_norm()
    }
}
