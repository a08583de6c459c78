//! Small dense linear algebra: row-major matrices and a Cholesky factorization
//! with diagonal jitter escalation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Submatrix with the given row and column index lists.
    pub fn select(&self, row_idx: &[usize], col_idx: &[usize]) -> Self {
        Self::from_fn(row_idx.len(), col_idx.len(), |i, j| {
            self[(row_idx[i], col_idx[j])]
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn add_diagonal(&mut self, value: S) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += value;
        }
    }

    pub fn scale_in_place(&mut self, factor: S) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn frobenius_norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<S>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(S::zero(), S::max)
    }

    /// Largest |a_ij - a_ji|.
    pub fn asymmetry(&self) -> S {
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn cholesky(&self) -> Option<Cholesky<S>> {
        Cholesky::factor(self)
    }

    /// Factors a symmetric positive-definite matrix, retrying with
    /// increasing diagonal jitter from `schedule` until one succeeds.
    pub fn cholesky_with_jitter(&self, schedule: &[f64]) -> Result<(Cholesky<S>, S)> {
        if let Some(c) = Cholesky::factor(self) {
            return Ok((c, S::zero()));
        }
        for &eps in schedule {
            let eps = S::lit(eps);
            let mut jittered = self.clone();
            jittered.add_diagonal(eps);
            if let Some(c) = Cholesky::factor(&jittered) {
                return Ok((c, eps));
            }
        }
        Err(Error::Numerical(format!(
            "cholesky of {n}x{n} block failed after jitter {schedule:?} (min diagonal {d:?})",
            n = self.rows,
            d = (0..self.rows)
                .map(|i| self[(i, i)])
                .fold(S::infinity(), S::min),
        )))
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky<S> {
    n: usize,
    lower: Vec<S>,
}

impl<S: Scalar> Cholesky<S> {
    /// Returns `None` when `a` is not numerically positive definite.
    pub fn factor(a: &Matrix<S>) -> Option<Self> {
        if !a.is_square() {
            return None;
        }
        let n = a.rows();
        let mut l = vec![S::zero(); n * n];
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > S::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Self { n, lower: l })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> Matrix<S> {
        Matrix::from_row_major(self.n, self.n, self.lower.clone()).expect("square factor")
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [S]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_in_place(&self, b: &mut [S]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &[S]) -> Vec<S> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix<S>) -> Matrix<S> {
        assert_eq!(b.rows(), self.n, "right-hand side row count");
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut col = vec![S::zero(); self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b[(i, j)];
            }
            self.forward_in_place(&mut col);
            self.backward_in_place(&mut col);
            for i in 0..self.n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// `log det A`.
    pub fn log_det(&self) -> S {
        let two = S::lit(2.0);
        (0..self.n)
            .map(|i| self.lower[i * self.n + i].ln())
            .sum::<S>()
            * two
    }

    /// `b^T A^{-1} b`.
    pub fn quad_form(&self, b: &[S]) -> S {
        let mut y = b.to_vec();
        self.forward_in_place(&mut y);
        y.iter().map(|&v| v * v).sum()
    }
}
