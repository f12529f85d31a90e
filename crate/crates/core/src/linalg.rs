//! Small dense matrices over a [`Real`] scalar.
//!
//! Rating scales have h ≤ ~25 states and the block-augmented exponentials go
//! up to 4h, so everything here is plain row-major storage with direct
//! O(n³) kernels: multiply, LU solve with partial pivoting, and Cholesky.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, PartialEq)]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds from nested rows, converting through f64.
    pub fn from_rows_f64(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::Invalid("matrix needs at least one row".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Invalid("ragged matrix rows".into()));
        }
        Ok(Mat::from_fn(r, c, |i, j| F::of(rows[i][j])))
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

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.as_f64()).collect())
            .collect()
    }

    pub fn row_sum(&self, i: usize) -> F {
        self.row(i).iter().copied().sum()
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> F {
        let mut best = F::zero();
        for j in 0..self.cols {
            let mut s = F::zero();
            for i in 0..self.rows {
                s += self[(i, j)].abs();
            }
            best = best.max(s);
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&mut self, c: F) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    pub fn scaled(&self, c: F) -> Self {
        let mut m = self.clone();
        m.scale(c);
        m
    }

    /// self += c * other
    pub fn add_scaled(&mut self, other: &Self, c: F) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += c * y;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Mat::zeros(n, m);
        for i in 0..n {
            for p in 0..k {
                let a = self[(i, p)];
                if a == F::zero() {
                    continue;
                }
                let orow = other.row(p);
                let trow = &mut out.data[i * m..(i + 1) * m];
                for (t, &b) in trow.iter_mut().zip(orow) {
                    *t += a * b;
                }
            }
        }
        out
    }

    /// Copies `block` into self with its (0,0) at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        Mat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Solves self * X = rhs by LU with partial pivoting; self is consumed by copy.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        assert!(self.is_square(), "solve needs a square matrix");
        assert_eq!(self.rows, rhs.rows, "dimension mismatch in solve");
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut x = rhs.clone();
        for k in 0..n {
            // pivot
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in (k + 1)..n {
                let v = a[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == F::zero() || !best.is_finite() {
                return Err(Error::Numerical(format!(
                    "singular matrix in LU solve (pivot {k})"
                )));
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                for j in 0..m {
                    x.data.swap(k * m + j, piv * m + j);
                }
            }
            for i in (k + 1)..n {
                let factor = a[(i, k)] / a[(k, k)];
                if factor == F::zero() {
                    continue;
                }
                a[(i, k)] = F::zero();
                for j in (k + 1)..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= factor * akj;
                }
                for j in 0..m {
                    let xkj = x[(k, j)];
                    x[(i, j)] -= factor * xkj;
                }
            }
        }
        // back substitution; divide rather than multiply by a reciprocal so
        // structurally exact rows (e.g. an absorbing state) stay exact
        for k in (0..n).rev() {
            for j in 0..m {
                let mut s = x[(k, j)];
                for p in (k + 1)..n {
                    s -= a[(k, p)] * x[(p, j)];
                }
                x[(k, j)] = s / a[(k, k)];
            }
        }
        Ok(x)
    }

    /// Lower Cholesky factor of a symmetric positive-definite matrix.
    /// On failure returns the 0-based pivot index that was not positive.
    pub fn cholesky(&self) -> std::result::Result<Self, usize> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(s > F::zero()) || !s.is_finite() {
                        return Err(i);
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive-definite matrix through its Cholesky
    /// factor. Failure reports the offending pivot index.
    pub fn spd_inverse(&self) -> std::result::Result<Self, usize> {
        let l = self.cholesky()?;
        let n = self.rows;
        // Solve L y = e_j, then L^T x = y, one column at a time.
        let mut inv = Mat::zeros(n, n);
        let mut y = vec![F::zero(); n];
        for j in 0..n {
            for i in 0..n {
                let mut s = if i == j { F::one() } else { F::zero() };
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= l[(k, i)] * inv[(k, j)];
                }
                inv[(i, j)] = s / l[(i, i)];
            }
        }
        Ok(inv)
    }
}

impl<F: Real> Index<(usize, usize)> for Mat<F> {
    type Output = F;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<F: Real> IndexMut<(usize, usize)> for Mat<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<F: std::fmt::Debug> std::fmt::Debug for Mat<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6?} ", self.data[i * self.cols + j])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn matmul_identity() {
        let a: Mat<f64> = Mat::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let id = Mat::identity(3);
        assert_eq!(a.matmul(&id), a);
        assert_eq!(id.matmul(&a), a);
    }

    #[test]
    fn solve_recovers_rhs() {
        let a: Mat<f64> =
            Mat::from_rows_f64(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]])
                .unwrap();
        let x_true: Mat<f64> = Mat::from_rows_f64(&[vec![1.0], vec![-2.0], vec![0.5]]).unwrap();
        let rhs = a.matmul(&x_true);
        let x = a.solve(&rhs).unwrap();
        for i in 0..3 {
            approx(x[(i, 0)], x_true[(i, 0)], 1e-12);
        }
    }

    #[test]
    fn solve_singular_fails() {
        let a: Mat<f64> = Mat::from_rows_f64(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(a.solve(&Mat::identity(2)).is_err());
    }

    #[test]
    fn cholesky_and_spd_inverse() {
        let a: Mat<f64> =
            Mat::from_rows_f64(&[vec![4.0, 1.0, 0.2], vec![1.0, 3.0, 0.1], vec![0.2, 0.1, 2.0]])
                .unwrap();
        let l = a.cholesky().unwrap();
        let llt = l.matmul(&l.transpose());
        for i in 0..3 {
            for j in 0..3 {
                approx(llt[(i, j)], a[(i, j)], 1e-12);
            }
        }
        let inv = a.spd_inverse().unwrap();
        let prod = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                approx(prod[(i, j)], if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a: Mat<f64> = Mat::from_rows_f64(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a.cholesky().unwrap_err(), 1);
    }

    #[test]
    fn works_in_f32() {
        let a: Mat<f32> = Mat::from_rows_f64(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let inv = a.spd_inverse().unwrap();
        let prod = a.matmul(&inv);
        assert!((prod[(0, 0)] - 1.0).abs() < 1e-5);
        assert!(prod[(0, 1)].abs() < 1e-5);
    }
}
