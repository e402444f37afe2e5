//! Small dense linear algebra: row-major matrices, LU with partial
//! pivoting, triangular solves and a 1-norm condition estimate.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, vector has length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                let row = self.row(i);
                row.iter().zip(v).map(|(&a, &b)| a * b).sum()
            })
            .collect())
    }

    /// `v^T A v` for square `A`.
    pub fn quadratic_form(&self, v: &[T]) -> Result<T> {
        let av = self.mul_vec(v)?;
        Ok(v.iter().zip(&av).map(|(&a, &b)| a * b).sum())
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> T {
        let mut best = T::zero();
        for j in 0..self.cols {
            let mut s = T::zero();
            for i in 0..self.rows {
                s += self[(i, j)].abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    /// Maximum absolute row sum.
    pub fn max_row_norm(&self) -> T {
        let mut best = T::zero();
        for i in 0..self.rows {
            let s: T = self.row(i).iter().map(|x| x.abs()).sum();
            if s > best {
                best = s;
            }
        }
        best
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactorization<T> {
    lu: Matrix<T>,
    pivots: Vec<usize>,
    sign: T,
    one_norm: T,
}

/// Factors a square matrix, `P A = L U`.
///
/// A pivot smaller than `1e-12` times the largest row norm of the input is
/// treated as singular; the error carries the offending pivot index.
pub fn lu_factor<T: Scalar>(a: &Matrix<T>) -> Result<LuFactorization<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot factor a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let one_norm = a.one_norm();
    let threshold = real::<T>(1e-12) * a.max_row_norm();
    let mut lu = a.clone();
    let mut pivots = Vec::with_capacity(n);
    let mut sign = T::one();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let cand = lu[(i, k)].abs();
            if cand > best {
                best = cand;
                p = i;
            }
        }
        if best <= threshold || !best.is_finite() {
            return Err(Error::SingularMatrix { pivot: k });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            sign = -sign;
        }
        pivots.push(p);
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in k + 1..n {
                let sub = factor * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
        }
    }
    Ok(LuFactorization {
        lu,
        pivots,
        sign,
        one_norm,
    })
}

impl<T: Scalar> LuFactorization<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Sign of the determinant (`+1` or `-1`).
    pub fn det_sign(&self) -> T {
        let mut sign = self.sign;
        for k in 0..self.dim() {
            if self.lu[(k, k)] < T::zero() {
                sign = -sign;
            }
        }
        sign
    }

    /// `ln |det A|`.
    pub fn log_abs_det(&self) -> T {
        (0..self.dim()).map(|k| self.lu[(k, k)].abs().ln()).sum()
    }

    pub fn det(&self) -> T {
        self.det_sign() * self.log_abs_det().exp()
    }

    /// Solves `A y = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "factorization is {}x{}, rhs has length {}",
                n,
                n,
                b.len()
            )));
        }
        let mut y = b.to_vec();
        for (k, &p) in self.pivots.iter().enumerate() {
            y.swap(k, p);
        }
        // forward substitution, unit lower triangle
        for i in 1..n {
            for j in 0..i {
                let sub = self.lu[(i, j)] * y[j];
                y[i] -= sub;
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for j in i + 1..n {
                let sub = self.lu[(i, j)] * y[j];
                y[i] -= sub;
            }
            y[i] /= self.lu[(i, i)];
        }
        Ok(y)
    }

    /// 1-norm condition number `||A||_1 ||A^-1||_1`, computed by solving for
    /// every unit vector. Returns `+inf` if the inverse overflows.
    pub fn condition_estimate(&self) -> T {
        let n = self.dim();
        let mut inv_norm = T::zero();
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = match self.solve(&e) {
                Ok(c) => c,
                Err(_) => return T::infinity(),
            };
            e[j] = T::zero();
            let s: T = col.iter().map(|x| x.abs()).sum();
            if s > inv_norm {
                inv_norm = s;
            }
        }
        let cond = self.one_norm * inv_norm;
        if cond.is_finite() {
            cond
        } else {
            T::infinity()
        }
    }
}
