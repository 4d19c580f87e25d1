//! Small dense matrices over real or complex scalars.

use std::fmt::Debug;
use std::ops::{Index, IndexMut, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

/// Field of values used by the symmetric-function and linear-algebra kernels.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Default
    + num_complex::ComplexFloat<Real = f64>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + Neg<Output = Self>
    + From<f64>
    + Into<C64>
{
    fn modulus(self) -> f64 {
        self.abs()
    }

    fn real(x: f64) -> Self {
        <Self as From<f64>>::from(x)
    }
}

impl Scalar for f64 {}
impl Scalar for C64 {}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type CMatrix = Matrix<C64>;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::real(0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
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

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn to_complex(&self) -> CMatrix {
        self.map(Into::into)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.modulus()))
    }

    /// Largest |M + Mᵀ| entry relative to the largest entry.
    pub fn skew_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..=i.min(self.cols.saturating_sub(1)) {
                d = d.max((self[(i, j)] + self[(j, i)]).modulus());
            }
        }
        d / scale
    }

    /// Principal submatrix on the given (possibly repeated) indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    /// Swap rows i, j and columns i, j.
    pub fn swap_sym(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for k in 0..self.cols {
            self.data.swap(i * self.cols + k, j * self.cols + k);
        }
        for k in 0..self.rows {
            self.data.swap(k * self.cols + i, k * self.cols + j);
        }
    }

    /// Determinant by LU with partial pivoting. Empty matrix has determinant 1.
    pub fn det(&self) -> T {
        assert!(self.is_square(), "determinant of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::real(1.0);
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].modulus();
            for i in k + 1..n {
                let v = a[(i, k)].modulus();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return T::real(0.0);
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                det = -det;
            }
            let p = a[(k, k)];
            det *= p;
            for i in k + 1..n {
                let f = a[(i, k)] / p;
                if f == T::real(0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        det
    }

    /// Solve `self · x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        assert!(self.is_square() && b.len() == self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[(i, k)].modulus().total_cmp(&a[(j, k)].modulus()))?;
            if a[(piv, k)].modulus() == 0.0 {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                x.swap(k, piv);
            }
            let p = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / p;
                for j in k..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
                let xk = x[k];
                x[i] -= f * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= a[(k, j)] * x[j];
            }
            x[k] = s / a[(k, k)];
        }
        Some(x)
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

/// Neumaier-compensated complex sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier((sum, comp): (f64, f64), x: f64) -> (f64, f64) {
    let t = sum + x;
    let c = if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
    (t, comp + c)
}

impl CompensatedSum {
    pub fn add(&mut self, z: C64) {
        self.re = neumaier(self.re, z.re);
        self.im = neumaier(self.im, z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

impl std::iter::Sum<C64> for CompensatedSum {
    fn sum<I: Iterator<Item = C64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.for_each(|z| s.add(z));
        s
    }
}

/// Least-squares polynomial fit of degree `deg` through complex samples.
/// Returns ascending coefficients.
pub fn polyfit(x: &[C64], y: &[C64], deg: usize) -> Option<Vec<C64>> {
    let n = deg + 1;
    if x.len() < n {
        return None;
    }
    // normal equations with columns scaled to unit max to tame the Vandermonde
    let scale: Vec<f64> = (0..n)
        .map(|k| x.iter().map(|xi| xi.norm().powi(k as i32)).fold(0.0, f64::max).max(1e-300))
        .collect();
    let v = |i: usize, k: usize| x[i].powi(k as i32) / scale[k];
    let gram = CMatrix::from_fn(n, n, |a, b| (0..x.len()).map(|i| v(i, a).conj() * v(i, b)).sum());
    let rhs: Vec<C64> = (0..n).map(|a| (0..x.len()).map(|i| v(i, a).conj() * y[i]).sum()).collect();
    let c = gram.solve(&rhs)?;
    Some(c.iter().zip(&scale).map(|(ci, s)| ci / s).collect())
}

pub fn polyval(coeffs: &[C64], x: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
}
