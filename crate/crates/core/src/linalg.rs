//! Small dense linear algebra: 3×3 homogeneous matrices and symmetric solves.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::scalar::Real;

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn zeros() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = T::one();
        }
        m
    }

    /// Matrix with a single unit entry at `(r, c)`.
    pub fn unit(r: usize, c: usize) -> Self {
        let mut m = Self::zeros();
        m.0[r][c] = T::one();
        m
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.0[r][c] = T::lit(v);
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = self.0[c][r];
            }
        }
        m
    }

    pub fn det(&self) -> T {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Inverse by adjugate; `None` when `|det| <= tol`.
    pub fn try_inverse(&self, tol: T) -> Option<Self> {
        let det = self.det();
        if !(det.abs() > tol) {
            return None;
        }
        let a = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let inv_det = T::one() / det;
        let mut m = Mat3(adj);
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv_det;
            }
        }
        Some(m)
    }

    pub fn frobenius(&self) -> T {
        self.0.iter().flatten().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm1(&self) -> T {
        (0..3)
            .map(|c| (0..3).map(|r| self.0[r][c].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Flattened row-major entries.
    pub fn to_vec9(&self) -> [T; 9] {
        let mut out = [T::zero(); 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = self.0[r][c];
            }
        }
        out
    }

    /// Apply to the homogeneous point `(x, y, 1)`.
    #[inline]
    pub fn apply_h(&self, x: T, y: T) -> [T; 3] {
        let a = &self.0;
        [
            a[0][0] * x + a[0][1] * y + a[0][2],
            a[1][0] * x + a[1][1] * y + a[1][2],
            a[2][0] * x + a[2][1] * y + a[2][2],
        ]
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut m = Mat3::<U>::zeros();
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = U::lit(self.0[r][c].to_f64_lossy());
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.0[r][c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.0[r][c]
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Mat3<T>;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = self.0[r][0] * rhs.0[0][c] + self.0[r][1] * rhs.0[1][c] + self.0[r][2] * rhs.0[2][c];
            }
        }
        m
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Mat3<T>;
    fn add(self, rhs: Self) -> Self {
        let mut m = self;
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] += rhs.0[r][c];
            }
        }
        m
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Mat3<T>;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Real> Neg for Mat3<T> {
    type Output = Mat3<T>;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

/// Solve `A x = b` for symmetric positive definite `A` (row-major `n×n`) by Cholesky.
///
/// Returns `None` if a pivot is not strictly positive.
pub fn cholesky_solve<T: Real>(a: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Least squares `min ‖A x − b‖` for column-major columns of equal length, through the
/// normal equations with a relative Tikhonov term `eps_rel · trace(AᵀA) / n`.
///
/// Returns the solution and the Gram matrix trace.
pub fn regularized_lstsq<T: Real>(columns: &[Vec<T>], b: &[T], eps_rel: T) -> (Option<Vec<T>>, T) {
    let n = columns.len();
    let mut gram = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let v: T = columns[i].iter().zip(&columns[j]).map(|(&p, &q)| p * q).sum();
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let trace: T = (0..n).map(|i| gram[i * n + i]).sum();
    let eps = eps_rel * trace / T::from_usize_lossy(n.max(1));
    for i in 0..n {
        gram[i * n + i] += eps;
    }
    let rhs: Vec<T> = columns
        .iter()
        .map(|col| col.iter().zip(b).map(|(&p, &q)| p * q).sum())
        .collect();
    (cholesky_solve(&gram, &rhs, n), trace)
}
