//! Transformation Lie groups acting on normalized image coordinates.
//!
//! Every group is a matrix subgroup of GL(3) acting on homogeneous points `(x, y, 1)`
//! of the square `[-1, 1]²`. Generators are rescaled so that a unit coefficient moves
//! the points of the image grid by one unit of RMS displacement, which keeps algebra
//! coordinates comparable across generators and across groups.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{regularized_lstsq, Mat3};
use crate::scalar::Real;

/// Determinant magnitude below which a transform is considered singular.
pub const SINGULAR_TOL: f64 = 1e-12;

const MAX_SQRT_STEPS: usize = 30;

/// The supported transformation groups, ordered by dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKind {
    Translation,
    Euclidean,
    Similarity,
    Affine,
    Projective,
}

impl GroupKind {
    pub const ALL: [GroupKind; 5] = [
        GroupKind::Translation,
        GroupKind::Euclidean,
        GroupKind::Similarity,
        GroupKind::Affine,
        GroupKind::Projective,
    ];

    /// Dimension of the Lie algebra.
    pub fn dim(self) -> usize {
        match self {
            GroupKind::Translation => 2,
            GroupKind::Euclidean => 3,
            GroupKind::Similarity => 4,
            GroupKind::Affine => 6,
            GroupKind::Projective => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::Translation => "translation",
            GroupKind::Euclidean => "euclidean",
            GroupKind::Similarity => "similarity",
            GroupKind::Affine => "affine",
            GroupKind::Projective => "projective",
        }
    }

    /// Smallest kind containing both.
    pub fn promote(self, other: GroupKind) -> GroupKind {
        self.max(other)
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GroupKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown group kind `{s}`")))
    }
}

/// Names of the generators, in basis order (the first `dim` entries apply).
pub const GENERATOR_NAMES: [&str; 8] = ["tx", "ty", "rotation", "scale", "stretch", "shear", "tilt_x", "tilt_y"];

fn raw_generator<T: Real>(j: usize) -> Mat3<T> {
    match j {
        0 => Mat3::unit(0, 2),
        1 => Mat3::unit(1, 2),
        2 => Mat3::unit(1, 0) - Mat3::unit(0, 1),
        3 => Mat3::unit(0, 0) + Mat3::unit(1, 1),
        4 => Mat3::unit(0, 0) - Mat3::unit(1, 1),
        5 => Mat3::unit(0, 1) + Mat3::unit(1, 0),
        6 => Mat3::unit(2, 0),
        7 => Mat3::unit(2, 1),
        _ => unreachable!("at most 8 generators"),
    }
}

/// Sample points of a `rows × cols` pixel grid, at pixel centers of `[-1, 1]²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoordGrid {
    pub rows: usize,
    pub cols: usize,
}

impl CoordGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Precondition(format!("coordinate grid {rows}x{cols} is smaller than 2x2")));
        }
        Ok(CoordGrid { rows, cols })
    }

    /// Normalized x coordinate of pixel column `c`.
    #[inline]
    pub fn x<T: Real>(&self, c: usize) -> T {
        T::lit((2 * c + 1) as f64 / self.cols as f64 - 1.0)
    }

    /// Normalized y coordinate of pixel row `r`.
    #[inline]
    pub fn y<T: Real>(&self, r: usize) -> T {
        T::lit((2 * r + 1) as f64 / self.rows as f64 - 1.0)
    }

    pub fn points<T: Real>(&self) -> impl Iterator<Item = (T, T)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (self.x(c), self.y(r))))
    }
}

/// Root-mean-square displacement of the grid points under `m`, or `None` if some point
/// is mapped to or beyond the line at infinity.
pub fn rms_displacement<T: Real>(m: &Mat3<T>, grid: &CoordGrid) -> Option<T> {
    let mut acc = T::zero();
    for (x, y) in grid.points::<T>() {
        let [px, py, w] = m.apply_h(x, y);
        if !(w > T::zero()) {
            return None;
        }
        let (dx, dy) = (px / w - x, py / w - y);
        acc += dx * dx + dy * dy;
    }
    Some((acc / T::from_usize_lossy(grid.rows * grid.cols)).sqrt())
}

/// Coefficient `s > 0` with unit RMS displacement of `exp(s·g)` over the grid.
fn unit_displacement_scale(g: &Mat3<f64>, grid: &CoordGrid) -> f64 {
    // `None` (points pushed past infinity) counts as "too far".
    let too_far = |s: f64| rms_displacement(&expm(&g.scale(s)), grid).is_none_or(|d| d >= 1.0);
    let mut lo = 0.0;
    let mut hi = 0.5;
    while !too_far(hi) {
        lo = hi;
        hi *= 2.0;
        assert!(hi < 1e6, "generator never reaches unit displacement");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if too_far(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordered basis of a transformation Lie algebra with per-generator normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet<T> {
    kind: GroupKind,
    generators: Vec<Mat3<T>>,
    scales: Vec<T>,
}

impl<T: Real> GeneratorSet<T> {
    /// Basis for `kind`, normalized on `grid`.
    pub fn new(kind: GroupKind, grid: &CoordGrid) -> Self {
        let generators: Vec<Mat3<T>> = (0..kind.dim()).map(raw_generator).collect();
        let scales = (0..kind.dim())
            .map(|j| T::lit(unit_displacement_scale(&raw_generator::<f64>(j), grid)))
            .collect();
        GeneratorSet { kind, generators, scales }
    }

    /// Basis normalized on the pixel grid of a `height × width` image.
    pub fn for_image(kind: GroupKind, height: usize, width: usize) -> Result<Self> {
        Ok(Self::new(kind, &CoordGrid::new(height, width)?))
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// Unnormalized generator matrices.
    pub fn generators(&self) -> &[Mat3<T>] {
        &self.generators
    }

    pub fn scales(&self) -> &[T] {
        &self.scales
    }

    /// `scales[j] · G_j`.
    pub fn scaled(&self, j: usize) -> Mat3<T> {
        self.generators[j].scale(self.scales[j])
    }

    /// Algebra element `Σ_j v_j · scales_j · G_j`.
    pub fn algebra_matrix(&self, v: &AlgebraVector<T>) -> Result<Mat3<T>> {
        self.check_len(v)?;
        Ok((0..self.dim()).fold(Mat3::zeros(), |acc, j| acc + self.scaled(j).scale(v.0[j])))
    }

    fn check_len(&self, v: &AlgebraVector<T>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }
}

/// Coordinates of a Lie-algebra element on a [`GeneratorSet`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AlgebraVector<T>(pub Vec<T>);

impl<T: Real> AlgebraVector<T> {
    pub fn zeros(dim: usize) -> Self {
        AlgebraVector(vec![T::zero(); dim])
    }

    /// Unit coordinate vector `e_j`.
    pub fn basis(dim: usize, j: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[j] = T::one();
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum()
    }

    pub fn scale(&self, s: T) -> Self {
        AlgebraVector(self.0.iter().map(|&a| a * s).collect())
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        AlgebraVector(self.0.iter().zip(&other.0).map(|(&a, &b)| a + s * b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// An invertible homogeneous transform of normalized image coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform<T> {
    matrix: Mat3<T>,
    kind: GroupKind,
}

impl<T: Real> Transform<T> {
    /// Validates invertibility and the homogeneous normalization for `kind`.
    pub fn new(matrix: Mat3<T>, kind: GroupKind) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::NonFinite("transform matrix"));
        }
        let mut matrix = matrix;
        if kind == GroupKind::Projective {
            let w = matrix[(2, 2)];
            if w.abs() <= T::lit(SINGULAR_TOL) {
                return Err(Error::Singular(w.to_f64_lossy()));
            }
            matrix = matrix.scale(w.recip());
        } else {
            let tol = T::lit(1e-9);
            let bottom = [matrix[(2, 0)], matrix[(2, 1)], matrix[(2, 2)] - T::one()];
            if bottom.iter().any(|v| v.abs() > tol) {
                return Err(Error::Precondition(format!("{kind} transform must have bottom row (0, 0, 1)")));
            }
            matrix[(2, 0)] = T::zero();
            matrix[(2, 1)] = T::zero();
            matrix[(2, 2)] = T::one();
        }
        let det = matrix.det();
        if !(det.abs() > T::lit(SINGULAR_TOL)) {
            return Err(Error::Singular(det.to_f64_lossy()));
        }
        Ok(Transform { matrix, kind })
    }

    pub fn identity(kind: GroupKind) -> Self {
        Transform { matrix: Mat3::identity(), kind }
    }

    pub fn translation(tx: T, ty: T) -> Self {
        let mut m = Mat3::identity();
        m[(0, 2)] = tx;
        m[(1, 2)] = ty;
        Transform { matrix: m, kind: GroupKind::Translation }
    }

    /// Counter-clockwise rotation about the image center (y axis pointing down the rows).
    pub fn rotation(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        let mut m = Mat3::identity();
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        Transform { matrix: m, kind: GroupKind::Euclidean }
    }

    /// Mirror `x ↦ -x`.
    pub fn horizontal_flip() -> Self {
        let mut m = Mat3::identity();
        m[(0, 0)] = -T::one();
        Transform { matrix: m, kind: GroupKind::Affine }
    }

    pub fn matrix(&self) -> &Mat3<T> {
        &self.matrix
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Maps `(x, y)`; `None` when the point goes to or beyond infinity.
    #[inline]
    pub fn apply(&self, x: T, y: T) -> Option<(T, T)> {
        let [px, py, w] = self.matrix.apply_h(x, y);
        if w > T::zero() {
            Some((px / w, py / w))
        } else {
            None
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Transform<T>) -> Transform<T> {
        compose(self, other)
    }

    pub fn inverse(&self) -> Result<Transform<T>> {
        invert(self)
    }

    pub fn cast<U: Real>(&self) -> Transform<U> {
        Transform { matrix: self.matrix.cast(), kind: self.kind }
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    let norm = m.norm1();
    let mut squarings = 0u32;
    let mut a = *m;
    let half = T::lit(0.5);
    if norm > half {
        squarings = (norm / half).log2().ceil().to_u32().unwrap_or(0);
        a = m.scale(T::lit(0.5f64.powi(squarings as i32)));
    }
    let mut result = Mat3::identity();
    let mut term = Mat3::identity();
    for n in 1..=30 {
        term = (term * a).scale(T::from_usize_lossy(n).recip());
        result = result + term;
        if term.norm1() <= T::epsilon() * T::lit(1e-3) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result * result;
    }
    result
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm<T: Real>(a: &Mat3<T>) -> Result<Mat3<T>> {
    let mut y = *a;
    let mut z = Mat3::identity();
    let tol = T::epsilon() * T::lit(16.0);
    let inv_tol = T::lit(1e-300).max(T::min_positive_value());
    let half = T::lit(0.5);
    for _ in 0..100 {
        let y_inv = y
            .try_inverse(inv_tol)
            .ok_or_else(|| Error::NotInImage("square-root iterate became singular".into()))?;
        let z_inv = z
            .try_inverse(inv_tol)
            .ok_or_else(|| Error::NotInImage("square-root iterate became singular".into()))?;
        let y_next = (y + z_inv).scale(half);
        z = (z + y_inv).scale(half);
        let delta = (y_next - y).norm1();
        y = y_next;
        if !y.is_finite() {
            break;
        }
        if delta <= tol * y.norm1() {
            return Ok(y);
        }
    }
    Err(Error::NotInImage("square-root iteration did not converge".into()))
}

/// Series `log(I + X)` for `‖X‖ < 1`.
fn log_near_identity<T: Real>(x: &Mat3<T>) -> Mat3<T> {
    let mut result = Mat3::zeros();
    let mut power = Mat3::identity();
    for n in 1..=400 {
        power = power * *x;
        let term = power.scale(T::from_usize_lossy(n).recip());
        result = if n % 2 == 1 { result + term } else { result - term };
        if term.norm1() <= T::epsilon() * T::lit(1e-3) {
            break;
        }
    }
    result
}

/// Principal matrix logarithm by inverse scaling and squaring.
pub fn logm<T: Real>(a: &Mat3<T>) -> Result<Mat3<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix logarithm input"));
    }
    let det = a.det();
    if !(det.abs() > T::lit(SINGULAR_TOL)) {
        return Err(Error::NotInImage(format!("determinant {:.3e} is numerically zero", det.to_f64_lossy())));
    }
    let mut x = *a;
    let mut roots = 0i32;
    let half = T::lit(0.5);
    while (x - Mat3::identity()).norm1() >= half {
        if roots == MAX_SQRT_STEPS as i32 {
            return Err(Error::NotInImage(format!("no convergence after {MAX_SQRT_STEPS} square roots")));
        }
        x = sqrtm(&x)?;
        roots += 1;
    }
    let log = log_near_identity(&(x - Mat3::identity()));
    Ok(log.scale(T::lit(2f64.powi(roots))))
}

/// `exp(Σ_j v_j · scales_j · G_j)`.
pub fn exp_map<T: Real>(v: &AlgebraVector<T>, basis: &GeneratorSet<T>) -> Result<Transform<T>> {
    if !v.is_finite() {
        return Err(Error::NonFinite("algebra vector"));
    }
    let m = basis.algebra_matrix(v)?;
    Transform::new(expm(&m), basis.kind())
}

/// Coordinates `v` with `exp_map(v, basis) = t` on the principal branch.
pub fn log_map<T: Real>(t: &Transform<T>, basis: &GeneratorSet<T>) -> Result<AlgebraVector<T>> {
    let log = logm(t.matrix())?;
    // Projective matrices are defined up to scale, which shows up as a multiple of I.
    let mut columns: Vec<Vec<T>> = (0..basis.dim()).map(|j| basis.scaled(j).to_vec9().to_vec()).collect();
    if basis.kind() == GroupKind::Projective {
        columns.push(Mat3::<T>::identity().to_vec9().to_vec());
    }
    let target = log.to_vec9();
    let (coef, _) = regularized_lstsq(&columns, &target, T::zero());
    let coef = coef.ok_or_else(|| Error::NotInImage("generator Gram matrix is singular".into()))?;
    let mut fitted = [T::zero(); 9];
    for (col, &c) in columns.iter().zip(&coef) {
        for (f, &g) in fitted.iter_mut().zip(col) {
            *f += c * g;
        }
    }
    let residual = fitted.iter().zip(&target).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
    let tol = T::lit(1e-6).max(T::epsilon() * T::lit(100.0)) * T::one().max(log.frobenius());
    if !(residual <= tol) {
        return Err(Error::ProjectionResidual(residual.to_f64_lossy()));
    }
    Ok(AlgebraVector(coef[..basis.dim()].to_vec()))
}

/// `t1 ∘ t2` (apply `t2` first); the result takes the larger of the two kinds.
pub fn compose<T: Real>(t1: &Transform<T>, t2: &Transform<T>) -> Transform<T> {
    let kind = t1.kind.promote(t2.kind);
    let mut matrix = t1.matrix * t2.matrix;
    if kind == GroupKind::Projective {
        let w = matrix[(2, 2)];
        if w.abs() > T::lit(SINGULAR_TOL) {
            matrix = matrix.scale(w.recip());
        }
    }
    Transform { matrix, kind }
}

pub fn invert<T: Real>(t: &Transform<T>) -> Result<Transform<T>> {
    let inv = t
        .matrix
        .try_inverse(T::lit(SINGULAR_TOL))
        .ok_or_else(|| Error::Singular(t.matrix.det().to_f64_lossy()))?;
    Transform::new(inv, t.kind)
}
