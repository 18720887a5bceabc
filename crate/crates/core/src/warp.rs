//! Inverse-mapped bilinear warping and the appearance Jacobian.
//!
//! Output pixel `p` of `warp_image(img, t)` samples the zero-extended bilinear
//! interpolant of `img` at `t⁻¹ p`. The appearance Jacobian differentiates this map
//! with respect to a left perturbation `exp(ε G_j) ∘ t`, analytically.

use crate::error::{Error, Result};
use crate::group::{invert, CoordGrid, GeneratorSet, Transform};
use crate::image::Image;
use crate::linalg::Mat3;
use crate::scalar::Real;

/// Distance to the nearest pixel center below which a sample is snapped onto it.
fn snap_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(16.0))
}

#[inline]
fn split<T: Real>(u: T) -> (isize, T) {
    let r = u.round();
    if (u - r).abs() <= snap_tol::<T>() {
        return (r.to_isize().unwrap_or(isize::MIN / 2), T::zero());
    }
    let f = u.floor();
    (f.to_isize().unwrap_or(isize::MIN / 2), u - f)
}

/// Continuous pixel coordinates `(col, row)` of a normalized point.
#[inline]
fn to_pixel<T: Real>(x: T, y: T, height: usize, width: usize) -> (T, T) {
    let half = T::lit(0.5);
    (
        (x + T::one()) * T::from_usize_lossy(width) * half - half,
        (y + T::one()) * T::from_usize_lossy(height) * half - half,
    )
}

/// Zero-extended bilinear sample at continuous pixel coordinates.
#[inline]
fn sample<T: Real>(img: &Image<T>, col: T, row: T, ch: usize) -> T {
    let (c0, fx) = split(col);
    let (r0, fy) = split(row);
    let p00 = img.get_or_zero(r0, c0, ch);
    if fx == T::zero() && fy == T::zero() {
        return p00;
    }
    let p01 = img.get_or_zero(r0, c0 + 1, ch);
    let p10 = img.get_or_zero(r0 + 1, c0, ch);
    let p11 = img.get_or_zero(r0 + 1, c0 + 1, ch);
    let top = p00 + (p01 - p00) * fx;
    let bottom = p10 + (p11 - p10) * fx;
    top + (bottom - top) * fy
}

/// Value of the interpolant on column line `c` at fractional row `(r0, fy)`.
#[inline]
fn column_value<T: Real>(img: &Image<T>, c: isize, r0: isize, fy: T, ch: usize) -> T {
    let a = img.get_or_zero(r0, c, ch);
    if fy == T::zero() {
        return a;
    }
    a + (img.get_or_zero(r0 + 1, c, ch) - a) * fy
}

#[inline]
fn row_value<T: Real>(img: &Image<T>, r: isize, c0: isize, fx: T, ch: usize) -> T {
    let a = img.get_or_zero(r, c0, ch);
    if fx == T::zero() {
        return a;
    }
    a + (img.get_or_zero(r, c0 + 1, ch) - a) * fx
}

/// Symmetric derivative of the interpolant in pixel units: `(∂/∂col, ∂/∂row)`.
///
/// Inside a cell this is the bilinear derivative; on a cell line it is the average of
/// the two one-sided derivatives.
#[inline]
fn sample_gradient<T: Real>(img: &Image<T>, col: T, row: T, ch: usize) -> (T, T) {
    let (c0, fx) = split(col);
    let (r0, fy) = split(row);
    let half = T::lit(0.5);
    let d_col = if fx == T::zero() {
        (column_value(img, c0 + 1, r0, fy, ch) - column_value(img, c0 - 1, r0, fy, ch)) * half
    } else {
        column_value(img, c0 + 1, r0, fy, ch) - column_value(img, c0, r0, fy, ch)
    };
    let d_row = if fy == T::zero() {
        (row_value(img, r0 + 1, c0, fx, ch) - row_value(img, r0 - 1, c0, fx, ch)) * half
    } else {
        row_value(img, r0 + 1, c0, fx, ch) - row_value(img, r0, c0, fx, ch)
    };
    (d_col, d_row)
}

fn is_identity<T: Real>(t: &Transform<T>) -> bool {
    *t.matrix() == Mat3::identity()
}

/// Resample `img` under `t` (inverse mapping, bilinear, zero padding).
pub fn warp_image<T: Real>(img: &Image<T>, t: &Transform<T>) -> Result<Image<T>> {
    if is_identity(t) {
        return Ok(img.clone());
    }
    let inv = invert(t)?;
    let (h, w, channels) = img.shape();
    let grid = CoordGrid { rows: h, cols: w };
    let mut out = Image::zeros(h, w, channels);
    for r in 0..h {
        let y = grid.y::<T>(r);
        for c in 0..w {
            let Some((qx, qy)) = inv.apply(grid.x(c), y) else { continue };
            let (u, v) = to_pixel(qx, qy, h, w);
            for ch in 0..channels {
                out.set(r, c, ch, sample(img, u, v, ch));
            }
        }
    }
    Ok(out)
}

/// Partial derivatives of an image in normalized-coordinate units.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField<T> {
    /// `∂/∂x`, image-shaped.
    pub dx: Vec<T>,
    /// `∂/∂y`, image-shaped.
    pub dy: Vec<T>,
}

/// Central differences inside, one-sided differences on the border.
pub fn spatial_gradient<T: Real>(img: &Image<T>) -> Result<GradientField<T>> {
    let (h, w, channels) = img.shape();
    if h < 3 || w < 3 {
        return Err(Error::Precondition(format!("gradient needs at least 3x3 pixels, got {h}x{w}")));
    }
    let sx = T::from_usize_lossy(w) * T::lit(0.5);
    let sy = T::from_usize_lossy(h) * T::lit(0.5);
    let half = T::lit(0.5);
    let mut dx = vec![T::zero(); img.len()];
    let mut dy = vec![T::zero(); img.len()];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..channels {
                let gx = if c == 0 {
                    img.get(r, 1, ch) - img.get(r, 0, ch)
                } else if c == w - 1 {
                    img.get(r, c, ch) - img.get(r, c - 1, ch)
                } else {
                    (img.get(r, c + 1, ch) - img.get(r, c - 1, ch)) * half
                };
                let gy = if r == 0 {
                    img.get(1, c, ch) - img.get(0, c, ch)
                } else if r == h - 1 {
                    img.get(r, c, ch) - img.get(r - 1, c, ch)
                } else {
                    (img.get(r + 1, c, ch) - img.get(r - 1, c, ch)) * half
                };
                let i = img.index(r, c, ch);
                dx[i] = gx * sx;
                dy[i] = gy * sy;
            }
        }
    }
    Ok(GradientField { dx, dy })
}

/// `(H·W·C) × d` derivative of the warped image with respect to algebra coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AppearanceJacobian<T> {
    /// One image-shaped column per generator.
    pub columns: Vec<Vec<T>>,
}

impl<T: Real> AppearanceJacobian<T> {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.columns[col][row]
    }

    pub fn is_finite(&self) -> bool {
        self.columns.iter().flatten().all(|v| v.is_finite())
    }
}

/// Velocity of point `p` under the left perturbation `exp(-ε G)` at `ε = 0`.
#[inline]
fn velocity<T: Real>(g: &Mat3<T>, x: T, y: T) -> (T, T) {
    let [gx, gy, gz] = g.apply_h(x, y);
    (x * gz - gx, y * gz - gy)
}

/// Warped image together with its appearance Jacobian at `t`.
pub fn warp_with_jacobian<T: Real>(
    img: &Image<T>,
    t: &Transform<T>,
    basis: &GeneratorSet<T>,
) -> Result<(Image<T>, AppearanceJacobian<T>)> {
    let (h, w, channels) = img.shape();
    if h < 8 || w < 8 {
        return Err(Error::Precondition(format!("Jacobian needs at least 8x8 pixels, got {h}x{w}")));
    }
    let inv = invert(t)?;
    let inv_m = *inv.matrix();
    let grid = CoordGrid { rows: h, cols: w };
    let generators: Vec<Mat3<T>> = (0..basis.dim()).map(|j| basis.scaled(j)).collect();
    let mut warped = Image::zeros(h, w, channels);
    let mut columns = vec![vec![T::zero(); img.len()]; basis.dim()];
    let sx = T::from_usize_lossy(w) * T::lit(0.5);
    let sy = T::from_usize_lossy(h) * T::lit(0.5);
    let mut velocities = vec![(T::zero(), T::zero()); generators.len()];
    for r in 0..h {
        let y = grid.y::<T>(r);
        for c in 0..w {
            let x = grid.x::<T>(c);
            let [hx, hy, hz] = inv_m.apply_h(x, y);
            if !(hz > T::zero()) {
                continue;
            }
            let (qx, qy) = (hx / hz, hy / hz);
            // ∂q/∂p for q = dehom(T⁻¹ p).
            let dq = [
                [(inv_m[(0, 0)] - qx * inv_m[(2, 0)]) / hz, (inv_m[(0, 1)] - qx * inv_m[(2, 1)]) / hz],
                [(inv_m[(1, 0)] - qy * inv_m[(2, 0)]) / hz, (inv_m[(1, 1)] - qy * inv_m[(2, 1)]) / hz],
            ];
            for (vel, g) in velocities.iter_mut().zip(&generators) {
                *vel = velocity(g, x, y);
            }
            let (u, v) = to_pixel(qx, qy, h, w);
            for ch in 0..channels {
                let i = warped.index(r, c, ch);
                warped.data_mut()[i] = sample(img, u, v, ch);
                let (gu, gv) = sample_gradient(img, u, v, ch);
                let (gqx, gqy) = (gu * sx, gv * sy);
                let gpx = gqx * dq[0][0] + gqy * dq[1][0];
                let gpy = gqx * dq[0][1] + gqy * dq[1][1];
                for (col, &(vx, vy)) in columns.iter_mut().zip(&velocities) {
                    col[i] = gpx * vx + gpy * vy;
                }
            }
        }
    }
    Ok((warped, AppearanceJacobian { columns }))
}

/// Appearance Jacobian `J_x` of `warp_image(img, ·)` at `t`.
pub fn appearance_jacobian<T: Real>(
    img: &Image<T>,
    t: &Transform<T>,
    basis: &GeneratorSet<T>,
) -> Result<AppearanceJacobian<T>> {
    warp_with_jacobian(img, t, basis).map(|(_, j)| j)
}
