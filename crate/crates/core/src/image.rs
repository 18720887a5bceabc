//! Dense image container.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `height × width × channels` grid of intensities, row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Precondition("image dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Precondition(format!("unsupported channel count {channels}")));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image pixels"));
        }
        Ok(Image { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Image { height, width, channels, data: vec![T::zero(); height * width * channels] }
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: T) -> Self {
        Image { height, width, channels, data: vec![value; height * width * channels] }
    }

    /// Single-channel image from `f(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image { height, width, channels: 1, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: T) {
        let i = self.index(row, col, ch);
        self.data[i] = value;
    }

    /// Pixel value with zero extension outside the grid.
    #[inline]
    pub fn get_or_zero(&self, row: isize, col: isize, ch: usize) -> T {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            T::zero()
        } else {
            self.get(row as usize, col as usize, ch)
        }
    }

    pub fn l2_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Image { data: self.data.iter().map(|&v| f(v)).collect(), ..*self }
    }

    /// L2 distance to an image of the same shape.
    pub fn l2_distance(&self, other: &Image<T>) -> T {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt()
    }

    pub fn same_shape(&self, other: &Image<T>) -> bool {
        self.shape() == other.shape()
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}
