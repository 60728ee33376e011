//! Dense 2-D rasters of `f64`, stored row-major (row = y).
//!
//! A [`DenseGrid`] carries images, heatmaps, density maps and gradients alike.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DenseGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height >= 1 && width >= 1, "grid dimensions must be >= 1");
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    /// Builds a grid from row-major values, rejecting wrong lengths, empty
    /// dimensions and non-finite entries.
    pub fn from_vec(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be >= 1, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite grid value at index {i}"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`
    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = self.index(x, y);
        self.values[i] = value;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(self.width) {
            row.reverse();
        }
        out
    }

    /// Copies the `h`x`w` window whose top-left pixel is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x0}+{y0} outside grid {}x{}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            values.extend_from_slice(&self.values[start..start + w]);
        }
        Ok(Self {
            height: h,
            width: w,
            values,
        })
    }

    pub fn ensure_same_shape(&self, other: &DenseGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length_and_finiteness() {
        assert!(DenseGrid::from_vec(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(DenseGrid::from_vec(0, 2, vec![]).is_err());
        assert!(DenseGrid::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        let g = DenseGrid::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.get(1, 0), 2.0);
        assert_eq!(g.get(0, 1), 3.0);
    }

    #[test]
    fn flip_and_crop() {
        let g = DenseGrid::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(g.flip_horizontal().values(), &[3.0, 2.0, 1.0, 6.0, 5.0, 4.0]);
        let c = g.crop(1, 1, 2, 1).unwrap();
        assert_eq!(c.values(), &[5.0, 6.0]);
        assert!(g.crop(2, 0, 2, 1).is_err());
    }
}
