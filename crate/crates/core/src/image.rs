//! Planar RGB images and the channel-stacked vectors the solvers work on.
//!
//! Pixels are stored row-major; the three planes are concatenated as
//! `[R; G; B]`, so an image of `N = width * height` pixels maps to a
//! vector of length `3N` without reordering.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Image extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Self {
        Dims { width, height }
    }

    /// Number of pixels `N`.
    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Length of a channel-stacked field, `3N`.
    #[inline]
    pub fn field_len(&self) -> usize {
        3 * self.pixels()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

/// A 3-channel image with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    dims: Dims,
    data: Vec<f64>,
}

impl ImageRgb {
    /// Builds an image from channel-stacked planes.
    pub fn from_planes(dims: Dims, data: Vec<f64>) -> Result<Self> {
        Error::check_len(dims.field_len(), data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                what: "image data".into(),
                detail: format!("non-finite value at index {pos}"),
            });
        }
        Ok(ImageRgb { dims, data })
    }

    /// Constant-color image.
    pub fn filled(dims: Dims, rgb: [f64; 3]) -> Self {
        let n = dims.pixels();
        let mut data = Vec::with_capacity(3 * n);
        for c in rgb {
            data.extend(std::iter::repeat_n(c, n));
        }
        ImageRgb { dims, data }
    }

    /// Builds an image by evaluating `f(row, col)` at each pixel.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let n = dims.pixels();
        let mut data = vec![0.0; 3 * n];
        for row in 0..dims.height {
            for col in 0..dims.width {
                let i = dims.index(row, col);
                let px = f(row, col);
                data[i] = px[0];
                data[n + i] = px[1];
                data[2 * n + i] = px[2];
            }
        }
        ImageRgb { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.dims.pixels();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn pixel(&self, index: usize) -> [f64; 3] {
        let n = self.dims.pixels();
        [self.data[index], self.data[n + index], self.data[2 * n + index]]
    }

    pub fn set_pixel(&mut self, index: usize, rgb: [f64; 3]) {
        let n = self.dims.pixels();
        self.data[index] = rgb[0];
        self.data[n + index] = rgb[1];
        self.data[2 * n + index] = rgb[2];
    }

    /// All values, channel-stacked.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_flat(&self) -> FlatField {
        FlatField(self.data.clone())
    }

    pub fn into_flat(self) -> FlatField {
        FlatField(self.data)
    }

    pub fn from_flat(field: FlatField, width: usize, height: usize) -> Result<Self> {
        let dims = Dims::new(width, height);
        Error::check_len(dims.field_len(), field.len())?;
        Ok(ImageRgb {
            dims,
            data: field.0,
        })
    }

    /// Maps every value to `[0, 1]`.
    pub fn clamp01(&self) -> ImageRgb {
        ImageRgb {
            dims: self.dims,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}

/// Channel-stacked solver vector `[u_R; u_G; u_B]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatField(pub Vec<f64>);

impl FlatField {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if !data.len().is_multiple_of(3) {
            return Err(Error::Dimension {
                expected: data.len() / 3 * 3,
                actual: data.len(),
            });
        }
        Ok(FlatField(data))
    }

    pub fn zeros(len: usize) -> Self {
        FlatField(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FlatField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FlatField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FlatField {
    fn from(v: Vec<f64>) -> Self {
        FlatField(v)
    }
}

/// Free-function form of [`ImageRgb::to_flat`].
pub fn to_flat(img: &ImageRgb) -> FlatField {
    img.to_flat()
}

/// Free-function form of [`ImageRgb::from_flat`].
pub fn from_flat(field: FlatField, width: usize, height: usize) -> Result<ImageRgb> {
    ImageRgb::from_flat(field, width, height)
}

pub fn clamp01(img: &ImageRgb) -> ImageRgb {
    img.clamp01()
}
