//! Lattice-aligned depth and normal grids with validity masks.

use nalgebra::Vector3;

use crate::error::{GeoError, Result};

/// Tolerance on `|n| - 1` accepted for a valid normal.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// A lattice position: `u` is the column, `v` the row, both zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub u: usize,
    pub v: usize,
}

impl Pixel {
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }

    #[inline]
    pub(crate) fn index(self, width: usize) -> usize {
        self.v * width + self.u
    }
}

/// Row-major `width × height` depth grid, in meters.
///
/// Every valid pixel carries a finite, strictly positive depth. Invalid
/// pixels store `0.0` and are ignored by every computation.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    z: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map from values and an explicit mask.
    ///
    /// Fails if a pixel marked valid holds a non-positive or non-finite depth.
    pub fn new(width: usize, height: usize, z: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GeoError::EmptyMap);
        }
        let n = width * height;
        if z.len() != n || valid.len() != n {
            return Err(GeoError::InvalidInput(format!(
                "depth map {width}x{height} needs {n} values and mask entries, got {} and {}",
                z.len(),
                valid.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| valid[i] && !(z[i].is_finite() && z[i] > 0.0)) {
            return Err(GeoError::InvalidInput(format!(
                "valid depth at index {i} is {}, expected finite and > 0",
                z[i]
            )));
        }
        let z = z
            .into_iter()
            .zip(&valid)
            .map(|(d, &ok)| if ok { d } else { 0.0 })
            .collect();
        Ok(Self {
            width,
            height,
            z,
            valid,
        })
    }

    /// Builds a map whose mask marks every finite, positive value valid.
    pub fn from_values(width: usize, height: usize, z: Vec<f64>) -> Result<Self> {
        let valid = z.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Self::new(width, height, z, valid)
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::from_values(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    #[inline]
    pub fn is_valid(&self, px: Pixel) -> bool {
        self.valid[px.index(self.width)]
    }

    /// Depth at `px`, or `None` when the pixel is invalid.
    #[inline]
    pub fn get(&self, px: Pixel) -> Option<f64> {
        let i = px.index(self.width);
        self.valid[i].then(|| self.z[i])
    }

    /// Multiplies every valid depth by `s` (`s > 0`).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(GeoError::InvalidInput(format!("scale must be > 0, got {s}")));
        }
        let z = self.z.iter().map(|d| d * s).collect();
        Self::new(self.width, self.height, z, self.valid.clone())
    }

    /// Returns a copy with the same mask and new values on valid pixels.
    pub(crate) fn with_values(&self, z: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, z, self.valid.clone())
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        (0..self.len()).map(move |i| Pixel::new(i % w, i / w))
    }
}

/// Row-major `width × height` grid of unit surface normals.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    n: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl NormalMap {
    /// Builds a map from unit vectors and an explicit mask.
    ///
    /// Fails if a valid entry is not unit length within [`UNIT_TOLERANCE`].
    pub fn new(
        width: usize,
        height: usize,
        n: Vec<Vector3<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GeoError::EmptyMap);
        }
        let len = width * height;
        if n.len() != len || valid.len() != len {
            return Err(GeoError::InvalidInput(format!(
                "normal map {width}x{height} needs {len} vectors and mask entries, got {} and {}",
                n.len(),
                valid.len()
            )));
        }
        if let Some(i) =
            (0..len).find(|&i| valid[i] && !((n[i].norm() - 1.0).abs() <= UNIT_TOLERANCE))
        {
            return Err(GeoError::InvalidInput(format!(
                "valid normal at index {i} has norm {}",
                n[i].norm()
            )));
        }
        let n = n
            .into_iter()
            .zip(&valid)
            .map(|(v, &ok)| if ok { v } else { Vector3::zeros() })
            .collect();
        Ok(Self {
            width,
            height,
            n,
            valid,
        })
    }

    /// Normalizes arbitrary vectors; zero-length or non-finite ones become invalid.
    pub fn from_vectors(width: usize, height: usize, n: Vec<Vector3<f64>>) -> Result<Self> {
        let mut valid = Vec::with_capacity(n.len());
        let n = n
            .into_iter()
            .map(|v| {
                let norm = v.norm();
                let ok = norm.is_finite() && norm > 0.0;
                valid.push(ok);
                if ok {
                    v / norm
                } else {
                    Vector3::zeros()
                }
            })
            .collect();
        Self::new(width, height, n, valid)
    }

    pub fn constant(width: usize, height: usize, normal: Vector3<f64>) -> Result<Self> {
        Self::from_vectors(width, height, vec![normal; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn vectors(&self) -> &[Vector3<f64>] {
        &self.n
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    #[inline]
    pub fn is_valid(&self, px: Pixel) -> bool {
        self.valid[px.index(self.width)]
    }

    #[inline]
    pub fn get(&self, px: Pixel) -> Option<Vector3<f64>> {
        let i = px.index(self.width);
        self.valid[i].then(|| self.n[i])
    }

    /// Replaces the mask, invalidating entries that are not marked in `keep`.
    pub fn restricted_to(&self, keep: &[bool]) -> Result<Self> {
        let valid: Vec<bool> = self.valid.iter().zip(keep).map(|(a, b)| *a && *b).collect();
        Self::new(self.width, self.height, self.n.clone(), valid)
    }
}
