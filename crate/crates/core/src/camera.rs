//! Pinhole camera model, depth unprojection and ASCII PLY export.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::map::{DepthMap, Pixel};

/// Focal lengths and principal point, all in pixels.
///
/// `(cx, cy)` are expressed in zero-based `(column, row)` coordinates of
/// pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let intr = Self { fx, fy, cx, cy };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(GeoError::InvalidIntrinsics(format!(
                "focal lengths must be finite and > 0 (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(GeoError::InvalidIntrinsics(format!(
                "principal point must be finite (cx = {}, cy = {})",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Viewing ray of pixel `(u, v)` scaled so that its `z` component is 1.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// 3D point seen at pixel `(u, v)` with depth `z`.
    #[inline]
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }
}

/// Per-pixel 3D points on the image lattice, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    width: usize,
    height: usize,
    points: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl PointCloud {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    #[inline]
    pub fn get(&self, px: Pixel) -> Option<Vector3<f64>> {
        let i = px.index(self.width);
        self.valid[i].then(|| self.points[i])
    }

    /// Valid points in row-major order.
    pub fn valid_points(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.points.iter().zip(&self.valid).filter(|(_, ok)| **ok).map(|(p, _)| p)
    }
}

/// Lifts every valid depth pixel to 3D: `x = (u - cx) z / fx`, `y = (v - cy) z / fy`.
pub fn unproject(depth: &DepthMap, intr: &CameraIntrinsics) -> Result<PointCloud> {
    intr.validate()?;
    if depth.is_empty() {
        return Err(GeoError::EmptyMap);
    }
    let width = depth.width();
    let z = depth.values();
    let mask = depth.mask();
    let points = (0..depth.len())
        .into_par_iter()
        .map(|i| {
            if mask[i] {
                intr.backproject((i % width) as f64, (i / width) as f64, z[i])
            } else {
                Vector3::zeros()
            }
        })
        .collect();
    Ok(PointCloud {
        width,
        height: depth.height(),
        points,
        valid: mask.to_vec(),
    })
}

/// Writes the valid points of `cloud` as an ASCII PLY vertex list.
///
/// Coordinates are stored as `float` properties. When `colors` is given it
/// must hold one RGB triple per lattice pixel; only valid pixels are written.
pub fn export_ply<W: Write>(
    cloud: &PointCloud,
    colors: Option<&[[u8; 3]]>,
    mut sink: W,
) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != cloud.points.len() {
            return Err(GeoError::InvalidInput(format!(
                "color buffer has {} entries, cloud has {} pixels",
                c.len(),
                cloud.points.len()
            )));
        }
    }
    writeln!(sink, "ply")?;
    writeln!(sink, "format ascii 1.0")?;
    writeln!(sink, "element vertex {}", cloud.valid_count())?;
    writeln!(sink, "property float x")?;
    writeln!(sink, "property float y")?;
    writeln!(sink, "property float z")?;
    if colors.is_some() {
        writeln!(sink, "property uchar red")?;
        writeln!(sink, "property uchar green")?;
        writeln!(sink, "property uchar blue")?;
    }
    writeln!(sink, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        if !cloud.valid[i] {
            continue;
        }
        write!(sink, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?;
        if let Some(c) = colors {
            let [r, g, b] = c[i];
            write!(sink, " {r} {g} {b}")?;
        }
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}
