//! Depth and normal error metrics, and the 3D geometric metric (3DGM).

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::config::GeoConfig;
use crate::d2n::depth_to_normals;
use crate::error::{check_shape, GeoError, Result};
use crate::map::{DepthMap, NormalMap};
use crate::tv::tv_denoise_normals;

pub const DELTA_BASE: f64 = 1.25;
pub const ANGLE_THRESHOLDS_DEG: [f64; 3] = [11.25, 22.5, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub rmse: f64,
    pub log10: f64,
    pub rel: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Number of jointly valid pixels averaged over.
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMetrics {
    /// Angle statistics in degrees.
    pub mean: f64,
    pub median: f64,
    pub rmse: f64,
    pub acc_1125: f64,
    pub acc_225: f64,
    pub acc_30: f64,
    pub count: usize,
}

/// Standard depth errors over pixels valid in both maps.
///
/// `delta_k` counts pixels with `max(z / z_gt, z_gt / z) < 1.25^k` (strict).
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap) -> Result<DepthMetrics> {
    check_shape(gt.dims(), pred.dims())?;
    let pairs: Vec<(f64, f64)> = pred
        .values()
        .iter()
        .zip(gt.values())
        .zip(pred.mask().iter().zip(gt.mask()))
        .filter(|((z, g), (a, b))| **a && **b && **z > 0.0 && **g > 0.0)
        .map(|((z, g), _)| (*z, *g))
        .collect();
    if pairs.is_empty() {
        return Err(GeoError::NoValidPixels);
    }
    let m = pairs.len() as f64;
    let mut sq = 0.0;
    let mut log10 = 0.0;
    let mut rel = 0.0;
    let mut hits = [0usize; 3];
    for &(z, g) in &pairs {
        sq += (z - g) * (z - g);
        log10 += (z.log10() - g.log10()).abs();
        rel += (z - g).abs() / g;
        let ratio = (z / g).max(g / z);
        let mut thresh = DELTA_BASE;
        for h in &mut hits {
            if ratio < thresh {
                *h += 1;
            }
            thresh *= DELTA_BASE;
        }
    }
    Ok(DepthMetrics {
        rmse: (sq / m).sqrt(),
        log10: log10 / m,
        rel: rel / m,
        delta1: hits[0] as f64 / m,
        delta2: hits[1] as f64 / m,
        delta3: hits[2] as f64 / m,
        count: pairs.len(),
    })
}

/// Per-pixel angle between two unit normals, in degrees.
///
/// Uses `atan2(|a × b|, a · b)`, which equals `acos(a · b)` for unit vectors
/// but stays accurate near 0° and 180°.
#[inline]
pub fn angle_deg(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Angular error statistics over pixels valid in both maps.
///
/// The median of an even count is the mean of the two middle values.
/// Accuracies count angles strictly below each threshold.
pub fn normal_metrics(pred: &NormalMap, gt: &NormalMap) -> Result<NormalMetrics> {
    check_shape(gt.dims(), pred.dims())?;
    let mut angles: Vec<f64> = pred
        .vectors()
        .iter()
        .zip(gt.vectors())
        .zip(pred.mask().iter().zip(gt.mask()))
        .filter(|(_, (a, b))| **a && **b)
        .map(|((p, g), _)| angle_deg(p, g))
        .collect();
    if angles.is_empty() {
        return Err(GeoError::NoValidPixels);
    }
    let m = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / m;
    let rmse = (angles.iter().map(|a| a * a).sum::<f64>() / m).sqrt();
    let acc = |t: f64| angles.iter().filter(|&&a| a < t).count() as f64 / m;
    let [t1, t2, t3] = ANGLE_THRESHOLDS_DEG;
    let (acc_1125, acc_225, acc_30) = (acc(t1), acc(t2), acc(t3));
    angles.sort_by(f64::total_cmp);
    let mid = angles.len() / 2;
    let median = if angles.len() % 2 == 1 {
        angles[mid]
    } else {
        0.5 * (angles[mid - 1] + angles[mid])
    };
    Ok(NormalMetrics {
        mean,
        median,
        rmse,
        acc_1125,
        acc_225,
        acc_30,
        count: angles.len(),
    })
}

/// 3D geometric metric: both depth maps are unprojected, converted to
/// least-squares normals with `cfg`'s gates, TV-denoised, and compared.
///
/// Pixels degenerate on either side are left out; `count` reports how many
/// remained.
pub fn three_dgm(
    pred_depth: &DepthMap,
    gt_depth: &DepthMap,
    intr: &CameraIntrinsics,
    cfg: &GeoConfig,
    tv_strength: f64,
    tv_iters: usize,
) -> Result<NormalMetrics> {
    check_shape(gt_depth.dims(), pred_depth.dims())?;
    let surface = |depth: &DepthMap| -> Result<NormalMap> {
        let normals = depth_to_normals(depth, intr, cfg)?;
        tv_denoise_normals(&normals, tv_strength, tv_iters)
    };
    let pred = surface(pred_depth)?;
    let gt = surface(gt_depth)?;
    normal_metrics(&pred, &gt)
}
