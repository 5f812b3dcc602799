//! Depth-to-normal transform.
//!
//! Each pixel's normal solves `A n = 1` in the least-squares sense, where
//! the rows of `A` are the raw 3D points of its gated neighborhood:
//! `n ∝ (AᵀA + εI)⁻¹ Aᵀ1`. The points are deliberately not centered.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{unproject, CameraIntrinsics, PointCloud};
use crate::config::GeoConfig;
use crate::error::{GeoError, Result};
use crate::map::{DepthMap, NormalMap, Pixel};

/// `|det|` below this fraction of `(trace / 3)³` counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-15;

/// Why a plane fit produced no normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    TooFewPoints,
    Singular,
}

/// Running sums of `AᵀA` and `Aᵀ1`, accumulated point by point.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NormalEquations {
    count: usize,
    xx: f64,
    xy: f64,
    xz: f64,
    yy: f64,
    yz: f64,
    zz: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl NormalEquations {
    #[inline]
    pub(crate) fn push(&mut self, p: &Vector3<f64>) {
        self.count += 1;
        self.xx += p.x * p.x;
        self.xy += p.x * p.y;
        self.xz += p.x * p.z;
        self.yy += p.y * p.y;
        self.yz += p.y * p.z;
        self.zz += p.z * p.z;
        self.x += p.x;
        self.y += p.y;
        self.z += p.z;
    }

    pub(crate) fn solve(&self, ridge_eps: f64) -> std::result::Result<Vector3<f64>, Degenerate> {
        if self.count < 3 {
            return Err(Degenerate::TooFewPoints);
        }
        let scale = (self.xx + self.yy + self.zz) / 3.0;
        let eps = ridge_eps * scale;
        let m = [
            [self.xx + eps, self.xy, self.xz],
            [self.xy, self.yy + eps, self.yz],
            [self.xz, self.yz, self.zz + eps],
        ];
        let rhs = [self.x, self.y, self.z];
        let det = det3(&m);
        let scale = scale + eps;
        if !det.is_finite() || !(scale > 0.0) || det.abs() <= SINGULAR_RTOL * scale * scale * scale {
            return Err(Degenerate::Singular);
        }
        // Cramer's rule: replace column k by the right-hand side.
        let mut sol = [0.0; 3];
        for (k, s) in sol.iter_mut().enumerate() {
            let mut mk = m;
            for (row, r) in mk.iter_mut().zip(rhs) {
                row[k] = r;
            }
            *s = det3(&mk) / det;
        }
        let n = Vector3::new(sol[0], sol[1], sol[2]);
        let norm = n.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Degenerate::Singular);
        }
        Ok(n / norm)
    }
}

#[inline]
fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inclusive index range of offsets strictly closer than `beta` to `center`.
#[inline]
pub(crate) fn window(center: usize, beta: usize, len: usize) -> std::ops::RangeInclusive<usize> {
    let r = beta - 1;
    center.saturating_sub(r)..=(center + r).min(len - 1)
}

/// Valid points `j` with `|u_i - u_j| < beta`, `|v_i - v_j| < beta` and
/// `|z_i - z_j| < gamma · z_i`, in row-major order. Includes `px` itself.
///
/// Returns an empty list when `px` is invalid or `beta` is zero.
pub fn tangent_neighborhood(
    cloud: &PointCloud,
    px: Pixel,
    beta: usize,
    gamma: f64,
) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    if beta == 0 {
        return out;
    }
    let Some(center) = cloud.get(px) else {
        return out;
    };
    for_each_tangent_neighbor(cloud, px, center.z, beta, gamma, |p| out.push(*p));
    out
}

#[inline]
fn for_each_tangent_neighbor(
    cloud: &PointCloud,
    px: Pixel,
    zi: f64,
    beta: usize,
    gamma: f64,
    mut f: impl FnMut(&Vector3<f64>),
) {
    let (w, h) = cloud.dims();
    let points = cloud.points();
    let mask = cloud.mask();
    let gate = gamma * zi;
    for v in window(px.v, beta, h) {
        for u in window(px.u, beta, w) {
            let j = v * w + u;
            if mask[j] && (zi - points[j].z).abs() < gate {
                f(&points[j]);
            }
        }
    }
}

/// Least-squares plane normal through `points` (unit length, sign arbitrary).
///
/// `ridge_eps` scales a Tikhonov term `ε = ridge_eps · trace(AᵀA) / 3`.
pub fn fit_normal_ls(
    points: &[Vector3<f64>],
    ridge_eps: f64,
) -> std::result::Result<Vector3<f64>, Degenerate> {
    let mut eq = NormalEquations::default();
    for p in points {
        eq.push(p);
    }
    eq.solve(ridge_eps)
}

/// Flips `normal` so that it faces the camera (`normal · point <= 0`).
#[inline]
pub fn orient_to_camera(normal: Vector3<f64>, point: Vector3<f64>) -> Vector3<f64> {
    if normal.dot(&point) > 0.0 {
        -normal
    } else {
        normal
    }
}

/// Per-pixel least-squares normals of `depth`, oriented toward the camera.
///
/// Pixels whose fit is degenerate are invalid in the result.
pub fn depth_to_normals(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    cfg: &GeoConfig,
) -> Result<NormalMap> {
    cfg.validate()?;
    let cloud = unproject(depth, intr)?;
    normals_from_cloud(&cloud, cfg)
}

pub(crate) fn normals_from_cloud(cloud: &PointCloud, cfg: &GeoConfig) -> Result<NormalMap> {
    let (w, h) = cloud.dims();
    if w == 0 || h == 0 {
        return Err(GeoError::EmptyMap);
    }
    let fits: Vec<Option<Vector3<f64>>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let px = Pixel::new(i % w, i / w);
            let p = cloud.get(px)?;
            let mut eq = NormalEquations::default();
            for_each_tangent_neighbor(cloud, px, p.z, cfg.beta, cfg.gamma, |q| eq.push(q));
            eq.solve(cfg.ridge_eps).ok().map(|n| orient_to_camera(n, p))
        })
        .collect();
    let valid = fits.iter().map(Option::is_some).collect();
    let normals = fits.into_iter().map(|n| n.unwrap_or_else(Vector3::zeros)).collect();
    NormalMap::new(w, h, normals, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 15.5, 15.5).unwrap()
    }

    /// SVD of the centered scatter matrix; the plane normal is the last right
    /// singular vector.
    fn svd_plane_normal(points: &[Vector3<f64>]) -> Vector3<f64> {
        let c = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
        let scatter: Matrix3<f64> = points.iter().map(|p| (p - c) * (p - c).transpose()).sum();
        let svd = scatter.svd(false, true);
        let v_t = svd.v_t.unwrap();
        let k = svd.singular_values.imin();
        v_t.row(k).transpose().normalize()
    }

    fn same_axis(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
        (a - b).norm().min((a + b).norm())
    }

    #[test]
    fn beta_one_is_singleton() {
        let depth = DepthMap::constant(5, 5, 2.0).unwrap();
        let cloud = unproject(&depth, &intr()).unwrap();
        let nb = tangent_neighborhood(&cloud, Pixel::new(2, 2), 1, 0.05);
        assert_eq!(nb, vec![cloud.get(Pixel::new(2, 2)).unwrap()]);
    }

    #[test]
    fn constant_depth_fills_window() {
        let depth = DepthMap::constant(32, 32, 3.0).unwrap();
        let cloud = unproject(&depth, &intr()).unwrap();
        let nb = tangent_neighborhood(&cloud, Pixel::new(15, 16), 9, 0.05);
        assert_eq!(nb.len(), 17 * 17);
    }

    #[test]
    fn depth_gate_separates_planes() {
        let z: Vec<f64> = (0..32 * 32).map(|i| if i % 32 < 16 { 1.0 } else { 2.0 }).collect();
        let depth = DepthMap::from_values(32, 32, z).unwrap();
        let cloud = unproject(&depth, &intr()).unwrap();
        let nb = tangent_neighborhood(&cloud, Pixel::new(15, 16), 9, 0.05);
        assert!(!nb.is_empty());
        assert!(nb.iter().all(|p| p.z == 1.0));
        assert_eq!(nb.len(), 17 * 9);
    }

    #[test]
    fn fronto_parallel_points() {
        let pts: Vec<_> = (0..9)
            .map(|i| Vector3::new((i % 3) as f64 * 0.1, (i / 3) as f64 * 0.2, 4.0))
            .collect();
        let n = fit_normal_ls(&pts, 0.0).unwrap();
        assert!(same_axis(n, Vector3::z()) < 1e-9);
    }

    #[test]
    fn recovers_slanted_plane() {
        let normal = Vector3::new(1.0, 2.0, 2.0) / 3.0;
        let d = 2.5;
        // Two in-plane directions.
        let t1 = Vector3::new(2.0, -1.0, 0.0).normalize();
        let t2 = normal.cross(&t1);
        let origin = normal * d;
        let pts: Vec<_> = (0..25)
            .map(|i| origin + t1 * ((i % 5) as f64 - 2.0) * 0.03 + t2 * ((i / 5) as f64 - 2.0) * 0.05)
            .collect();
        let n = fit_normal_ls(&pts, 0.0).unwrap();
        assert!(same_axis(n, normal) < 1e-6);
        assert!(same_axis(n, svd_plane_normal(&pts)) < 1e-6);
        let ridged = fit_normal_ls(&pts, GeoConfig::default().ridge_eps).unwrap();
        assert!(same_axis(ridged, normal) < 1e-6);
    }

    #[test]
    fn too_few_or_collinear_points_are_degenerate() {
        let two = [Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.1, 0.0, 1.0)];
        assert_eq!(fit_normal_ls(&two, 0.0), Err(Degenerate::TooFewPoints));
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64 * 0.1, 0.0, 1.0)).collect();
        assert_eq!(fit_normal_ls(&line, 0.0), Err(Degenerate::Singular));
        // A plane through the optical center makes A n = 1 unsolvable.
        let through_origin: Vec<_> = (0..9)
            .map(|i| Vector3::new((i % 3) as f64 + 1.0, (i / 3) as f64 + 1.0, 0.0))
            .collect();
        assert_eq!(fit_normal_ls(&through_origin, 0.0), Err(Degenerate::Singular));
    }

    #[test]
    fn orientation_faces_camera() {
        let p = Vector3::new(0.0, 0.0, 5.0);
        assert_eq!(orient_to_camera(Vector3::z(), p), -Vector3::z());
        assert_eq!(orient_to_camera(-Vector3::z(), p), -Vector3::z());
        assert_eq!(orient_to_camera(Vector3::x(), p), Vector3::x());
    }

    #[test]
    fn constant_depth_gives_camera_facing_normals() {
        let depth = DepthMap::constant(24, 20, 2.0).unwrap();
        let normals = depth_to_normals(&depth, &intr(), &GeoConfig::default()).unwrap();
        assert_eq!(normals.valid_count(), 24 * 20);
        for n in normals.vectors() {
            assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn invalid_pixels_stay_invalid() {
        let mut z = vec![2.0; 100];
        z[55] = f64::NAN;
        let depth = DepthMap::from_values(10, 10, z).unwrap();
        let normals = depth_to_normals(&depth, &intr(), &GeoConfig::default()).unwrap();
        assert!(!normals.mask()[55]);
        assert_eq!(normals.valid_count(), 99);
    }

    #[test]
    fn beta_one_marks_everything_degenerate() {
        let depth = DepthMap::constant(6, 6, 2.0).unwrap();
        let cfg = GeoConfig { beta: 1, ..Default::default() };
        let normals = depth_to_normals(&depth, &intr(), &cfg).unwrap();
        assert_eq!(normals.valid_count(), 0);
    }
}
