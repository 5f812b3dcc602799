//! Normal-to-depth transform.
//!
//! Every neighbor `j` whose normal is close to `n_i` intersects the viewing
//! ray of pixel `i` with its own tangent plane, voting a depth `z'_ji`. The
//! votes are averaged with the linear kernel `K(n_j, n_i) = n_jᵀ n_i`.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{unproject, CameraIntrinsics, PointCloud};
use crate::config::GeoConfig;
use crate::d2n::window;
use crate::error::{check_shape, Result};
use crate::map::{DepthMap, NormalMap, Pixel};

/// Ray/plane intersections with a denominator below this are rejected.
pub const GRAZING_EPS: f64 = 1e-8;

/// Valid pixels `j` with `n_jᵀ n_i > alpha`, `|u_i - u_j| < beta` and
/// `|v_i - v_j| < beta`, in row-major order. Includes `px` itself.
pub fn coplanar_neighborhood(
    normals: &NormalMap,
    px: Pixel,
    alpha: f64,
    beta: usize,
) -> Vec<Pixel> {
    let mut out = Vec::new();
    if beta == 0 {
        return out;
    }
    let Some(ni) = normals.get(px) else {
        return out;
    };
    let (w, h) = normals.dims();
    for v in window(px.v, beta, h) {
        for u in window(px.u, beta, w) {
            let j = Pixel::new(u, v);
            if j == px {
                out.push(j);
            } else if let Some(nj) = normals.get(j) {
                if nj.dot(&ni) > alpha {
                    out.push(j);
                }
            }
        }
    }
    out
}

#[inline]
fn vote(
    j: Pixel,
    i: Pixel,
    pj: &Vector3<f64>,
    nj: &Vector3<f64>,
    intr: &CameraIntrinsics,
) -> Option<f64> {
    if i == j {
        return Some(pj.z);
    }
    let num = nj.x * pj.x + nj.y * pj.y + nj.z * pj.z;
    let den = (i.u as f64 - intr.cx) * nj.x / intr.fx
        + (i.v as f64 - intr.cy) * nj.y / intr.fy
        + nj.z;
    if den.abs() < GRAZING_EPS {
        return None;
    }
    let z = num / den;
    (z.is_finite() && z > 0.0).then_some(z)
}

/// Depth of pixel `i` implied by the tangent plane at pixel `j`.
///
/// `None` when `j` is invalid, the ray grazes the plane, or the intersection
/// lies behind the camera. The self-vote `j == i` returns `z_i` unchanged.
pub fn vote_depth(
    j: Pixel,
    i: Pixel,
    depth: &DepthMap,
    normals: &NormalMap,
    intr: &CameraIntrinsics,
) -> Option<f64> {
    let zj = depth.get(j)?;
    let nj = normals.get(j)?;
    let pj = intr.backproject(j.u as f64, j.v as f64, zj);
    vote(j, i, &pj, &nj, intr)
}

/// Kernel-regression refinement of `depth_init` from `normals`.
///
/// Pixels without a valid normal or without any accepted vote keep their
/// initial depth. The output mask equals the input depth mask.
pub fn normals_to_depth(
    depth_init: &DepthMap,
    normals: &NormalMap,
    intr: &CameraIntrinsics,
    cfg: &GeoConfig,
) -> Result<DepthMap> {
    cfg.validate()?;
    check_shape(depth_init.dims(), normals.dims())?;
    let cloud = unproject(depth_init, intr)?;
    let z = aggregate(depth_init, &cloud, normals, intr, cfg);
    depth_init.with_values(z)
}

fn aggregate(
    depth: &DepthMap,
    cloud: &PointCloud,
    normals: &NormalMap,
    intr: &CameraIntrinsics,
    cfg: &GeoConfig,
) -> Vec<f64> {
    let (w, h) = depth.dims();
    let zs = depth.values();
    let dmask = depth.mask();
    let nmask = normals.mask();
    let ns = normals.vectors();
    let points = cloud.points();
    (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let i = Pixel::new(idx % w, idx / w);
            if !(dmask[idx] && nmask[idx]) {
                return zs[idx];
            }
            let ni = &ns[idx];
            let mut num = 0.0;
            let mut den = 0.0;
            for v in window(i.v, cfg.beta, h) {
                for u in window(i.u, cfg.beta, w) {
                    let jdx = v * w + u;
                    if !(dmask[jdx] && nmask[jdx]) {
                        continue;
                    }
                    let j = Pixel::new(u, v);
                    let k = if j == i { 1.0 } else { ns[jdx].dot(ni) };
                    if !(j == i || k > cfg.alpha) {
                        continue;
                    }
                    if let Some(zji) = vote(j, i, &points[jdx], &ns[jdx], intr) {
                        num += k * zji;
                        den += k;
                    }
                }
            }
            if den > 0.0 {
                num / den
            } else {
                zs[idx]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(80.0, 90.0, 11.5, 9.5).unwrap()
    }

    /// Camera-facing plane `n·p = -d` sampled on a `w × h` lattice.
    fn plane(n: Vector3<f64>, d: f64, w: usize, h: usize) -> (DepthMap, NormalMap) {
        let n = n.normalize();
        let k = intr();
        let z = (0..w * h)
            .map(|i| -d / n.dot(&k.ray((i % w) as f64, (i / w) as f64)))
            .collect();
        (
            DepthMap::from_values(w, h, z).unwrap(),
            NormalMap::constant(w, h, n).unwrap(),
        )
    }

    #[test]
    fn identical_normals_fill_window() {
        let normals = NormalMap::constant(30, 30, Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(coplanar_neighborhood(&normals, Pixel::new(14, 15), 0.95, 9).len(), 289);
        assert_eq!(
            coplanar_neighborhood(&normals, Pixel::new(14, 15), 0.95, 1),
            vec![Pixel::new(14, 15)]
        );
    }

    #[test]
    fn thirty_degree_neighbor_is_excluded() {
        let base = Vector3::new(0.0, 0.0, -1.0);
        let t = 30f64.to_radians();
        let tilted = Vector3::new(t.sin(), 0.0, -t.cos());
        let mut n = vec![base; 9];
        n[5] = tilted;
        let normals = NormalMap::from_vectors(3, 3, n).unwrap();
        let nb = coplanar_neighborhood(&normals, Pixel::new(1, 1), 0.95, 2);
        assert_eq!(nb.len(), 8);
        assert!(!nb.contains(&Pixel::new(2, 1)));
    }

    #[test]
    fn self_vote_is_exact() {
        let (depth, normals) = plane(Vector3::new(0.3, -0.2, -1.0), 2.0, 8, 6);
        for px in depth.pixels() {
            assert_eq!(vote_depth(px, px, &depth, &normals, &intr()), depth.get(px));
        }
    }

    #[test]
    fn planar_votes_agree() {
        let (depth, normals) = plane(Vector3::new(0.4, 0.1, -1.0), 3.0, 24, 20);
        let i = Pixel::new(7, 9);
        let zi = depth.get(i).unwrap();
        for j in depth.pixels() {
            let z = vote_depth(j, i, &depth, &normals, &intr()).unwrap();
            assert!((z - zi).abs() <= 1e-12 * zi, "{j:?}: {z} vs {zi}");
        }
    }

    #[test]
    fn grazing_plane_vote_is_rejected() {
        // Plane x = 1 has normal (-1, 0, 0); the ray through column cx lies in it.
        let k = intr();
        let depth = DepthMap::constant(24, 20, 2.0).unwrap();
        let normals = NormalMap::constant(24, 20, Vector3::new(-1.0, 0.0, 0.0)).unwrap();
        let on_axis = Pixel::new(12, 3);
        // Put the target exactly on the principal column by shifting cx.
        let k = CameraIntrinsics::new(k.fx, k.fy, 12.0, k.cy).unwrap();
        assert_eq!(vote_depth(Pixel::new(3, 3), on_axis, &depth, &normals, &k), None);
        // Negative intersections are rejected too.
        assert_eq!(vote_depth(Pixel::new(3, 3), Pixel::new(20, 3), &depth, &normals, &k), None);
    }

    #[test]
    fn consistent_plane_is_a_fixed_point() {
        let (depth, normals) = plane(Vector3::new(-0.2, 0.35, -1.0), 1.7, 30, 26);
        let out = normals_to_depth(&depth, &normals, &intr(), &GeoConfig::default()).unwrap();
        for (a, b) in out.values().iter().zip(depth.values()) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
        assert_eq!(out.mask(), depth.mask());
    }

    #[test]
    fn beta_one_is_identity() {
        let (depth, normals) = plane(Vector3::new(0.1, 0.2, -1.0), 2.0, 12, 10);
        let noisy = crate::synth::add_noise(&depth, 0.05, 3).unwrap();
        let cfg = GeoConfig { beta: 1, ..Default::default() };
        let out = normals_to_depth(&noisy, &normals, &intr(), &cfg).unwrap();
        assert_eq!(out, noisy);
    }

    #[test]
    fn pixels_without_votes_keep_initial_depth() {
        let (depth, _) = plane(Vector3::new(0.0, 0.0, -1.0), 2.0, 6, 6);
        let mut n = vec![Vector3::new(0.0, 0.0, -1.0); 36];
        n[14] = Vector3::zeros();
        let normals = NormalMap::from_vectors(6, 6, n).unwrap();
        let noisy = crate::synth::add_noise(&depth, 0.05, 9).unwrap();
        let out = normals_to_depth(&noisy, &normals, &intr(), &GeoConfig::default()).unwrap();
        assert_eq!(out.values()[14], noisy.values()[14]);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let depth = DepthMap::constant(4, 4, 1.0).unwrap();
        let normals = NormalMap::constant(4, 5, Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert!(normals_to_depth(&depth, &normals, &intr(), &GeoConfig::default()).is_err());
    }
}
