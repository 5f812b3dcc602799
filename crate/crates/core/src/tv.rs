//! Total-variation denoising of normal maps.
//!
//! Each channel is smoothed with Chambolle's dual projection scheme for the
//! ROF objective `TV(u) + ‖u - f‖² / (2 · strength)`, then the vectors are
//! re-normalized. Finite differences across invalid pixels are zero, so the
//! mask boundary behaves like an image border.

use nalgebra::Vector3;

use crate::error::{GeoError, Result};
use crate::map::NormalMap;

/// Dual step size; `1/8` is the bound for guaranteed convergence.
const TAU: f64 = 0.125;

struct Lattice<'a> {
    width: usize,
    height: usize,
    mask: &'a [bool],
}

impl Lattice<'_> {
    #[inline]
    fn link_x(&self, i: usize) -> bool {
        (i % self.width) + 1 < self.width && self.mask[i] && self.mask[i + 1]
    }

    #[inline]
    fn link_y(&self, i: usize) -> bool {
        i / self.width + 1 < self.height && self.mask[i] && self.mask[i + self.width]
    }

    fn grad(&self, u: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let w = self.width;
        for i in 0..u.len() {
            gx[i] = if self.link_x(i) { u[i + 1] - u[i] } else { 0.0 };
            gy[i] = if self.link_y(i) { u[i + w] - u[i] } else { 0.0 };
        }
    }

    /// Negative adjoint of [`Lattice::grad`].
    fn div(&self, px: &[f64], py: &[f64], out: &mut [f64]) {
        let w = self.width;
        for i in 0..px.len() {
            let mut d = px[i] + py[i];
            if i % w > 0 {
                d -= px[i - 1];
            }
            if i >= w {
                d -= py[i - w];
            }
            out[i] = d;
        }
    }
}

/// TV-denoises one scalar channel; `strength = 0` returns `f` unchanged.
pub fn tv_denoise_channel(
    f: &[f64],
    width: usize,
    height: usize,
    mask: &[bool],
    strength: f64,
    iters: usize,
) -> Vec<f64> {
    if strength == 0.0 {
        return f.to_vec();
    }
    let lat = Lattice {
        width,
        height,
        mask,
    };
    let n = f.len();
    let (mut px, mut py) = (vec![0.0; n], vec![0.0; n]);
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
    let mut div = vec![0.0; n];
    let mut arg = vec![0.0; n];
    for _ in 0..iters {
        lat.div(&px, &py, &mut div);
        for i in 0..n {
            arg[i] = div[i] - f[i] / strength;
        }
        lat.grad(&arg, &mut gx, &mut gy);
        for i in 0..n {
            let mag = gx[i].hypot(gy[i]);
            let denom = 1.0 + TAU * mag;
            px[i] = (px[i] + TAU * gx[i]) / denom;
            py[i] = (py[i] + TAU * gy[i]) / denom;
        }
    }
    lat.div(&px, &py, &mut div);
    (0..n)
        .map(|i| if mask[i] { f[i] - strength * div[i] } else { f[i] })
        .collect()
}

/// Per-channel TV denoising of a normal map followed by re-normalization.
pub fn tv_denoise_normals(normals: &NormalMap, strength: f64, iters: usize) -> Result<NormalMap> {
    if !(strength.is_finite() && strength >= 0.0) {
        return Err(GeoError::InvalidInput(format!("TV strength must be >= 0, got {strength}")));
    }
    if iters < 1 {
        return Err(GeoError::InvalidInput("TV iterations must be >= 1".into()));
    }
    if strength == 0.0 {
        return Ok(normals.clone());
    }
    let (w, h) = normals.dims();
    let mask = normals.mask();
    let src = normals.vectors();
    let channels: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let f: Vec<f64> = src.iter().map(|n| n[c]).collect();
            tv_denoise_channel(&f, w, h, mask, strength, iters)
        })
        .collect();
    let out = (0..src.len())
        .map(|i| {
            if !mask[i] {
                return Vector3::zeros();
            }
            let v = Vector3::new(channels[0][i], channels[1][i], channels[2][i]);
            let norm = v.norm();
            if norm > 0.0 && norm.is_finite() {
                v / norm
            } else {
                src[i]
            }
        })
        .collect();
    NormalMap::new(w, h, out, mask.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::normal_metrics;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_strength_is_identity() {
        let n: Vec<_> = (0..20).map(|i| Vector3::new(i as f64, 1.0, -3.0)).collect();
        let map = NormalMap::from_vectors(5, 4, n).unwrap();
        assert_eq!(tv_denoise_normals(&map, 0.0, 10).unwrap(), map);
    }

    #[test]
    fn constant_map_is_unchanged() {
        let map = NormalMap::constant(9, 7, Vector3::new(0.3, -0.2, -1.0)).unwrap();
        let out = tv_denoise_normals(&map, 0.5, 40).unwrap();
        for (a, b) in out.vectors().iter().zip(map.vectors()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let map = NormalMap::constant(3, 3, Vector3::z()).unwrap();
        assert!(tv_denoise_normals(&map, -1.0, 3).is_err());
        assert!(tv_denoise_normals(&map, 0.1, 0).is_err());
    }

    #[test]
    fn reduces_noise_on_piecewise_constant_normals() {
        let (w, h) = (40, 30);
        let left = Vector3::new(0.5, 0.0, -1.0).normalize();
        let right = Vector3::new(-0.3, 0.2, -1.0).normalize();
        let clean: Vec<_> = (0..w * h).map(|i| if i % w < w / 2 { left } else { right }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let noisy: Vec<_> = clean
            .iter()
            .map(|n| n + Vector3::from_fn(|_, _| noise.sample(&mut rng)))
            .collect();
        let clean = NormalMap::from_vectors(w, h, clean).unwrap();
        let noisy = NormalMap::from_vectors(w, h, noisy).unwrap();
        let before = normal_metrics(&noisy, &clean).unwrap().mean;
        let denoised = tv_denoise_normals(&noisy, 0.1, 30).unwrap();
        let after = normal_metrics(&denoised, &clean).unwrap().mean;
        assert!(after < before, "{after} >= {before}");
    }

    #[test]
    fn adjoint_relation_holds() {
        // <grad u, p> = -<u, div p> on a masked lattice.
        let (w, h) = (6, 5);
        let mask: Vec<bool> = (0..w * h).map(|i| i % 7 != 3).collect();
        let lat = Lattice { width: w, height: h, mask: &mask };
        let u: Vec<f64> = (0..w * h).map(|i| (i as f64 * 0.7).sin()).collect();
        let px: Vec<f64> = (0..w * h).map(|i| if lat.link_x(i) { (i as f64).cos() } else { 0.0 }).collect();
        let py: Vec<f64> = (0..w * h).map(|i| if lat.link_y(i) { (i as f64 * 1.3).sin() } else { 0.0 }).collect();
        let (mut gx, mut gy, mut d) = (vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]);
        lat.grad(&u, &mut gx, &mut gy);
        lat.div(&px, &py, &mut d);
        let lhs: f64 = (0..w * h).map(|i| gx[i] * px[i] + gy[i] * py[i]).sum();
        let rhs: f64 = -(0..w * h).map(|i| u[i] * d[i]).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
