//! Synthetic scenes with analytic depth and normals.
//!
//! Depth comes from exact ray/surface intersection under the scene's
//! intrinsics; normals are analytic and face the camera. Noise is
//! multiplicative and drawn from a ChaCha8 stream seeded with
//! `seed_from_u64`, one standard-normal sample per pixel in row-major order.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::edge::GrayImage;
use crate::error::{GeoError, Result};
use crate::map::{DepthMap, NormalMap};

/// Lower bound on `1 + ε` so noisy depth stays positive.
const MIN_NOISE_FACTOR: f64 = 1e-3;

/// Plane `n · p = -offset`, where `n` is `normal` normalized and flipped to
/// face the camera and `offset > 0` is the distance from the optical center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneParams {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl PlaneParams {
    fn facing_normal(&self) -> Result<Vector3<f64>> {
        let n = Vector3::from(self.normal);
        let norm = n.norm();
        if !(norm.is_finite() && norm > 0.0) || !(self.offset.is_finite() && self.offset > 0.0) {
            return Err(GeoError::InvalidInput(format!(
                "plane needs a non-zero normal and offset > 0, got {:?}",
                self
            )));
        }
        let n = n / norm;
        Ok(if n.z > 0.0 { -n } else { n })
    }

    /// Depth along `ray` (with `ray.z = 1`), if the plane is hit in front.
    fn hit(n: &Vector3<f64>, offset: f64, ray: &Vector3<f64>) -> Option<f64> {
        let den = n.dot(ray);
        (den < 0.0).then(|| -offset / den).filter(|z| z.is_finite() && *z > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SceneKind {
    Plane(PlaneParams),
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Fronto-parallel step: columns `< split_column` at `near`, the rest at `far`.
    Step {
        near: f64,
        far: f64,
        split_column: usize,
    },
    /// Two planes; each pixel sees the nearer one.
    Wedge {
        first: PlaneParams,
        second: PlaneParams,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub noise_sigma_rel: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Noise-free depth and analytic normals of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub depth: DepthMap,
    pub normals: NormalMap,
}

impl Scene {
    /// Depth with the spec's multiplicative noise applied.
    pub fn observed_depth(&self, spec: &SceneSpec) -> Result<DepthMap> {
        add_noise(&self.depth, spec.noise_sigma_rel, spec.seed)
    }
}

/// Depth and normal where the ray through column `u` meets the surface.
type SurfaceHit = dyn Fn(&Vector3<f64>, usize) -> Option<(f64, Vector3<f64>)>;

/// Renders depth and normals of `spec` by exact ray casting.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    let intr = &spec.intrinsics;
    intr.validate()?;
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(GeoError::EmptyMap);
    }
    let surface: Box<SurfaceHit> = match spec.kind {
        SceneKind::Plane(p) => {
            let n = p.facing_normal()?;
            Box::new(move |ray, _| PlaneParams::hit(&n, p.offset, ray).map(|z| (z, n)))
        }
        SceneKind::Sphere { center, radius } => {
            let c = Vector3::from(center);
            if !(radius.is_finite() && radius > 0.0) || c.norm() <= radius {
                return Err(GeoError::InvalidInput(
                    "sphere needs radius > 0 and the camera outside it".into(),
                ));
            }
            Box::new(move |ray, _| {
                let a = ray.norm_squared();
                let b = ray.dot(&c);
                let disc = b * b - a * (c.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let t = (b - disc.sqrt()) / a;
                if !(t > 0.0) {
                    return None;
                }
                let p = ray * t;
                let n = (p - c) / radius;
                Some((t, if n.dot(&p) > 0.0 { -n } else { n }))
            })
        }
        SceneKind::Step {
            near,
            far,
            split_column,
        } => {
            if !(near.is_finite() && near > 0.0 && far.is_finite() && far > 0.0) {
                return Err(GeoError::InvalidInput("step depths must be > 0".into()));
            }
            let n = Vector3::new(0.0, 0.0, -1.0);
            Box::new(move |_, u| Some((if u < split_column { near } else { far }, n)))
        }
        SceneKind::Wedge { first, second } => {
            let (n1, n2) = (first.facing_normal()?, second.facing_normal()?);
            Box::new(move |ray, _| {
                let a = PlaneParams::hit(&n1, first.offset, ray).map(|z| (z, n1));
                let b = PlaneParams::hit(&n2, second.offset, ray).map(|z| (z, n2));
                match (a, b) {
                    (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
                    (a, b) => a.or(b),
                }
            })
        }
    };
    let mut z = Vec::with_capacity(w * h);
    let mut n = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let ray = intr.ray(u as f64, v as f64);
            match surface(&ray, u) {
                Some((d, normal)) => {
                    z.push(d);
                    n.push(normal);
                }
                None => {
                    z.push(0.0);
                    n.push(Vector3::zeros());
                }
            }
        }
    }
    let depth = DepthMap::from_values(w, h, z)?;
    if depth.valid_count() == 0 {
        return Err(GeoError::NoVisibleSurface);
    }
    let normals = NormalMap::from_vectors(w, h, n)?.restricted_to(depth.mask())?;
    Ok(Scene { depth, normals })
}

/// `z' = z · (1 + ε)`, `ε ~ N(0, sigma_rel)`, seeded and deterministic.
pub fn add_noise(depth: &DepthMap, sigma_rel: f64, seed: u64) -> Result<DepthMap> {
    if !(sigma_rel.is_finite() && sigma_rel >= 0.0) {
        return Err(GeoError::InvalidInput(format!("sigma_rel must be >= 0, got {sigma_rel}")));
    }
    if sigma_rel == 0.0 {
        return Ok(depth.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_rel)
        .map_err(|e| GeoError::InvalidInput(format!("noise distribution: {e}")))?;
    let z = depth
        .values()
        .iter()
        .map(|&z| {
            let eps: f64 = normal.sample(&mut rng);
            z * (1.0 + eps).max(MIN_NOISE_FACTOR)
        })
        .collect();
    depth.with_values(z)
}

/// Lambertian shading under a light on the optical axis with `1/z` falloff,
/// normalized so the nearest fully lit pixel is 255. Invalid pixels are black.
pub fn render_shading(depth: &DepthMap, normals: &NormalMap) -> Result<GrayImage> {
    crate::error::check_shape(depth.dims(), normals.dims())?;
    let z_min = depth
        .values()
        .iter()
        .zip(depth.mask())
        .filter(|(_, ok)| **ok)
        .map(|(z, _)| *z)
        .fold(f64::INFINITY, f64::min);
    let data = depth
        .values()
        .iter()
        .zip(normals.vectors())
        .zip(depth.mask().iter().zip(normals.mask()))
        .map(|((z, n), (a, b))| {
            if *a && *b {
                (255.0 * (-n.z).max(0.0) * z_min / z).clamp(0.0, 255.0)
            } else {
                0.0
            }
        })
        .collect();
    GrayImage::new(depth.width(), depth.height(), data)
}
