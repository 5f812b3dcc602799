//! One refinement step and the iterative loop.
//!
//! ```text
//! normals' = propagate(blend(normals, depth_to_normals(depth), blend_w))
//! depth'   = propagate(blend(depth, normals_to_depth(depth, normals), blend_w))
//! ```
//!
//! Both propagations share the weight maps built once from the image.

use crate::camera::CameraIntrinsics;
use crate::config::GeoConfig;
use crate::d2n::depth_to_normals;
use crate::edge::{
    build_weight_maps, canny, propagate_masked, propagate_normals, EdgeWeightMaps, GrayImage, Grid,
};
use crate::error::{check_shape, GeoError, Result};
use crate::map::{DepthMap, NormalMap};
use crate::n2d::normals_to_depth;

/// Convex combination of two maps on the first map's mask.
pub trait Blend: Sized {
    /// `(1 - w) · self + w · other` where both are valid; pixels valid only in
    /// `self` keep their value, pixels invalid in `self` stay invalid.
    fn blend(&self, other: &Self, w: f64) -> Result<Self>;
}

fn check_weight(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(GeoError::InvalidInput(format!("blend weight must lie in [0, 1], got {w}")));
    }
    Ok(())
}

impl Blend for DepthMap {
    fn blend(&self, other: &Self, w: f64) -> Result<Self> {
        check_weight(w)?;
        check_shape(self.dims(), other.dims())?;
        let z = self
            .values()
            .iter()
            .zip(other.values())
            .zip(other.mask())
            .map(|((a, b), ok)| if *ok { (1.0 - w) * a + w * b } else { *a })
            .collect();
        self.with_values(z)
    }
}

impl Blend for NormalMap {
    /// Blended vectors are re-normalized; the endpoints `w = 0` and `w = 1`
    /// return the inputs unchanged.
    fn blend(&self, other: &Self, w: f64) -> Result<Self> {
        check_weight(w)?;
        check_shape(self.dims(), other.dims())?;
        let n = self
            .vectors()
            .iter()
            .zip(other.vectors())
            .zip(other.mask())
            .map(|((a, b), ok)| {
                if !ok || w == 0.0 {
                    return *a;
                }
                if w == 1.0 {
                    return *b;
                }
                let m = a * (1.0 - w) + b * w;
                let norm = m.norm();
                if norm > 0.0 {
                    m / norm
                } else {
                    *a
                }
            })
            .collect();
        NormalMap::new(self.width(), self.height(), n, self.mask().to_vec())
    }
}

pub fn blend<M: Blend>(a: &M, b: &M, w: f64) -> Result<M> {
    a.blend(b, w)
}

/// Canny thresholds from `cfg`, or the image mean and twice the mean.
pub fn canny_thresholds(image: &GrayImage, cfg: &GeoConfig) -> (f64, f64) {
    match (cfg.canny_low, cfg.canny_high) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            let m = image.mean();
            (m, 2.0 * m)
        }
    }
}

/// Builds propagation weights from `image` edges and an optional residual.
pub fn weight_maps_for(
    image: &GrayImage,
    cfg: &GeoConfig,
    residual: Option<&[[f64; 4]]>,
) -> Result<EdgeWeightMaps> {
    let (lo, hi) = canny_thresholds(image, cfg);
    let edges = canny(image, lo, hi)?;
    build_weight_maps(&edges, residual, cfg.base_w)
}

/// Immutable refinement context: intrinsics, configuration and weight maps.
#[derive(Debug, Clone)]
pub struct Refiner {
    intr: CameraIntrinsics,
    cfg: GeoConfig,
    weights: EdgeWeightMaps,
}

impl Refiner {
    pub fn new(
        image: &GrayImage,
        intr: CameraIntrinsics,
        cfg: GeoConfig,
        residual: Option<&[[f64; 4]]>,
    ) -> Result<Self> {
        cfg.validate()?;
        let weights = weight_maps_for(image, &cfg, residual)?;
        Self::with_weights(weights, intr, cfg)
    }

    pub fn with_weights(
        weights: EdgeWeightMaps,
        intr: CameraIntrinsics,
        cfg: GeoConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        intr.validate()?;
        Ok(Self { intr, cfg, weights })
    }

    pub fn config(&self) -> &GeoConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &EdgeWeightMaps {
        &self.weights
    }

    pub fn step(&self, depth: &DepthMap, normals: &NormalMap) -> Result<(DepthMap, NormalMap)> {
        check_shape(depth.dims(), normals.dims())?;
        check_shape(depth.dims(), self.weights.dims())?;
        let cfg = &self.cfg;

        let geo_normals = depth_to_normals(depth, &self.intr, cfg)?;
        let fused_normals = normals.blend(&geo_normals, cfg.blend_w)?;
        let normals_out = propagate_normals(
            &fused_normals,
            &self.weights,
            cfg.t_prop,
            cfg.recursive_within_pass,
        )?;

        let geo_depth = normals_to_depth(depth, normals, &self.intr, cfg)?;
        let fused_depth = depth.blend(&geo_depth, cfg.blend_w)?;
        let (w, h) = fused_depth.dims();
        let grid = Grid::new(w, h, 1, fused_depth.values().to_vec())?;
        let smoothed = propagate_masked(
            &grid,
            &self.weights,
            Some(fused_depth.mask()),
            cfg.t_prop,
            cfg.recursive_within_pass,
        )?;
        let depth_out = fused_depth.with_values(smoothed.into_data())?;
        Ok((depth_out, normals_out))
    }

    pub fn iterate(&self, depth: &DepthMap, normals: &NormalMap) -> Result<(DepthMap, NormalMap)> {
        self.iterate_with(depth, normals, |_, _, _| {})
    }

    /// Runs `cfg.iterations` steps, calling `observe(k, depth, normals)` after
    /// step `k` (1-based).
    pub fn iterate_with(
        &self,
        depth: &DepthMap,
        normals: &NormalMap,
        mut observe: impl FnMut(usize, &DepthMap, &NormalMap),
    ) -> Result<(DepthMap, NormalMap)> {
        let mut state = self.step(depth, normals)?;
        observe(1, &state.0, &state.1);
        for k in 2..=self.cfg.iterations {
            state = self.step(&state.0, &state.1)?;
            observe(k, &state.0, &state.1);
        }
        Ok(state)
    }
}

/// One refinement step with weight maps built from `image`.
pub fn geonet_step(
    depth: &DepthMap,
    normals: &NormalMap,
    image: &GrayImage,
    intr: &CameraIntrinsics,
    cfg: &GeoConfig,
) -> Result<(DepthMap, NormalMap)> {
    Refiner::new(image, *intr, *cfg, None)?.step(depth, normals)
}

/// `cfg.iterations` refinement steps; weight maps are built once.
pub fn geonet_iterate(
    depth: &DepthMap,
    normals: &NormalMap,
    image: &GrayImage,
    intr: &CameraIntrinsics,
    cfg: &GeoConfig,
) -> Result<(DepthMap, NormalMap)> {
    Refiner::new(image, *intr, *cfg, None)?.iterate(depth, normals)
}
