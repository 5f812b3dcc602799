//! Geometric refinement of depth maps and surface normals.
//!
//! The crate converts depth to normals with a per-pixel least-squares plane
//! fit, converts normals back to depth with cosine-kernel regression over
//! tangent-plane votes, refines either signal with a four-direction
//! edge-aware recursive propagator, and scores results with 2D depth/normal
//! metrics plus a 3D geometric metric computed on unprojected point clouds.
//!
//! Pixel coordinates are zero-based `(u, v) = (column, row)` at pixel
//! centers. Intrinsics must follow the same convention.

pub mod camera;
pub mod config;
pub mod d2n;
pub mod edge;
pub mod error;
pub mod map;
pub mod metrics;
pub mod n2d;
pub mod pfm;
pub mod pipeline;
pub mod synth;
pub mod tv;

pub use camera::{export_ply, unproject, CameraIntrinsics, PointCloud};
pub use config::GeoConfig;
pub use d2n::{depth_to_normals, fit_normal_ls, orient_to_camera, tangent_neighborhood, Degenerate};
pub use edge::{
    build_weight_maps, canny, propagate, propagate_masked, Direction, EdgeMap, EdgeWeightMaps,
    GrayImage, Grid,
};
pub use error::{GeoError, Result};
pub use map::{DepthMap, NormalMap, Pixel};
pub use metrics::{depth_metrics, normal_metrics, three_dgm, DepthMetrics, NormalMetrics};
pub use n2d::{coplanar_neighborhood, normals_to_depth, vote_depth};
pub use pipeline::{blend, geonet_iterate, geonet_step, Blend, Refiner};
pub use synth::{add_noise, generate, render_shading, PlaneParams, Scene, SceneKind, SceneSpec};
pub use tv::tv_denoise_normals;

pub use nalgebra::Vector3;
