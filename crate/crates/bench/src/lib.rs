//! Fixtures shared by the benchmarks in `benches/`.

use geonet::{
    generate, render_shading, CameraIntrinsics, DepthMap, GrayImage, NormalMap, PlaneParams,
    SceneKind, SceneSpec,
};

/// A slanted plane with 2% depth noise, its analytic normals and shading.
pub struct Fixture {
    pub intrinsics: CameraIntrinsics,
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub image: GrayImage,
}

pub fn plane_fixture(width: usize, height: usize) -> Fixture {
    let f = 525.0 * width as f64 / 640.0;
    let intrinsics = CameraIntrinsics::new(
        f,
        f,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
    )
    .expect("valid intrinsics");
    let spec = SceneSpec {
        kind: SceneKind::Plane(PlaneParams {
            normal: [0.3, -0.2, -1.0],
            offset: 2.5,
        }),
        width,
        height,
        intrinsics,
        noise_sigma_rel: 0.02,
        seed: 1,
    };
    let scene = generate(&spec).expect("visible plane");
    Fixture {
        intrinsics,
        depth: scene.observed_depth(&spec).expect("noise"),
        image: render_shading(&scene.depth, &scene.normals).expect("shading"),
        normals: scene.normals,
    }
}
