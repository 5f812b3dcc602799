#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geonet::{CameraIntrinsics, PlaneParams, SceneKind, SceneSpec};

pub fn geonet<I, S>(dir: &Path, args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_geonet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to spawn geonet")
}

/// Runs `geonet` and panics with its stderr on failure.
pub fn geonet_ok(dir: &Path, args: &[&str]) {
    let out = geonet(dir, args);
    assert!(
        out.status.success(),
        "geonet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn intrinsics(w: usize, h: usize) -> CameraIntrinsics {
    CameraIntrinsics::new(60.0, 60.0, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0).unwrap()
}

pub fn plane_spec(w: usize, h: usize, noise: f64, seed: u64) -> SceneSpec {
    SceneSpec {
        kind: SceneKind::Plane(PlaneParams {
            normal: [0.25, -0.15, -1.0],
            offset: 2.0,
        }),
        width: w,
        height: h,
        intrinsics: intrinsics(w, h),
        noise_sigma_rel: noise,
        seed,
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

/// Writes `spec.json` and `intr.json` into `dir` and runs `synth`, producing
/// `depth.pfm` (noisy), `gt.pfm`, `normals.pfm` and `image.pgm`.
pub fn synth_scene(dir: &Path, spec: &SceneSpec) {
    write_json(&dir.join("spec.json"), spec);
    write_json(&dir.join("intr.json"), &spec.intrinsics);
    geonet_ok(
        dir,
        &[
            "synth",
            "--spec",
            "spec.json",
            "--out-depth",
            "depth.pfm",
            "--out-normals",
            "normals.pfm",
            "--out-image",
            "image.pgm",
            "--out-gt-depth",
            "gt.pfm",
        ],
    );
}

pub fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
