use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geonet::pfm;
use geonet::{CameraIntrinsics, DepthMap, GeoConfig, GrayImage, NormalMap};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {what} file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {what} JSON in {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let intr: CameraIntrinsics = read_json(path, "intrinsics")?;
    intr.validate()
        .with_context(|| format!("invalid intrinsics in {}", path.display()))?;
    Ok(intr)
}

/// Missing file means defaults; missing fields fall back individually.
pub fn read_config(path: Option<&Path>) -> Result<GeoConfig> {
    let cfg = match path {
        Some(p) => read_json(p, "config")?,
        None => GeoConfig::default(),
    };
    cfg.validate().context("invalid config")?;
    Ok(cfg)
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    pfm::read_depth(open(path)?).with_context(|| format!("cannot read depth map {}", path.display()))
}

pub fn read_normals(path: &Path) -> Result<NormalMap> {
    pfm::read_normals(open(path)?)
        .with_context(|| format!("cannot read normal map {}", path.display()))
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    pfm::write_depth(depth, create(path)?)
        .with_context(|| format!("cannot write depth map {}", path.display()))
}

pub fn write_normals(path: &Path, normals: &NormalMap) -> Result<()> {
    pfm::write_normals(normals, create(path)?)
        .with_context(|| format!("cannot write normal map {}", path.display()))
}

pub fn read_residual(path: &Path, width: usize, height: usize) -> Result<Vec<[f64; 4]>> {
    pfm::read_residual_weights(open(path)?, width, height)
        .with_context(|| format!("cannot read residual weights {}", path.display()))
}

fn check_dims(path: &Path, found: (u32, u32), expected: (usize, usize)) -> Result<()> {
    let found = (found.0 as usize, found.1 as usize);
    if found != expected {
        bail!(
            "shape mismatch: {} is {}x{}, expected {}x{}",
            path.display(),
            found.0,
            found.1,
            expected.0,
            expected.1
        );
    }
    Ok(())
}

pub fn read_gray(path: &Path, expected: (usize, usize)) -> Result<GrayImage> {
    let img = image::open(path)
        .with_context(|| format!("cannot read image {}", path.display()))?
        .into_luma8();
    check_dims(path, img.dimensions(), expected)?;
    Ok(GrayImage::from_u8(expected.0, expected.1, img.as_raw())?)
}

pub fn read_rgb(path: &Path, expected: (usize, usize)) -> Result<Vec<[u8; 3]>> {
    let img = image::open(path)
        .with_context(|| format!("cannot read image {}", path.display()))?
        .into_rgb8();
    check_dims(path, img.dimensions(), expected)?;
    Ok(img.pixels().map(|p| p.0).collect())
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    let (w, h) = img.dims();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, img.to_u8())
        .context("image buffer size mismatch")?;
    buf.save(path)
        .with_context(|| format!("cannot write image {}", path.display()))
}

/// `<out>.json` next to an output file.
pub fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_ply(
    path: &Path,
    cloud: &geonet::PointCloud,
    colors: Option<&[[u8; 3]]>,
) -> Result<()> {
    geonet::export_ply(cloud, colors, create(path)?)
        .with_context(|| format!("cannot write point cloud {}", path.display()))
}
