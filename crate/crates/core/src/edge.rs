//! Edge-aware refinement: Canny edges, propagation weight maps, and the
//! four-direction recursive propagator.
//!
//! A sweep blends every pixel with its predecessor along the sweep
//! direction: `S = (1 - w) · pred + w · current`. A weight of 1 blocks
//! propagation into that pixel; smaller weights smooth more.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{check_shape, GeoError, Result};
use crate::map::NormalMap;

/// Grayscale intensities in `[0, 255]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GeoError::EmptyMap);
        }
        if data.len() != width * height {
            return Err(GeoError::InvalidInput(format!(
                "image {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !(0.0..=255.0).contains(*x)) {
            return Err(GeoError::InvalidInput(format!("intensity {x} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&b| f64::from(b)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Rounds to the nearest 8-bit level.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|x| x.round() as u8).collect()
    }
}

/// Binary edge mask produced by [`canny`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    edges: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, edges: Vec<bool>) -> Result<Self> {
        if edges.len() != width * height {
            return Err(GeoError::InvalidInput("edge mask size mismatch".into()));
        }
        Ok(Self {
            width,
            height,
            edges,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edges: vec![false; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn edges(&self) -> &[bool] {
        &self.edges
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    #[inline]
    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.edges[v * self.width + u]
    }
}

const GAUSS_SIGMA: f64 = 1.4;
const GAUSS_RADIUS: usize = 2;

fn gaussian_kernel() -> [f64; 2 * GAUSS_RADIUS + 1] {
    let mut k = [0.0; 2 * GAUSS_RADIUS + 1];
    for (i, w) in k.iter_mut().enumerate() {
        let x = i as f64 - GAUSS_RADIUS as f64;
        *w = (-x * x / (2.0 * GAUSS_SIGMA * GAUSS_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Clamped lookup, replicating the border.
#[inline]
fn at(data: &[f64], w: usize, h: usize, u: isize, v: isize) -> f64 {
    let u = u.clamp(0, w as isize - 1) as usize;
    let v = v.clamp(0, h as isize - 1) as usize;
    data[v * w + u]
}

fn gaussian_blur(img: &GrayImage) -> Vec<f64> {
    let (w, h) = img.dims();
    let k = gaussian_kernel();
    let r = GAUSS_RADIUS as isize;
    let mut tmp = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            tmp[v * w + u] = (-r..=r)
                .map(|d| k[(d + r) as usize] * at(&img.data, w, h, u as isize + d, v as isize))
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            out[v * w + u] = (-r..=r)
                .map(|d| k[(d + r) as usize] * at(&tmp, w, h, u as isize, v as isize + d))
                .sum();
        }
    }
    out
}

fn sobel(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for v in 0..h as isize {
        for u in 0..w as isize {
            let p = |du: isize, dv: isize| at(data, w, h, u + du, v + dv);
            let i = v as usize * w + u as usize;
            gx[i] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[i] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }
    (gx, gy)
}

/// Thins the gradient magnitude to local maxima across the edge.
///
/// The gradient angle is quantized to 0°, 45°, 90° or 135°. A pixel survives
/// when it is strictly larger than its neighbor on the negative side and at
/// least as large as the one on the positive side, so plateaus of width two
/// keep a single pixel. Border pixels are always suppressed.
fn non_maximum_suppression(mag: &[f64], gx: &[f64], gy: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    if w < 3 || h < 3 {
        return out;
    }
    for v in 1..h - 1 {
        for u in 1..w - 1 {
            let i = v * w + u;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (before, after) = if !(22.5..157.5).contains(&angle) {
                (mag[i - 1], mag[i + 1])
            } else if angle < 67.5 {
                (mag[i - w - 1], mag[i + w + 1])
            } else if angle < 112.5 {
                (mag[i - w], mag[i + w])
            } else {
                (mag[i - w + 1], mag[i + w - 1])
            };
            if m > before && m >= after {
                out[i] = m;
            }
        }
    }
    out
}

/// Double-threshold hysteresis: pixels above `high` seed edges that grow
/// through 8-connected pixels above `low`.
fn hysteresis(thin: &[f64], w: usize, h: usize, low: f64, high: f64) -> Vec<bool> {
    let mut out = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if thin[i] > high && !out[i] {
            out[i] = true;
            queue.push_back(i);
            while let Some(j) = queue.pop_front() {
                let (u, v) = ((j % w) as isize, (j / w) as isize);
                for dv in -1..=1 {
                    for du in -1..=1 {
                        let (nu, nv) = (u + du, v + dv);
                        if nu < 0 || nv < 0 || nu >= w as isize || nv >= h as isize {
                            continue;
                        }
                        let k = nv as usize * w + nu as usize;
                        if !out[k] && thin[k] > low {
                            out[k] = true;
                            queue.push_back(k);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Canny edge detector on an 8-bit-range image.
///
/// 5×5 Gaussian (σ = 1.4), Sobel gradients with L2 magnitude, non-maximum
/// suppression, hysteresis. A pixel is strong when its thinned magnitude
/// exceeds `high` and weak when it exceeds `low`, so zero-gradient pixels are
/// never edges.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> Result<EdgeMap> {
    if img.data.is_empty() {
        return Err(GeoError::EmptyMap);
    }
    if !(low.is_finite() && high.is_finite() && low <= high) {
        return Err(GeoError::InvalidInput(format!(
            "canny thresholds need low <= high, got ({low}, {high})"
        )));
    }
    let (w, h) = img.dims();
    let blurred = gaussian_blur(img);
    let (gx, gy) = sobel(&blurred, w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let thin = non_maximum_suppression(&mag, &gx, &gy, w, h);
    Ok(EdgeMap {
        width: w,
        height: h,
        edges: hysteresis(&thin, w, h, low, high),
    })
}

/// Sweep directions, in cascade order. The discriminant is the weight channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight = 0,
    RightToLeft = 1,
    TopToBottom = 2,
    BottomToTop = 3,
}

impl Direction {
    pub const CASCADE: [Direction; 4] = [
        Direction::LeftToRight,
        Direction::RightToLeft,
        Direction::TopToBottom,
        Direction::BottomToTop,
    ];

    pub fn channel(self) -> usize {
        self as usize
    }
}

/// Per-pixel propagation weights in `[0, 1]`, one channel per [`Direction`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMaps {
    width: usize,
    height: usize,
    w: Vec<[f64; 4]>,
}

impl EdgeWeightMaps {
    pub fn new(width: usize, height: usize, w: Vec<[f64; 4]>) -> Result<Self> {
        if w.len() != width * height {
            return Err(GeoError::InvalidInput("weight map size mismatch".into()));
        }
        if w.iter().flatten().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(GeoError::InvalidInput("propagation weights must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, w })
    }

    pub fn uniform(width: usize, height: usize, weight: f64) -> Result<Self> {
        Self::new(width, height, vec![[weight; 4]; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn weights(&self) -> &[[f64; 4]] {
        &self.w
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, dir: Direction) -> f64 {
        self.w[v * self.width + u][dir.channel()]
    }
}

/// Fuses a binary edge mask with an optional residual:
/// `w_k = clamp(base_w + edge · (1 - base_w) + residual_k, 0, 1)`.
///
/// `residual` holds one `[f64; 4]` per pixel in [`Direction`] channel order.
pub fn build_weight_maps(
    edges: &EdgeMap,
    residual: Option<&[[f64; 4]]>,
    base_w: f64,
) -> Result<EdgeWeightMaps> {
    if !(0.0..=1.0).contains(&base_w) {
        return Err(GeoError::InvalidInput(format!("base_w must lie in [0, 1], got {base_w}")));
    }
    let (w, h) = edges.dims();
    if let Some(r) = residual {
        if r.len() != w * h {
            return Err(GeoError::InvalidInput(format!(
                "residual has {} pixels, edge map has {}",
                r.len(),
                w * h
            )));
        }
    }
    let maps = edges
        .edges
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let fused = if e { base_w + (1.0 - base_w) } else { base_w };
            let mut out = [fused; 4];
            if let Some(r) = residual {
                for (o, d) in out.iter_mut().zip(r[i]) {
                    *o += d;
                }
            }
            out.map(|x| x.clamp(0.0, 1.0))
        })
        .collect();
    EdgeWeightMaps::new(w, h, maps)
}

/// `width × height × channels` signal, pixel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(GeoError::EmptyMap);
        }
        if data.len() != width * height * channels {
            return Err(GeoError::InvalidInput(format!(
                "grid {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> f64 {
        self.data[(v * self.width + u) * self.channels + c]
    }
}

/// Runs `t_prop` four-sweep cascades over every pixel.
pub fn propagate(
    x: &Grid,
    w: &EdgeWeightMaps,
    t_prop: usize,
    recursive_within_pass: bool,
) -> Result<Grid> {
    propagate_masked(x, w, None, t_prop, recursive_within_pass)
}

/// Like [`propagate`], but pixels outside `mask` are frozen and act as sweep
/// boundaries: neither updated nor used as a predecessor.
pub fn propagate_masked(
    x: &Grid,
    w: &EdgeWeightMaps,
    mask: Option<&[bool]>,
    t_prop: usize,
    recursive_within_pass: bool,
) -> Result<Grid> {
    check_propagation_inputs(x, w, mask, t_prop)?;
    let mut out = x.clone();
    for _ in 0..t_prop {
        cascade(&mut out, w, mask, recursive_within_pass);
    }
    Ok(out)
}

fn check_propagation_inputs(
    x: &Grid,
    w: &EdgeWeightMaps,
    mask: Option<&[bool]>,
    t_prop: usize,
) -> Result<()> {
    check_shape(w.dims(), x.dims())?;
    if let Some(m) = mask {
        if m.len() != x.width * x.height {
            return Err(GeoError::InvalidInput("mask size mismatch".into()));
        }
    }
    if t_prop < 1 {
        return Err(GeoError::InvalidInput("t_prop must be >= 1".into()));
    }
    Ok(())
}

/// Propagates a normal map channel-wise and re-normalizes after every cascade.
pub fn propagate_normals(
    normals: &NormalMap,
    w: &EdgeWeightMaps,
    t_prop: usize,
    recursive_within_pass: bool,
) -> Result<NormalMap> {
    let (width, height) = normals.dims();
    let data = normals.vectors().iter().flat_map(|n| [n.x, n.y, n.z]).collect();
    let mut grid = Grid::new(width, height, 3, data)?;
    let mask = normals.mask();
    check_propagation_inputs(&grid, w, Some(mask), t_prop)?;
    for _ in 0..t_prop {
        cascade(&mut grid, w, Some(mask), recursive_within_pass);
        for (px, ok) in grid.data.chunks_exact_mut(3).zip(mask) {
            if !ok {
                continue;
            }
            let norm = (px[0] * px[0] + px[1] * px[1] + px[2] * px[2]).sqrt();
            if norm > 0.0 {
                px.iter_mut().for_each(|c| *c /= norm);
            }
        }
    }
    let vectors = grid
        .data
        .chunks_exact(3)
        .map(|c| nalgebra::Vector3::new(c[0], c[1], c[2]))
        .collect();
    NormalMap::new(width, height, vectors, mask.to_vec())
}

fn cascade(x: &mut Grid, w: &EdgeWeightMaps, mask: Option<&[bool]>, recursive: bool) {
    for dir in Direction::CASCADE {
        match dir {
            Direction::LeftToRight | Direction::RightToLeft => {
                horizontal_sweep(x, w, mask, dir, recursive)
            }
            Direction::TopToBottom | Direction::BottomToTop => {
                vertical_sweep(x, w, mask, dir, recursive)
            }
        }
    }
}

/// `(1 - w) · pred + w · cur`, clamped to the interval spanned by the two
/// operands so that rounding never leaves their convex hull.
#[inline]
fn mix(pred: f64, cur: f64, w: f64) -> f64 {
    ((1.0 - w) * pred + w * cur).clamp(pred.min(cur), pred.max(cur))
}

#[inline]
fn valid(mask: Option<&[bool]>, i: usize) -> bool {
    mask.is_none_or(|m| m[i])
}

fn horizontal_sweep(
    x: &mut Grid,
    w: &EdgeWeightMaps,
    mask: Option<&[bool]>,
    dir: Direction,
    recursive: bool,
) {
    let (width, c) = (x.width, x.channels);
    let ch = dir.channel();
    x.data
        .par_chunks_mut(width * c)
        .enumerate()
        .for_each(|(v, row)| {
            let forward = dir == Direction::LeftToRight;
            let mut pred: Option<usize> = None;
            // Pre-sweep values of the predecessor and of the current pixel.
            let mut pred_orig = vec![0.0; c];
            let mut orig = vec![0.0; c];
            for step in 0..width {
                let u = if forward { step } else { width - 1 - step };
                let i = v * width + u;
                if !valid(mask, i) {
                    pred = None;
                    continue;
                }
                let cur = u * c;
                orig.copy_from_slice(&row[cur..cur + c]);
                if let Some(p) = pred {
                    let wt = w.w[i][ch];
                    for k in 0..c {
                        let n = if recursive { row[p * c + k] } else { pred_orig[k] };
                        row[cur + k] = mix(n, orig[k], wt);
                    }
                }
                pred = Some(u);
                std::mem::swap(&mut pred_orig, &mut orig);
            }
        });
}

fn vertical_sweep(
    x: &mut Grid,
    w: &EdgeWeightMaps,
    mask: Option<&[bool]>,
    dir: Direction,
    recursive: bool,
) {
    let (width, height, c) = (x.width, x.height, x.channels);
    let stride = width * c;
    let ch = dir.channel();
    let rows: Vec<usize> = match dir {
        Direction::TopToBottom => (0..height).collect(),
        _ => (0..height).rev().collect(),
    };
    // Pre-sweep copy of the previous scanline, for the non-recursive form.
    let mut prev_orig = vec![0.0; stride];
    for (n, &v) in rows.iter().enumerate() {
        let cur_orig = x.data[v * stride..(v + 1) * stride].to_vec();
        if n > 0 {
            let p = rows[n - 1];
            for u in 0..width {
                let i = v * width + u;
                let j = p * width + u;
                if !(valid(mask, i) && valid(mask, j)) {
                    continue;
                }
                let wt = w.w[i][ch];
                for k in 0..c {
                    let pred = if recursive {
                        x.data[p * stride + u * c + k]
                    } else {
                        prev_orig[u * c + k]
                    };
                    x.data[v * stride + u * c + k] = mix(pred, cur_orig[u * c + k], wt);
                }
            }
        }
        prev_orig = cur_orig;
    }
}
