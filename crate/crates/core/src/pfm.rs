//! Portable float map (PFM) I/O.
//!
//! `Pf` holds one channel (depth), `PF` three interleaved channels
//! (normals). A negative scale marks little-endian payloads, a positive one
//! big-endian. Rows are stored bottom-to-top, so the first stored row is the
//! bottom image row.
//!
//! Invalid pixels are written as `0.0` (depth) or `(0, 0, 0)` (normals).
//! On read, non-finite values, non-positive depths and zero-length normals
//! are marked invalid.

use std::io::{Read, Write};

use nalgebra::Vector3;
use thiserror::Error;

use crate::map::{DepthMap, NormalMap};

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("unsupported format {0:?}: expected \"Pf\" or \"PF\"")]
    UnsupportedFormat(String),

    #[error("malformed PFM header: {0}")]
    MalformedHeader(String),

    #[error("truncated PFM payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("expected a {expected}-channel PFM, found {found} channel(s)")]
    ChannelCount { expected: usize, found: usize },

    #[error("PFM is {found:?}, expected {expected:?} (width, height)")]
    Dimensions {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("PFM I/O: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, PfmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

/// Decoded PFM payload in top-to-bottom, pixel-interleaved order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

/// A PFM file interpreted by channel count.
#[derive(Debug, Clone, PartialEq)]
pub enum PfmMap {
    Depth(DepthMap),
    Normals(NormalMap),
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    endian: Endian,
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let mut pos = 0;
    let mut token = |what: &str| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PfmError::MalformedHeader(format!("missing {what}")));
        }
        String::from_utf8(bytes[start..pos].to_vec())
            .map_err(|_| PfmError::MalformedHeader(format!("non-ASCII {what}")))
    };
    let magic = token("magic")?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(PfmError::UnsupportedFormat(other.to_string())),
    };
    let dim = |s: String, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| PfmError::MalformedHeader(format!("bad {what} {s:?}")))
    };
    let width = dim(token("width")?, "width")?;
    let height = dim(token("height")?, "height")?;
    let scale_tok = token("scale")?;
    let scale: f64 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| PfmError::MalformedHeader(format!("bad scale {scale_tok:?}")))?;
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PfmError::MalformedHeader("missing separator after scale".into()));
    }
    let endian = if scale < 0.0 { Endian::Little } else { Endian::Big };
    Ok((
        Header {
            channels,
            width,
            height,
            endian,
        },
        pos + 1,
    ))
}

/// Reads any `Pf`/`PF` file into top-to-bottom order.
pub fn read_raw<R: Read>(mut reader: R) -> Result<RawPfm> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let (h, offset) = parse_header(&bytes)?;
    let count = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(h.channels))
        .ok_or_else(|| PfmError::MalformedHeader("dimensions overflow".into()))?;
    let expected = count * 4;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(PfmError::Truncated {
            expected,
            got: payload.len(),
        });
    }
    let row_len = h.width * h.channels;
    let mut data = vec![0f32; count];
    for (k, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let x = match h.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        };
        let (stored_row, col) = (k / row_len, k % row_len);
        let row = h.height - 1 - stored_row;
        data[row * row_len + col] = x;
    }
    Ok(RawPfm {
        width: h.width,
        height: h.height,
        channels: h.channels,
        data,
    })
}

/// Writes top-to-bottom `data` as a little-endian PFM.
pub fn write_raw<W: Write>(raw: &RawPfm, mut writer: W) -> Result<()> {
    let magic = match raw.channels {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(PfmError::ChannelCount {
                expected: 3,
                found: n,
            })
        }
    };
    if raw.data.len() != raw.width * raw.height * raw.channels {
        return Err(PfmError::MalformedHeader("payload size does not match dimensions".into()));
    }
    write!(writer, "{magic}\n{} {}\n-1.0\n", raw.width, raw.height)?;
    let row_len = raw.width * raw.channels;
    let mut buf = Vec::with_capacity(raw.data.len() * 4);
    for row in (0..raw.height).rev() {
        for x in &raw.data[row * row_len..(row + 1) * row_len] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    writer.write_all(&buf)?;
    writer.flush()?;
    Ok(())
}

pub fn read_pfm<R: Read>(reader: R) -> Result<PfmMap> {
    let raw = read_raw(reader)?;
    match raw.channels {
        1 => Ok(PfmMap::Depth(depth_from_raw(&raw)?)),
        _ => Ok(PfmMap::Normals(normals_from_raw(&raw)?)),
    }
}

pub fn write_pfm<W: Write>(map: &PfmMap, writer: W) -> Result<()> {
    match map {
        PfmMap::Depth(d) => write_depth(d, writer),
        PfmMap::Normals(n) => write_normals(n, writer),
    }
}

fn depth_from_raw(raw: &RawPfm) -> Result<DepthMap> {
    if raw.channels != 1 {
        return Err(PfmError::ChannelCount {
            expected: 1,
            found: raw.channels,
        });
    }
    let z = raw.data.iter().map(|&x| f64::from(x)).collect();
    DepthMap::from_values(raw.width, raw.height, z)
        .map_err(|e| PfmError::MalformedHeader(e.to_string()))
}

fn normals_from_raw(raw: &RawPfm) -> Result<NormalMap> {
    if raw.channels != 3 {
        return Err(PfmError::ChannelCount {
            expected: 3,
            found: raw.channels,
        });
    }
    // Stored normals are already unit length up to f32 rounding; keep the
    // values as read and only drop entries that cannot be normals.
    let mut valid = Vec::with_capacity(raw.width * raw.height);
    let n = raw
        .data
        .chunks_exact(3)
        .map(|c| {
            let v = Vector3::new(f64::from(c[0]), f64::from(c[1]), f64::from(c[2]));
            let norm = v.norm();
            let ok = norm.is_finite() && norm > 0.0;
            valid.push(ok);
            if !ok {
                Vector3::zeros()
            } else if (norm - 1.0).abs() <= crate::map::UNIT_TOLERANCE {
                v
            } else {
                v / norm
            }
        })
        .collect();
    NormalMap::new(raw.width, raw.height, n, valid)
        .map_err(|e| PfmError::MalformedHeader(e.to_string()))
}

pub fn read_depth<R: Read>(reader: R) -> Result<DepthMap> {
    depth_from_raw(&read_raw(reader)?)
}

pub fn read_normals<R: Read>(reader: R) -> Result<NormalMap> {
    normals_from_raw(&read_raw(reader)?)
}

pub fn write_depth<W: Write>(depth: &DepthMap, writer: W) -> Result<()> {
    let data = depth
        .values()
        .iter()
        .zip(depth.mask())
        .map(|(z, ok)| if *ok { *z as f32 } else { 0.0 })
        .collect();
    write_raw(
        &RawPfm {
            width: depth.width(),
            height: depth.height(),
            channels: 1,
            data,
        },
        writer,
    )
}

pub fn write_normals<W: Write>(normals: &NormalMap, writer: W) -> Result<()> {
    let data = normals
        .vectors()
        .iter()
        .zip(normals.mask())
        .flat_map(|(n, ok)| if *ok { [n.x as f32, n.y as f32, n.z as f32] } else { [0.0; 3] })
        .collect();
    write_raw(
        &RawPfm {
            width: normals.width(),
            height: normals.height(),
            channels: 3,
            data,
        },
        writer,
    )
}

/// Reads residual propagation weights: a single-channel PFM of height `4·H`
/// whose four `H`-row bands (top to bottom) are the L→R, R→L, T→B and B→T
/// channels.
pub fn read_residual_weights<R: Read>(
    reader: R,
    width: usize,
    height: usize,
) -> Result<Vec<[f64; 4]>> {
    let raw = read_raw(reader)?;
    if raw.channels != 1 {
        return Err(PfmError::ChannelCount {
            expected: 1,
            found: raw.channels,
        });
    }
    if raw.width != width || raw.height != 4 * height {
        return Err(PfmError::Dimensions {
            expected: (width, 4 * height),
            found: (raw.width, raw.height),
        });
    }
    let plane = width * height;
    Ok((0..plane)
        .map(|i| std::array::from_fn(|k| f64::from(raw.data[k * plane + i])))
        .collect())
}

/// Inverse of [`read_residual_weights`].
pub fn write_residual_weights<W: Write>(
    residual: &[[f64; 4]],
    width: usize,
    height: usize,
    writer: W,
) -> Result<()> {
    if residual.len() != width * height {
        return Err(PfmError::MalformedHeader("residual size does not match dimensions".into()));
    }
    let data = (0..4)
        .flat_map(|k| residual.iter().map(move |r| r[k] as f32))
        .collect();
    write_raw(
        &RawPfm {
            width,
            height: 4 * height,
            channels: 1,
            data,
        },
        writer,
    )
}
