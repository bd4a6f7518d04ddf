//! Netpbm reading (binary PGM, ASCII and binary PPM) and writing.
//!
//! Images load as `1×H×W` tensors in `[0, 1]`; colour is reduced to
//! luminance `0.299 R + 0.587 G + 0.114 B`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_uint(bytes: &[u8], pos: usize, what: &str) -> Result<(u32, usize)> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Format(format!("expected {what} at byte {start}")));
    }
    let s = std::str::from_utf8(&bytes[start..end]).expect("ASCII digits");
    let v = s
        .parse::<u32>()
        .map_err(|_| Error::Format(format!("{what} `{s}` out of range")))?;
    Ok((v, end))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::Truncated {
            offset: 0,
            needed: 2,
            available: bytes.len(),
        });
    }
    let magic = [bytes[0], bytes[1]];
    if !matches!(&magic, b"P5" | b"P3" | b"P6") {
        return Err(Error::Format(format!(
            "unsupported magic number {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let (width, pos) = read_uint(bytes, 2, "width")?;
    let (height, pos) = read_uint(bytes, pos, "height")?;
    let (maxval, pos) = read_uint(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty image {width}×{height}")));
    }
    if !(1..=255).contains(&maxval) {
        return Err(Error::Format(format!(
            "maxval {maxval} unsupported (8-bit only)"
        )));
    }
    // A single whitespace byte separates the header from raster data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("missing whitespace after header".into()));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval,
        data_start: pos + 1,
    })
}

/// Decodes P5, P3 or P6 bytes into a `1×H×W` tensor.
pub fn decode_netpbm(bytes: &[u8]) -> Result<Tensor> {
    let hdr = parse_header(bytes)?;
    let n = hdr
        .width
        .checked_mul(hdr.height)
        .filter(|n| *n <= 1 << 28)
        .ok_or_else(|| Error::Format("image too large".into()))?;
    let channels = if &hdr.magic == b"P5" { 1 } else { 3 };
    let samples: Vec<u32> = if &hdr.magic == b"P3" {
        let mut pos = hdr.data_start;
        let mut v = Vec::with_capacity((n * 3).min(bytes.len()));
        for _ in 0..n * 3 {
            let (s, next) = read_uint(bytes, pos, "sample").map_err(|e| match e {
                Error::Format(_) if skip_space_and_comments(bytes, pos) >= bytes.len() => {
                    Error::Truncated {
                        offset: pos,
                        needed: 1,
                        available: 0,
                    }
                }
                other => other,
            })?;
            v.push(s);
            pos = next;
        }
        v
    } else {
        let need = n * channels;
        let available = bytes.len() - hdr.data_start;
        if available < need {
            return Err(Error::Truncated {
                offset: hdr.data_start,
                needed: need,
                available,
            });
        }
        bytes[hdr.data_start..hdr.data_start + need]
            .iter()
            .map(|&b| b as u32)
            .collect()
    };
    if let Some(s) = samples.iter().find(|&&s| s > hdr.maxval) {
        return Err(Error::Format(format!(
            "sample {s} exceeds maxval {}",
            hdr.maxval
        )));
    }
    let scale = 1.0 / hdr.maxval as f32;
    let data: Vec<f32> = if channels == 1 {
        samples.iter().map(|&s| s as f32 * scale).collect()
    } else {
        samples
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) * scale)
            .collect()
    };
    Tensor::new(&[1, hdr.height, hdr.width], data)
}

fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Encodes a `1×H×W` tensor as binary PGM, `round(v·255)` clamped.
pub fn encode_pgm(t: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = t.chw()?;
    if c != 1 {
        return Err(Error::shape(format!("PGM needs one channel, got {c}")));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(t.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Encodes a `3×H×W` tensor (R, G, B planes in `[0, 1]`) as binary PPM.
pub fn encode_ppm(t: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = t.chw()?;
    if c != 3 {
        return Err(Error::shape(format!("PPM needs three channels, got {c}")));
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    let d = t.data();
    for i in 0..plane {
        out.extend([
            quantize(d[i]),
            quantize(d[plane + i]),
            quantize(d[2 * plane + i]),
        ]);
    }
    Ok(out)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_netpbm(&bytes)
}

pub fn save_image(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(t)?).map_err(|e| Error::io(path, e))
}

pub fn save_rgb_image(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(t)?).map_err(|e| Error::io(path, e))
}
