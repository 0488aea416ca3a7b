//! PNG and 16-bit depth PGM export/import.
//!
//! Depth PGMs store millimetres as little-endian `u16` after a binary `P5`
//! header with maxval 65535. Zero means "no depth".

use std::io::Cursor;

use image::{ImageFormat, RgbImage};
use thiserror::Error;

use super::composite::RgbFrame;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("png encoding failed: {0}")]
    Png(#[from] image::ImageError),
    #[error("malformed PGM: {0}")]
    Pgm(String),
}

pub fn encode_png(frame: &RgbFrame) -> Result<Vec<u8>, ImageIoError> {
    let raw: Vec<u8> = frame.pixels.iter().flatten().copied().collect();
    let img = RgbImage::from_raw(frame.width as u32, frame.height as u32, raw)
        .ok_or_else(|| ImageIoError::Pgm("frame buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbFrame, ImageIoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    Ok(RgbFrame { width: w as usize, height: h as usize, pixels })
}

/// Converts metres to millimetres; non-finite or non-positive depths become 0.
pub fn depth_to_mm(depth_m: &[f32]) -> Vec<u16> {
    depth_m
        .iter()
        .map(|&d| if d.is_finite() && d > 0.0 { (d as f64 * 1000.0).round().min(65535.0) as u16 } else { 0 })
        .collect()
}

pub fn encode_depth_pgm(width: usize, height: usize, mm: &[u16]) -> Vec<u8> {
    assert_eq!(mm.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(mm.len() * 2);
    for v in mm {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_depth_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>), ImageIoError> {
    let bad = |m: &str| ImageIoError::Pgm(m.to_string());
    // Header: magic, width, height, maxval, each whitespace-separated, then
    // exactly one whitespace byte before the raster.
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ascii header"))?.to_string());
    }
    if fields[0] != "P5" {
        return Err(bad("expected P5 magic"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 65535 {
        return Err(bad("expected 16-bit maxval 65535"));
    }
    let data = bytes.get(i + 1..).ok_or_else(|| bad("missing raster"))?;
    if data.len() != w * h * 2 {
        return Err(bad("raster size mismatch"));
    }
    let mm = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    Ok((w, h, mm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_and_layout() {
        let mm = vec![0u16, 1, 1000, 65535, 258, 7];
        let b = encode_depth_pgm(3, 2, &mm);
        assert!(b.starts_with(b"P5\n3 2\n65535\n"));
        assert_eq!(&b[b.len() - 4..], &[2, 1, 7, 0]);
        assert_eq!(decode_depth_pgm(&b).unwrap(), (3, 2, mm));
    }

    #[test]
    fn depth_conversion() {
        assert_eq!(depth_to_mm(&[1.2345, f32::INFINITY, -1.0, 0.0]), vec![1235, 0, 0, 0]);
    }

    #[test]
    fn png_round_trip() {
        let f = RgbFrame { width: 3, height: 1, pixels: vec![[1, 2, 3], [4, 5, 6], [7, 8, 9]] };
        assert_eq!(decode_png(&encode_png(&f).unwrap()).unwrap(), f);
    }
}
