//! 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).

use std::fs;
use std::path::Path;

use aftnet::{Error, Result};

pub const MAXVAL: u32 = 65535;

/// Quantises `v / scale` clamped to `[0, 1]`.
pub fn quantise(v: f64, scale: f64) -> u16 {
    let x = if scale > 0.0 { v / scale } else { 0.0 };
    (x.clamp(0.0, 1.0) * MAXVAL as f64).round() as u16
}

pub fn encode(pixels: &[u16], h: usize, w: usize) -> Result<Vec<u8>> {
    if pixels.len() != h * w {
        return Err(Error::Dimension(format!("{} pixels for a {}x{} image", pixels.len(), h, w)));
    }
    let mut out = format!("P5\n{} {}\n{}\n", w, h, MAXVAL).into_bytes();
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    Ok(out)
}

pub fn write(path: impl AsRef<Path>, pixels: &[u16], h: usize, w: usize) -> Result<()> {
    fs::write(path, encode(pixels, h, w)?)?;
    Ok(())
}

/// Returns `(pixels, height, width)`.
#[cfg(test)]
pub fn decode(bytes: &[u8]) -> Result<(Vec<u16>, usize, usize)> {
    let bad = |m: &str| Error::Format(format!("PGM: {}", m));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?.to_string());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, max) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if max != MAXVAL as usize {
        return Err(bad("expected 16-bit samples"));
    }
    let body = bytes.get(pos..).ok_or_else(|| bad("missing pixel data"))?;
    if body.len() != 2 * w * h {
        return Err(bad("pixel data has the wrong length"));
    }
    Ok((body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect(), h, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let px = vec![0, 1, 256, 65535, 1234, 7];
        let (back, h, w) = decode(&encode(&px, 2, 3).unwrap()).unwrap();
        assert_eq!((back, h, w), (px, 2, 3));
    }

    #[test]
    fn quantise_clamps() {
        assert_eq!(quantise(-1.0, 1.0), 0);
        assert_eq!(quantise(2.0, 1.0), 65535);
        assert_eq!(quantise(0.5, 1.0), 32768);
        assert_eq!(quantise(1.0, 0.0), 0);
    }

    #[test]
    fn rejects_8_bit() {
        assert!(decode(b"P5\n1 1\n255\n\x00").is_err());
    }
}
