//! CXT1 binary tensor files.
//!
//! Layout: magic `CXT1`, `u8` rank, rank x `u32` little-endian dims, then
//! the elements as interleaved little-endian `f32` (re, im) pairs in
//! row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"CXT1";

pub fn encode_cxt1<T: Real, W: Write>(t: &ComplexTensor<T>, mut w: W) -> Result<()> {
    if t.ndim() > u8::MAX as usize {
        return Err(Error::Format(format!("rank {} too large for CXT1", t.ndim())));
    }
    w.write_all(MAGIC)?;
    w.write_all(&[t.ndim() as u8])?;
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {} exceeds u32", d)))?;
        w.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.numel() * 8);
    for i in 0..t.numel() {
        let (a, b) = t.get(i);
        buf.extend_from_slice(&(a.f64() as f32).to_le_bytes());
        buf.extend_from_slice(&(b.f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn decode_cxt1<T: Real, R: Read>(mut r: R) -> Result<ComplexTensor<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", magic)));
    }
    let mut nd = [0u8; 1];
    r.read_exact(&mut nd)?;
    let mut shape = Vec::with_capacity(nd[0] as usize);
    for _ in 0..nd[0] {
        let mut d = [0u8; 4];
        r.read_exact(&mut d)?;
        shape.push(u32::from_le_bytes(d) as usize);
    }
    let n: usize = shape.iter().product();
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated CXT1 payload: {}", e)))?;
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for pair in bytes.chunks_exact(8) {
        re.push(T::of(f32::from_le_bytes(pair[0..4].try_into().unwrap()) as f64));
        im.push(T::of(f32::from_le_bytes(pair[4..8].try_into().unwrap()) as f64));
    }
    ComplexTensor::new(re, im, &shape)
}

pub fn write_cxt1<T: Real>(path: impl AsRef<Path>, t: &ComplexTensor<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_cxt1(t, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_cxt1<T: Real>(path: impl AsRef<Path>) -> Result<ComplexTensor<T>> {
    decode_cxt1(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let t = ComplexTensor::<f32>::new(vec![1.0, 2.0], vec![-1.0, 0.5], &[2, 1]).unwrap();
        let mut buf = Vec::new();
        encode_cxt1(&t, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CXT1");
        assert_eq!(buf[4], 2);
        assert_eq!(&buf[5..13], &[2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&buf[13..17], &1.0f32.to_le_bytes());
        assert_eq!(&buf[17..21], &(-1.0f32).to_le_bytes());
        assert_eq!(buf.len(), 13 + 16);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(decode_cxt1::<f32, _>(&b"CXT2\x00"[..]).is_err());
        assert!(decode_cxt1::<f32, _>(&b"CXT1\x01\x03\x00\x00\x00\x00"[..]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(dims in proptest::collection::vec(1usize..4, 0..4), seed in any::<u64>()) {
            let n: usize = dims.iter().product();
            let re: Vec<f32> = (0..n).map(|i| ((seed.wrapping_mul(i as u64 + 1) % 1000) as f32) * 0.37 - 100.0).collect();
            let im: Vec<f32> = re.iter().map(|v| -v * 1.5).collect();
            let t = ComplexTensor::new(re, im, &dims).unwrap();
            let mut buf = Vec::new();
            encode_cxt1(&t, &mut buf).unwrap();
            let back: ComplexTensor<f32> = decode_cxt1(&buf[..]).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
