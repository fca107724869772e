use std::fs;
use std::path::Path;

use super::RasterBand;
use crate::error::{Error, Result};
use crate::segment::SegmentationMask;

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic: String = bytes.iter().take(2).map(|&b| b as char).collect();
        return Err(Error::UnsupportedMagic(magic));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("PGM header field out of range".into()))?;
    }
    // exactly one whitespace byte separates the header from the samples
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("PGM header not terminated".into()));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM header {width}x{height} maxval {maxval}")));
    }
    Ok(Header { width: width as usize, height: height as usize, maxval, data_start: pos + 1 })
}

fn decode_samples(bytes: &[u8]) -> Result<(Header, Vec<u16>)> {
    let h = parse_header(bytes)?;
    let n = h.width * h.height;
    let bps = if h.maxval < 256 { 1 } else { 2 };
    let data = &bytes[h.data_start..];
    if data.len() != n * bps {
        return Err(Error::SizeMismatch { expected: n * bps, actual: data.len() });
    }
    let samples = if bps == 1 {
        data.iter().map(|&b| b as u16).collect()
    } else {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok((h, samples))
}

pub(super) fn decode_pgm(bytes: &[u8], name: &str) -> Result<RasterBand> {
    let (h, samples) = decode_samples(bytes)?;
    RasterBand::new(h.width, h.height, samples.into_iter().map(f64::from).collect(), name)
}

/// Writes a mask as 8-bit PGM, water = 255, everything else = 0.
pub fn save_mask(mask: &SegmentationMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.water().iter().map(|&w| if w { 255u8 } else { 0 }));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a PGM mask; any nonzero sample is water.
pub fn load_mask(path: impl AsRef<Path>) -> Result<SegmentationMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, samples) = decode_samples(&bytes)?;
    SegmentationMask::new(h.width, h.height, samples.into_iter().map(|s| s != 0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_2x2_without_scaling() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 128, 255, 64]);
        let band = decode_pgm(&bytes, "g").unwrap();
        assert_eq!(band.values(), &[0.0, 128.0, 255.0, 64.0]);
    }

    #[test]
    fn sixteen_bit_big_endian_and_comments() {
        let mut bytes = b"P5 # comment\n2 1\n65535\n".to_vec();
        bytes.extend([0x01, 0x02, 0xff, 0xff]);
        let band = decode_pgm(&bytes, "g").unwrap();
        assert_eq!(band.values(), &[258.0, 65535.0]);
    }

    #[test]
    fn rejects_ascii_pgm_and_short_payload() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0", "g"), Err(Error::UnsupportedMagic(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\0\0\0", "g"), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn mask_bytes_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let mask = SegmentationMask::new(2, 1, vec![true, false]).unwrap();
        save_mask(&mask, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[bytes.len() - 2..], &[255, 0]);
        assert_eq!(load_mask(&p).unwrap(), mask);

        let empty = SegmentationMask::new(3, 2, vec![false; 6]).unwrap();
        save_mask(&empty, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes[bytes.len() - 6..].iter().all(|&b| b == 0));
    }
}
