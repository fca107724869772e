use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RasterBand, RasterStack};
use crate::error::{Error, Result};

/// Header of a raw planar raster. The payload lives next to the sidecar
/// with the extension replaced by `.raw`: band-major, row-major within a
/// band, `f32` little-endian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub byte_order: String,
    pub bands: Vec<String>,
}

impl Sidecar {
    pub fn new(width: usize, height: usize, bands: Vec<String>) -> Self {
        Sidecar { width, height, dtype: "f32".into(), byte_order: "LE".into(), bands }
    }

    fn check(&self) -> Result<()> {
        if self.dtype != "f32" || self.byte_order != "LE" {
            return Err(Error::Format(format!(
                "unsupported sample type {}/{}, only f32/LE",
                self.dtype, self.byte_order
            )));
        }
        if self.width == 0 || self.height == 0 || self.bands.is_empty() {
            return Err(Error::Format("sidecar declares an empty raster".into()));
        }
        Ok(())
    }

    fn payload_len(&self) -> usize {
        self.width * self.height * self.bands.len() * 4
    }
}

pub fn payload_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("raw")
}

pub fn read_sidecar(path: &Path, bytes: &[u8]) -> Result<Sidecar> {
    let header: Sidecar = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    header.check()?;
    Ok(header)
}

pub(super) fn load_sidecar_raw(
    path: &Path,
    bytes: &[u8],
    allow_nan: bool,
) -> Result<(usize, usize, Vec<(String, Vec<f64>)>)> {
    let header = read_sidecar(path, bytes)?;
    let raw_path = payload_path(path);
    let payload = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    if payload.len() != header.payload_len() {
        return Err(Error::SizeMismatch { expected: header.payload_len(), actual: payload.len() });
    }
    let n = header.width * header.height;
    let mut bands = Vec::with_capacity(header.bands.len());
    for (b, name) in header.bands.iter().enumerate() {
        let chunk = &payload[b * n * 4..(b + 1) * n * 4];
        let mut values = Vec::with_capacity(n);
        for (i, word) in chunk.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([word[0], word[1], word[2], word[3]]) as f64;
            if !v.is_finite() && !(allow_nan && v.is_nan()) {
                return Err(Error::NonFinite { band: name.clone(), index: i });
            }
            values.push(v);
        }
        bands.push((name.clone(), values));
    }
    Ok((header.width, header.height, bands))
}

pub(super) fn load_sidecar(path: &Path, bytes: &[u8], allow_nan: bool) -> Result<RasterStack> {
    let (w, h, bands) = load_sidecar_raw(path, bytes, allow_nan)?;
    let bands = bands
        .into_iter()
        .map(|(name, values)| RasterBand::new(w, h, values, name))
        .collect::<Result<Vec<_>>>()?;
    RasterStack::new(bands)
}

/// Writes `bands` (NaN allowed) as `path` + `path.raw`. Values are narrowed to `f32`.
pub fn save_raster(path: impl AsRef<Path>, width: usize, height: usize, bands: &[(&str, &[f64])]) -> Result<()> {
    let path = path.as_ref();
    for (name, values) in bands {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "band '{name}' holds {} values for {width}x{height}",
                values.len()
            )));
        }
    }
    let header = Sidecar::new(width, height, bands.iter().map(|(n, _)| n.to_string()).collect());
    header.check()?;
    let mut payload = Vec::with_capacity(header.payload_len());
    for (_, values) in bands {
        for &v in values.iter() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))?;
    let raw = payload_path(path);
    fs::write(&raw, payload).map_err(|e| Error::io(&raw, e))
}

impl RasterStack {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bands: Vec<(&str, &[f64])> = self.bands().iter().map(|b| (b.name(), b.values())).collect();
        save_raster(path, self.width(), self.height(), &bands)
    }
}

#[cfg(test)]
mod tests {
    use super::super::load_raster;
    use super::*;

    fn write_raw(dir: &Path, header: &str, payload: &[u8]) -> PathBuf {
        let p = dir.join("img.json");
        fs::write(&p, header).unwrap();
        fs::write(dir.join("img.raw"), payload).unwrap();
        p
    }

    #[test]
    fn three_pixel_nir_band() {
        let dir = tempfile::tempdir().unwrap();
        let payload: Vec<u8> = [1.0f32, 2.5, -3.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let p = write_raw(
            dir.path(),
            r#"{"width":3,"height":1,"dtype":"f32","byte_order":"LE","bands":["nir"]}"#,
            &payload,
        );
        let stack = load_raster(&p).unwrap();
        assert_eq!((stack.width(), stack.height()), (3, 1));
        assert_eq!(stack.band("nir").unwrap().values(), &[1.0, 2.5, -3.0]);
    }

    #[test]
    fn short_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(
            dir.path(),
            r#"{"width":2,"height":2,"dtype":"f32","byte_order":"LE","bands":["b"]}"#,
            &[0u8; 12],
        );
        assert!(matches!(load_raster(&p), Err(Error::SizeMismatch { expected: 16, actual: 12 })));
    }

    #[test]
    fn nan_rejected_unless_sentinel_allowed() {
        let dir = tempfile::tempdir().unwrap();
        let payload: Vec<u8> = [f32::NAN, 1.0].iter().flat_map(|v| v.to_le_bytes()).collect();
        let p = write_raw(
            dir.path(),
            r#"{"width":2,"height":1,"dtype":"f32","byte_order":"LE","bands":["alpha"]}"#,
            &payload,
        );
        assert!(matches!(load_raster(&p), Err(Error::NonFinite { index: 0, .. })));
        let (_, _, bands) = super::super::load_raster_with_nan(&p).unwrap();
        assert!(bands[0].1[0].is_nan());
    }

    #[test]
    fn missing_file_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_raster(dir.path().join("nope.json")), Err(Error::Io { .. })));
        let p = dir.path().join("x.bin");
        fs::write(&p, b"GIF89a").unwrap();
        assert!(matches!(load_raster(&p), Err(Error::UnsupportedMagic(_))));
    }

    #[test]
    fn stack_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = RasterBand::from_fn(4, 3, "red", |x, y| (x * y) as f64 * 0.25).unwrap();
        let b = RasterBand::from_fn(4, 3, "swir", |x, _| x as f64).unwrap();
        let stack = RasterStack::new(vec![a, b]).unwrap();
        let p = dir.path().join("s.json");
        stack.save(&p).unwrap();
        assert_eq!(load_raster(&p).unwrap(), stack);
    }
}
