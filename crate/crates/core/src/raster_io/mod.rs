//! Raster bands, calibration, analysis windows and the on-disk formats.
//!
//! Two raster formats are read:
//!
//! * a JSON sidecar (`name.json`) describing a raw planar `f32` little-endian
//!   payload stored next to it as `name.raw`;
//! * binary PGM (`P5`), 8 or 16 bit. Sample values are used as-is.
//!
//! Masks are written as PGM with water = 255, and spectra as CSV.

mod csv;
mod pgm;
mod sidecar;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use self::csv::{load_spectrum_csv, load_tau_csv, save_spectrum_csv, save_tau_csv, spectrum_to_csv};
pub use self::pgm::{load_mask, save_mask};
pub use self::sidecar::{payload_path, read_sidecar, save_raster, Sidecar};

/// One band of intensities on a rectangular grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterBand {
    width: usize,
    height: usize,
    values: Vec<f64>,
    name: String,
}

impl RasterBand {
    /// Builds a band, rejecting empty grids, misaligned buffers and non-finite values.
    pub fn new(width: usize, height: usize, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("band '{name}' has an empty grid")));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "band '{name}' is {width}x{height} but holds {} values",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { band: name, index });
        }
        Ok(RasterBand { width, height, values, name })
    }

    pub fn filled(width: usize, height: usize, value: f64, name: impl Into<String>) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], name)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        name: impl Into<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values, name)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|v| v * factor).collect(),
            self.name.clone(),
        )
    }

    /// Copies the `w`x`h` block whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::OutOfBounds(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            values.extend_from_slice(&self.values[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self::new(w, h, values, self.name.clone())
    }
}

/// Bands sharing one grid, with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterStack {
    bands: Vec<RasterBand>,
}

impl RasterStack {
    pub fn new(bands: Vec<RasterBand>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::InvalidArgument("raster stack needs at least one band".into()))?;
        let (w, h) = (first.width, first.height);
        let mut seen = HashSet::new();
        for b in &bands {
            if b.width != w || b.height != h {
                return Err(Error::DimensionMismatch(format!(
                    "band '{}' is {}x{}, expected {w}x{h}",
                    b.name, b.width, b.height
                )));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate band name '{}'", b.name)));
            }
        }
        Ok(RasterStack { bands })
    }

    pub fn single(band: RasterBand) -> Self {
        RasterStack { bands: vec![band] }
    }

    pub fn width(&self) -> usize {
        self.bands[0].width
    }

    pub fn height(&self) -> usize {
        self.bands[0].height
    }

    pub fn bands(&self) -> &[RasterBand] {
        &self.bands
    }

    pub fn into_bands(self) -> Vec<RasterBand> {
        self.bands
    }

    pub fn band(&self, name: &str) -> Result<&RasterBand> {
        self.bands
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no band named '{name}'")))
    }
}

/// The square core region being analyzed plus the margin around it that
/// window sums may read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AnalysisWindow {
    pub core_x: usize,
    pub core_y: usize,
    pub core_size: usize,
    pub pad: usize,
}

impl AnalysisWindow {
    /// Core of `core_size` centred in a `width`x`height` raster.
    pub fn centered(width: usize, height: usize, core_size: usize, pad: usize) -> Result<Self> {
        if core_size > width || core_size > height {
            return Err(Error::OutOfBounds(format!(
                "core {core_size} does not fit in {width}x{height}"
            )));
        }
        let w = AnalysisWindow {
            core_x: (width - core_size) / 2,
            core_y: (height - core_size) / 2,
            core_size,
            pad,
        };
        w.validate(width, height)?;
        Ok(w)
    }

    /// Core that is the whole raster minus `pad` pixels on every side.
    pub fn inset(width: usize, height: usize, pad: usize) -> Result<Self> {
        if width != height {
            return Err(Error::DimensionMismatch(format!("analysis needs a square raster, got {width}x{height}")));
        }
        if 2 * pad >= width {
            return Err(Error::OutOfBounds(format!("pad {pad} leaves no core in {width}x{height}")));
        }
        Ok(AnalysisWindow { core_x: pad, core_y: pad, core_size: width - 2 * pad, pad })
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.core_size == 0 {
            return Err(Error::InvalidArgument("core size must be positive".into()));
        }
        let fits = self.core_x >= self.pad
            && self.core_y >= self.pad
            && self.core_x + self.core_size + self.pad <= width
            && self.core_y + self.core_size + self.pad <= height;
        if !fits {
            return Err(Error::OutOfBounds(format!(
                "core {0}x{0} at ({1},{2}) with pad {3} exceeds {width}x{height}",
                self.core_size, self.core_x, self.core_y, self.pad
            )));
        }
        Ok(())
    }

    /// Side of the padded block `extract_window` returns.
    pub fn padded_size(&self) -> usize {
        self.core_size + 2 * self.pad
    }

    /// The same window expressed in the coordinates of the extracted block.
    pub fn local(&self) -> Self {
        AnalysisWindow { core_x: self.pad, core_y: self.pad, ..*self }
    }
}

/// Loads a raster from a JSON sidecar or a binary PGM, chosen by content.
pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterStack> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match bytes.first() {
        Some(b'P') => pgm::decode_pgm(&bytes, &band_name_from_path(path)).map(RasterStack::single),
        Some(b'{') => sidecar::load_sidecar(path, &bytes, false),
        _ => {
            let magic: String = bytes.iter().take(2).map(|&b| b as char).collect();
            Err(Error::UnsupportedMagic(magic))
        }
    }
}

/// Like [`load_raster`] for sidecar rasters, but admits NaN as the
/// "no value" sentinel used by exported alpha and f maps.
pub fn load_raster_with_nan(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<(String, Vec<f64>)>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    sidecar::load_sidecar_raw(path, &bytes, true)
}

fn band_name_from_path(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("band").to_string()
}

/// Affine radiometric transform `gain * v + offset`, clamped at zero.
pub fn calibrate(band: &RasterBand, gain: f64, offset: f64) -> Result<RasterBand> {
    if gain == 0.0 || !gain.is_finite() || !offset.is_finite() {
        return Err(Error::InvalidArgument(format!("calibration gain {gain} / offset {offset}")));
    }
    RasterBand::new(
        band.width,
        band.height,
        band.values.iter().map(|v| (gain * v + offset).max(0.0)).collect(),
        band.name.clone(),
    )
}

/// Cuts the padded block around `window.core`; the core ends up at `(pad, pad)`.
pub fn extract_window(stack: &RasterStack, window: &AnalysisWindow) -> Result<RasterStack> {
    window.validate(stack.width(), stack.height())?;
    let side = window.padded_size();
    let x0 = window.core_x - window.pad;
    let y0 = window.core_y - window.pad;
    let bands = stack
        .bands
        .iter()
        .map(|b| b.crop(x0, y0, side, side))
        .collect::<Result<Vec<_>>>()?;
    RasterStack::new(bands)
}
