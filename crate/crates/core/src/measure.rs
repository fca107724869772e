//! The sum measure over rectangular windows and box meshes.
//!
//! A measure assigns a nonnegative mass to every axis-aligned rectangle of a
//! raster. [`MeasureField`] is the sum measure, backed by a summed-area
//! table; other measures plug in through the [`Measure`] trait.

use crate::error::{Error, Result};
use crate::raster_io::{AnalysisWindow, RasterBand};

/// Box widths of the standard mesh ladder.
pub const DEFAULT_MESH_WIDTHS: [usize; 9] = [4, 8, 16, 32, 64, 128, 256, 512, 1024];

/// Mesh widths from the standard ladder that tile a square of side `side`.
pub fn mesh_widths_for(side: usize) -> Vec<usize> {
    DEFAULT_MESH_WIDTHS.iter().copied().filter(|&w| w <= side && side % w == 0).collect()
}

pub trait Measure: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Unnormalized mass of the `w`x`h` rectangle at `(x, y)`. Callers keep it in bounds.
    fn rect_mass(&self, x: usize, y: usize, w: usize, h: usize) -> f64;
    /// Mass of the whole raster; every normalized quantity divides by it.
    fn total_mass(&self) -> f64;
}

/// Square sub-region of a raster, usually the core of an [`AnalysisWindow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl Region {
    pub fn whole(side: usize) -> Self {
        Region { x: 0, y: 0, size: side }
    }
}

impl From<&AnalysisWindow> for Region {
    fn from(w: &AnalysisWindow) -> Self {
        Region { x: w.core_x, y: w.core_y, size: w.core_size }
    }
}

/// Sum measure of a band.
///
/// Rectangle sums come from a summed-area table. A second table counts
/// nonzero pixels so that empty windows are exactly zero, and sums that would
/// lose more than ~20 bits to cancellation are recomputed directly.
pub struct MeasureField<'a> {
    band: &'a RasterBand,
    sat: Vec<f64>,
    nonzero: Vec<u32>,
    total_mass: f64,
}

const CANCELLATION_LIMIT: f64 = 1.0 / (1u64 << 20) as f64;

impl<'a> MeasureField<'a> {
    pub fn new(band: &'a RasterBand) -> Result<Self> {
        let (w, h) = (band.width(), band.height());
        if let Some(i) = band.values().iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "band '{}' has negative mass at pixel {i}; calibrate first",
                band.name()
            )));
        }
        let mut total_mass = 0.0;
        for &v in band.values() {
            total_mass += v;
        }
        if total_mass <= 0.0 {
            return Err(Error::Degenerate(format!("band '{}' carries no mass", band.name())));
        }

        let stride = w + 1;
        let mut sat = vec![0.0; stride * (h + 1)];
        let mut nonzero = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            let mut row_nz = 0u32;
            for x in 0..w {
                let v = band.get(x, y);
                row += v;
                row_nz += (v != 0.0) as u32;
                sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
                nonzero[(y + 1) * stride + x + 1] = nonzero[y * stride + x + 1] + row_nz;
            }
        }
        Ok(MeasureField { band, sat, nonzero, total_mass })
    }

    pub fn band(&self) -> &RasterBand {
        self.band
    }

    fn direct_sum(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        let mut s = 0.0;
        for yy in y..y + h {
            for xx in x..x + w {
                s += self.band.get(xx, yy);
            }
        }
        s
    }
}

impl Measure for MeasureField<'_> {
    fn width(&self) -> usize {
        self.band.width()
    }

    fn height(&self) -> usize {
        self.band.height()
    }

    fn rect_mass(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        let stride = self.band.width() + 1;
        let (a, b, c, d) = (y * stride + x, y * stride + x + w, (y + h) * stride + x, (y + h) * stride + x + w);
        let count = self.nonzero[d] + self.nonzero[a] - self.nonzero[b] - self.nonzero[c];
        if count == 0 {
            return 0.0;
        }
        let s = self.sat[d] - self.sat[b] - self.sat[c] + self.sat[a];
        if s <= self.sat[d] * CANCELLATION_LIMIT {
            self.direct_sum(x, y, w, h)
        } else {
            s
        }
    }

    fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// Normalized mass of the `(2*halfwidth+1)`-wide square centred at `(cx, cy)`.
pub fn window_measure<M: Measure + ?Sized>(field: &M, cx: usize, cy: usize, halfwidth: usize) -> Result<f64> {
    if cx < halfwidth || cy < halfwidth || cx + halfwidth >= field.width() || cy + halfwidth >= field.height() {
        return Err(Error::OutOfBounds(format!(
            "window of half-width {halfwidth} at ({cx},{cy}) leaves the {}x{} raster",
            field.width(),
            field.height()
        )));
    }
    let side = 2 * halfwidth + 1;
    Ok(field.rect_mass(cx - halfwidth, cy - halfwidth, side, side) / field.total_mass())
}

/// Normalized box masses of an r-mesh laid over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub box_width: usize,
    /// Boxes per side.
    pub cells: usize,
    /// Row-major; empty boxes hold exactly 0.
    pub masses: Vec<f64>,
}

pub fn box_grid<M: Measure + ?Sized>(field: &M, region: Region, box_width: usize) -> Result<BoxGrid> {
    if region.size == 0 || region.x + region.size > field.width() || region.y + region.size > field.height() {
        return Err(Error::OutOfBounds(format!("region {region:?} is outside the raster")));
    }
    if box_width == 0 || !box_width.is_power_of_two() || region.size % box_width != 0 {
        return Err(Error::InvalidArgument(format!(
            "box width {box_width} does not tile a region of side {}",
            region.size
        )));
    }
    let cells = region.size / box_width;
    let total = field.total_mass();
    let mut masses = Vec::with_capacity(cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let m = field.rect_mass(region.x + i * box_width, region.y + j * box_width, box_width, box_width);
            masses.push(m / total);
        }
    }
    Ok(BoxGrid { box_width, cells, masses })
}
