//! Water masks from spectrum thresholds and from NDWI, plus majority filtering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::{FMap, SpectrumCurve};
use crate::error::{Error, Result};
use crate::holder::AlphaMap;
use crate::raster_io::RasterBand;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    water: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, water: Vec<bool>) -> Result<Self> {
        if water.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} mask pixels for {width}x{height}", water.len())));
        }
        Ok(SegmentationMask { width, height, water })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        SegmentationMask { width, height, water: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn water(&self) -> &[bool] {
        &self.water
    }

    pub fn water_count(&self) -> usize {
        self.water.iter().filter(|&&w| w).count()
    }

    #[inline]
    pub fn is_water(&self, x: usize, y: usize) -> bool {
        self.water[y * self.width + x]
    }
}

/// Rectangle in the `(alpha, f)` plane; both bounds are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl ThresholdSpec {
    pub fn new(alpha_lo: f64, alpha_hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        let t = ThresholdSpec { alpha_lo, alpha_hi, f_lo, f_hi };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_lo < self.alpha_hi) || !(self.f_lo < self.f_hi) {
            return Err(Error::InvalidArgument(format!("empty threshold rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, alpha: f64, f: f64) -> bool {
        self.alpha_lo < alpha && alpha < self.alpha_hi && self.f_lo < f && f < self.f_hi
    }
}

/// Water where the pixel's `(alpha, f)` falls strictly inside the rectangle.
pub fn threshold_classify(am: &AlphaMap, fm: &FMap, t: &ThresholdSpec) -> Result<SegmentationMask> {
    t.validate()?;
    if am.width != fm.width || am.height != fm.height {
        return Err(Error::DimensionMismatch(format!(
            "alpha map {}x{} vs f map {}x{}",
            am.width, am.height, fm.width, fm.height
        )));
    }
    let water = (0..am.len())
        .into_par_iter()
        .map(|i| match (am.get(i), fm.get(i)) {
            (Some(a), Some(f)) => t.contains(a, f),
            _ => false,
        })
        .collect();
    SegmentationMask::new(am.width, am.height, water)
}

/// Normalized difference index with NaN marking pixels whose denominator is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexBand {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// `(red - swir) / (red + swir)`, the red/short-wave-infrared water index.
pub fn ndwi(red: &RasterBand, swir: &RasterBand) -> Result<IndexBand> {
    if red.width() != swir.width() || red.height() != swir.height() {
        return Err(Error::DimensionMismatch(format!(
            "red {}x{} vs swir {}x{}",
            red.width(),
            red.height(),
            swir.width(),
            swir.height()
        )));
    }
    let values = red
        .values()
        .par_iter()
        .zip(swir.values())
        .map(|(&r, &s)| {
            let den = r + s;
            if den == 0.0 {
                f64::NAN
            } else {
                (r - s) / den
            }
        })
        .collect();
    Ok(IndexBand { width: red.width(), height: red.height(), values })
}

/// Water where the index is at least zero; flagged pixels are not water.
pub fn ndwi_classify(index: &IndexBand) -> SegmentationMask {
    let water = index.values.iter().map(|&v| v >= 0.0).collect();
    SegmentationMask { width: index.width, height: index.height, water }
}

/// Majority vote over a `kernel`x`kernel` window, truncated at the borders.
///
/// Even-sized truncated windows that tie keep the pixel's own class.
pub fn majority_filter(mask: &SegmentationMask, kernel: usize) -> Result<SegmentationMask> {
    if kernel < 3 || kernel % 2 == 0 {
        return Err(Error::InvalidArgument(format!("majority kernel must be odd and >= 3, got {kernel}")));
    }
    let (w, h) = (mask.width, mask.height);
    let stride = w + 1;
    let mut sat = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0;
        for x in 0..w {
            row += mask.water[y * w + x] as u32;
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    let r = kernel / 2;
    let mut water = vec![false; w * h];
    water.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for (x, o) in out.iter_mut().enumerate() {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let n = ((x1 - x0) * (y1 - y0)) as u32;
            let count = sat[y1 * stride + x1] + sat[y0 * stride + x0] - sat[y0 * stride + x1] - sat[y1 * stride + x0];
            *o = match (2 * count).cmp(&n) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => mask.water[y * w + x],
            };
        }
    });
    Ok(SegmentationMask { width: w, height: h, water })
}

/// A threshold proposal derived from a dip in a coarse spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdCandidate {
    pub spec: ThresholdSpec,
    /// Alpha and f at the bottom of the dip.
    pub dip_alpha: f64,
    pub dip_f: f64,
    /// Height of the lower of the two shoulders above the dip.
    pub depth: f64,
}

/// Proposes thresholds from interior local minima of the curve.
///
/// For each dip the candidate keeps alphas right of the point where the curve
/// has climbed half way back up the right shoulder, up to the largest alpha, and
/// f values below the right shoulder's peak. Candidates come deepest first.
pub fn suggest_thresholds(curve: &SpectrumCurve) -> Vec<ThresholdCandidate> {
    let pts = &curve.points;
    let mut out = Vec::new();
    if pts.len() < 3 {
        return out;
    }
    let alpha_max = pts[pts.len() - 1].alpha;
    for i in 1..pts.len() - 1 {
        let p = pts[i];
        if !(p.f < pts[i - 1].f && p.f <= pts[i + 1].f) {
            continue;
        }
        let left_peak = pts[..i].iter().map(|q| q.f).fold(f64::NEG_INFINITY, f64::max);
        let (right_idx, right_peak) = pts[i + 1..]
            .iter()
            .enumerate()
            .map(|(k, q)| (i + 1 + k, q.f))
            .fold((i + 1, f64::NEG_INFINITY), |acc, (k, f)| if f > acc.1 { (k, f) } else { acc });
        let depth = left_peak.min(right_peak) - p.f;
        if depth <= 0.0 {
            continue;
        }
        let half = p.f + 0.5 * (right_peak - p.f);
        let mut alpha_lo = pts[right_idx].alpha;
        for k in i..right_idx {
            let (a, b) = (pts[k], pts[k + 1]);
            if a.f < half && b.f >= half {
                alpha_lo = a.alpha + (b.alpha - a.alpha) * (half - a.f) / (b.f - a.f);
                break;
            }
        }
        if let Ok(spec) = ThresholdSpec::new(alpha_lo, alpha_max, 0.0, right_peak) {
            out.push(ThresholdCandidate { spec, dip_alpha: p.alpha, dip_f: p.f, depth });
        }
    }
    out.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    out
}
