//! Coarse multifractal spectrum: bin exponents into classes, measure each
//! class's box-counting dimension, and map the resulting curve back onto pixels.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holder::{AlphaMap, PreparedAbscissa};

pub const DEFAULT_CLASSES: usize = 30;

/// Alpha ranges narrower than this collapse into a single class.
pub const DEGENERATE_RANGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Coarse,
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub alpha: f64,
    pub f: f64,
    /// Pixels supporting the point; zero for Legendre spectra.
    pub count: u64,
}

/// Sampled `(alpha, f(alpha))` pairs in increasing alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub points: Vec<SpectrumPoint>,
    pub kind: SpectrumKind,
}

impl SpectrumCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point with the largest f.
    pub fn peak(&self) -> Option<SpectrumPoint> {
        self.points.iter().copied().max_by(|a, b| a.f.total_cmp(&b.f))
    }

    /// Piecewise-linear f at `alpha`, clamped to the end knots.
    pub fn interpolate(&self, alpha: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts[pts.len() - 1];
        if alpha <= first.alpha {
            return Some(first.f);
        }
        if alpha >= last.alpha {
            return Some(last.f);
        }
        let i = pts.partition_point(|p| p.alpha < alpha);
        let hi = pts[i];
        if hi.alpha == alpha {
            return Some(hi.f);
        }
        let lo = pts[i - 1];
        Some(lo.f + (hi.f - lo.f) * (alpha - lo.alpha) / (hi.alpha - lo.alpha))
    }
}

/// Assignment of valid pixels to equal-width alpha classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPartition {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Number of classes actually used: the requested count, or 1 for a degenerate range.
    pub classes: usize,
    /// Zero-based class per pixel; `None` for invalid pixels.
    pub class_of: Vec<Option<u16>>,
}

impl ClassPartition {
    pub fn is_degenerate(&self) -> bool {
        self.alpha_max - self.alpha_min < DEGENERATE_RANGE
    }

    pub fn class_width(&self) -> f64 {
        (self.alpha_max - self.alpha_min) / self.classes as f64
    }

    /// Midpoint of zero-based class `s`.
    pub fn class_mid(&self, s: usize) -> f64 {
        if self.is_degenerate() {
            return 0.5 * (self.alpha_min + self.alpha_max);
        }
        self.alpha_min + (s as f64 + 0.5) * self.class_width()
    }

    pub fn members(&self, s: usize) -> Vec<bool> {
        self.class_of.iter().map(|c| *c == Some(s as u16)).collect()
    }

    /// Pixels in the lower half of the first class and the upper half of the last.
    pub fn edge_halves(&self, am: &AlphaMap) -> (Vec<bool>, Vec<bool>) {
        let half = 0.5 * self.class_width();
        let lo = self.alpha_min + half;
        let hi = self.alpha_max - half;
        let first = (0..am.len()).map(|i| am.get(i).is_some_and(|a| a <= lo)).collect();
        let last = (0..am.len()).map(|i| am.get(i).is_some_and(|a| a >= hi)).collect();
        (first, last)
    }
}

/// Splits the valid alpha range into `classes` equal bins.
///
/// Values on a shared boundary go to the lower class; `alpha_max` goes to the last one.
pub fn bin_alpha(am: &AlphaMap, classes: usize) -> Result<ClassPartition> {
    if classes == 0 || classes > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!("class count {classes}")));
    }
    let (alpha_min, alpha_max) = am
        .range()
        .ok_or_else(|| Error::Degenerate("alpha map has no valid pixels".into()))?;
    let degenerate = alpha_max - alpha_min < DEGENERATE_RANGE;
    let classes = if degenerate { 1 } else { classes };
    let delta = (alpha_max - alpha_min) / classes as f64;
    let class_of = (0..am.len())
        .into_par_iter()
        .map(|i| {
            am.get(i).map(|a| {
                if degenerate {
                    return 0;
                }
                let s = ((a - alpha_min) / delta).ceil() as i64;
                (s.clamp(1, classes as i64) - 1) as u16
            })
        })
        .collect();
    Ok(ClassPartition { alpha_min, alpha_max, classes, class_of })
}

fn check_widths(side: usize, widths: &[usize]) -> Result<()> {
    match widths.iter().find(|&&w| w == 0 || side % w != 0) {
        Some(w) => Err(Error::InvalidArgument(format!("mesh width {w} does not tile side {side}"))),
        None => Ok(()),
    }
}

/// Number of occupied boxes of each width for every label of a label plane.
///
/// `labels[i] == None` pixels belong to no set. Result is `[label][width]`.
pub fn label_box_counts(labels: &[Option<u16>], side: usize, n_labels: usize, widths: &[usize]) -> Result<Vec<Vec<u64>>> {
    if labels.len() != side * side {
        return Err(Error::DimensionMismatch(format!("{} labels for a {side}x{side} region", labels.len())));
    }
    check_widths(side, widths)?;
    if let Some(l) = labels.iter().flatten().find(|&&l| l as usize >= n_labels) {
        return Err(Error::InvalidArgument(format!("label {l} with only {n_labels} labels")));
    }
    let per_width: Vec<Vec<u64>> = widths
        .par_iter()
        .map(|&w| {
            let cells = side / w;
            let mut occupied = vec![false; n_labels * cells * cells];
            for (i, l) in labels.iter().enumerate() {
                if let Some(l) = *l {
                    let (x, y) = (i % side, i / side);
                    occupied[(l as usize * cells + y / w) * cells + x / w] = true;
                }
            }
            occupied
                .chunks(cells * cells)
                .map(|c| c.iter().filter(|&&o| o).count() as u64)
                .collect()
        })
        .collect();
    Ok((0..n_labels).map(|l| per_width.iter().map(|c| c[l]).collect()).collect())
}

/// Slope of `ln N` against `-ln width` over widths where `N >= 1`; `None` below 3 scales.
pub fn dimension_from_counts(counts: &[u64], widths: &[usize]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = counts
        .iter()
        .zip(widths)
        .filter(|(&n, _)| n >= 1)
        .map(|(&n, &w)| (-(w as f64).ln(), (n as f64).ln()))
        .unzip();
    let abscissa = PreparedAbscissa::new(&xs).ok()?;
    Some(abscissa.fit(&ys).0)
}

/// Box-counting dimension of a set of pixels in a `side`x`side` region.
///
/// Returns the dimension (if at least 3 scales are usable) and the number of scales used.
pub fn box_counting_dimension(members: &[bool], side: usize, widths: &[usize]) -> Result<(Option<f64>, usize)> {
    if !members.iter().any(|&m| m) {
        return Err(Error::Degenerate("box counting of an empty set".into()));
    }
    let labels: Vec<Option<u16>> = members.iter().map(|&m| m.then_some(0)).collect();
    let counts = label_box_counts(&labels, side, 1, widths)?.remove(0);
    let used = counts.iter().filter(|&&n| n >= 1).count();
    Ok((dimension_from_counts(&counts, widths), used))
}

/// [`box_counting_dimension`] for an explicit list of pixel coordinates.
pub fn box_counting_dimension_of_points(points: &[(usize, usize)], side: usize, widths: &[usize]) -> Result<(Option<f64>, usize)> {
    let mut members = vec![false; side * side];
    for &(x, y) in points {
        if x >= side || y >= side {
            return Err(Error::OutOfBounds(format!("pixel ({x},{y}) outside a region of side {side}")));
        }
        members[y * side + x] = true;
    }
    box_counting_dimension(&members, side, widths)
}

/// Coarse spectrum: one point per class with a defined dimension, plus the
/// two edge half-classes attached at `alpha_min` and `alpha_max`.
pub fn coarse_spectrum(am: &AlphaMap, part: &ClassPartition, widths: &[usize]) -> Result<SpectrumCurve> {
    if am.width != am.height || part.class_of.len() != am.len() {
        return Err(Error::DimensionMismatch("partition does not match the alpha map".into()));
    }
    let side = am.width;
    let counts = label_box_counts(&part.class_of, side, part.classes, widths)?;
    let mut population = vec![0u64; part.classes];
    for c in part.class_of.iter().flatten() {
        population[*c as usize] += 1;
    }
    let to_point = |alpha: f64, dim: Option<f64>, count: u64| {
        dim.map(|f| SpectrumPoint { alpha, f: f.clamp(0.0, 2.0), count })
    };

    let mut points = Vec::with_capacity(part.classes + 2);
    let edges = (!part.is_degenerate()).then(|| part.edge_halves(am));
    let edge_point = |members: &Vec<bool>, alpha: f64| -> Result<Option<SpectrumPoint>> {
        let count = members.iter().filter(|&&m| m).count() as u64;
        if count == 0 {
            return Ok(None);
        }
        let (dim, _) = box_counting_dimension(members, side, widths)?;
        Ok(to_point(alpha, dim, count))
    };

    if let Some((first, _)) = &edges {
        points.extend(edge_point(first, part.alpha_min)?);
    }
    for (s, class_counts) in counts.iter().enumerate() {
        if population[s] == 0 {
            continue;
        }
        points.extend(to_point(part.class_mid(s), dimension_from_counts(class_counts, widths), population[s]));
    }
    if let Some((_, last)) = &edges {
        points.extend(edge_point(last, part.alpha_max)?);
    }
    Ok(SpectrumCurve { points, kind: SpectrumKind::Coarse })
}

/// How a spectrum curve is turned into per-pixel f values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FMapMode {
    /// Piecewise-linear between knots, clamped at the ends.
    #[default]
    Linear,
    /// Least-squares polynomial of the given degree through the knots.
    Polynomial { degree: usize },
}

/// Per-pixel f values aligned with an [`AlphaMap`]; NaN where alpha is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct FMap {
    pub width: usize,
    pub height: usize,
    pub f: Vec<f64>,
}

impl FMap {
    pub fn get(&self, i: usize) -> Option<f64> {
        let f = self.f[i];
        f.is_finite().then_some(f)
    }
}

/// Least-squares polynomial, stored in a centred and scaled variable for conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    center: f64,
    scale: f64,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn fit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "degree-{degree} fit needs {} points, got {}",
                degree + 1,
                xs.len()
            )));
        }
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let center = 0.5 * (lo + hi);
        let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        let vander = DMatrix::from_fn(xs.len(), degree + 1, |r, c| ((xs[r] - center) / scale).powi(c as i32));
        let rhs = DVector::from_column_slice(ys);
        let coeffs = vander
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Degenerate(format!("polynomial fit: {e}")))?;
        Ok(Polynomial { center, scale, coeffs: coeffs.iter().copied().collect() })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Assigns every valid pixel the f of its alpha on `curve`.
pub fn f_map(am: &AlphaMap, curve: &SpectrumCurve, mode: FMapMode) -> Result<FMap> {
    if curve.is_empty() {
        return Err(Error::InvalidArgument("cannot build an f map from an empty spectrum".into()));
    }
    let eval: Box<dyn Fn(f64) -> f64 + Sync> = match mode {
        FMapMode::Linear => Box::new(|a| curve.interpolate(a).unwrap()),
        FMapMode::Polynomial { .. } if curve.points.len() == 1 => {
            let f = curve.points[0].f;
            Box::new(move |_| f)
        }
        FMapMode::Polynomial { degree } => {
            let xs: Vec<f64> = curve.points.iter().map(|p| p.alpha).collect();
            let ys: Vec<f64> = curve.points.iter().map(|p| p.f).collect();
            let poly = Polynomial::fit(&xs, &ys, degree)?;
            Box::new(move |a| poly.eval(a))
        }
    };
    let f = (0..am.len())
        .into_par_iter()
        .map(|i| am.get(i).map_or(f64::NAN, &eval))
        .collect();
    Ok(FMap { width: am.width, height: am.height, f })
}
