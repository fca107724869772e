//! Synthetic test measures with known spectra, and composite scenes built from them.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so fixtures are
//! reproducible across platforms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::{SpectrumCurve, SpectrumKind, SpectrumPoint};
use crate::error::{Error, Result};
use crate::raster_io::{AnalysisWindow, RasterBand, RasterStack};
use crate::segment::SegmentationMask;

/// Four-weight 2-D multiplicative cascade.
///
/// Without a seed the weights are placed top-left, top-right, bottom-left,
/// bottom-right at every subdivision; with a seed they are permuted at random
/// for each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    pub weights: [f64; 4],
    pub depth: u32,
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
}

impl CascadeSpec {
    pub fn new(weights: [f64; 4], depth: u32, shuffle_seed: Option<u64>) -> Result<Self> {
        let spec = CascadeSpec { weights, depth, shuffle_seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("cascade weights {:?} must be nonnegative and sum to 1", self.weights)));
        }
        if self.depth == 0 || self.depth > 14 {
            return Err(Error::InvalidArgument(format!("cascade depth {} outside 1..=14", self.depth)));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        1 << self.depth
    }

    fn positive_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().copied().filter(|&w| w > 0.0)
    }

    // rounding leaves sum(w) within 1e-12 of 1; the formulas below are
    // written for w / sum(w) so that tau(1) is exactly 0
    fn log2_weight_sum(&self) -> f64 {
        self.weights.iter().sum::<f64>().log2()
    }
}

/// Cell masses of the cascade after `depth` subdivisions; they sum to 1.
pub fn cascade(spec: &CascadeSpec) -> Result<RasterBand> {
    spec.validate()?;
    let mut rng = spec.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    let mut side = 1;
    let mut cells = vec![1.0f64];
    for _ in 0..spec.depth {
        let next_side = side * 2;
        let mut next = vec![0.0; next_side * next_side];
        for y in 0..side {
            for x in 0..side {
                let mut order = [0usize, 1, 2, 3];
                if let Some(rng) = rng.as_mut() {
                    // Fisher-Yates
                    for i in (1..4).rev() {
                        order.swap(i, rng.random_range(0..=i));
                    }
                }
                let m = cells[y * side + x];
                for (slot, &wi) in order.iter().enumerate() {
                    let (dx, dy) = (slot % 2, slot / 2);
                    next[(2 * y + dy) * next_side + 2 * x + dx] = m * spec.weights[wi];
                }
            }
        }
        side = next_side;
        cells = next;
    }
    RasterBand::new(side, side, cells, "cascade")
}


/// `tau(q) = log2(sum w^q)` over the positive weights.
pub fn analytic_tau(spec: &CascadeSpec, q: f64) -> Result<f64> {
    spec.validate()?;
    if !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q = {q}")));
    }
    let s = spec.log2_weight_sum();
    Ok(spec.positive_weights().map(|w| w.powf(q)).sum::<f64>().log2() - q * s)
}

/// `alpha(q) = -sum w^q ln w / (sum w^q ln 2)`.
pub fn analytic_alpha(spec: &CascadeSpec, q: f64) -> Result<f64> {
    spec.validate()?;
    if !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q = {q}")));
    }
    let (num, den) = spec
        .positive_weights()
        .fold((0.0, 0.0), |(n, d), w| (n + w.powf(q) * w.ln(), d + w.powf(q)));
    Ok(-num / (den * std::f64::consts::LN_2) + spec.log2_weight_sum())
}

/// Exact Legendre spectrum of the cascade on a q grid, sorted by alpha.
pub fn analytic_spectrum(spec: &CascadeSpec, q_grid: &[f64]) -> Result<SpectrumCurve> {
    let mut points = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let alpha = analytic_alpha(spec, q)?;
        let f = q * alpha + analytic_tau(spec, q)?;
        points.push(SpectrumPoint { alpha, f, count: 0 });
    }
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    points.dedup_by(|b, a| (b.alpha - a.alpha).abs() <= 1e-9);
    Ok(SpectrumCurve { points, kind: SpectrumKind::Legendre })
}

/// Extends a band by `pad` pixels on every side, wrapping around periodically.
pub fn periodic_pad(band: &RasterBand, pad: usize) -> Result<RasterBand> {
    let (w, h) = (band.width(), band.height());
    RasterBand::from_fn(w + 2 * pad, h + 2 * pad, band.name(), |x, y| {
        band.get((x + w - pad % w) % w, (y + h - pad % h) % h)
    })
}

/// Rounds `gain * v` to integers, like a sensor producing digital numbers.
pub fn quantize(band: &RasterBand, gain: f64) -> Result<RasterBand> {
    RasterBand::new(
        band.width(),
        band.height(),
        band.values().iter().map(|v| (gain * v).round()).collect(),
        band.name(),
    )
}

/// Axis-aligned rectangle in core-region coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

fn truth_mask(side: usize, water: &[Rect]) -> Result<SegmentationMask> {
    if side == 0 {
        return Err(Error::InvalidArgument("scene side must be positive".into()));
    }
    for r in water {
        if r.w == 0 || r.h == 0 || r.x + r.w > side || r.y + r.h > side {
            return Err(Error::OutOfBounds(format!("water rectangle {r:?} outside a {side}x{side} scene")));
        }
    }
    let mut m = vec![false; side * side];
    for y in 0..side {
        for x in 0..side {
            m[y * side + x] = water.iter().any(|r| r.contains(x, y));
        }
    }
    SegmentationMask::new(side, side, m)
}

/// Single-band scene: smooth water rectangles on cascade-textured land.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Side of the analyzed core region.
    pub side: usize,
    /// Extra land on every side, available as padding.
    pub margin: usize,
    pub water: Vec<Rect>,
    pub water_level: f64,
    /// Water pixels are `water_level + noise_amp * u`, `u` uniform in [-1, 1).
    pub noise_amp: f64,
    /// Land texture; tiled periodically and scaled to unit mean.
    pub land: CascadeSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub band: RasterBand,
    /// Ground truth over the core region.
    pub truth: SegmentationMask,
    pub window: AnalysisWindow,
}

pub fn composite_scene(spec: &SceneSpec) -> Result<Scene> {
    let truth = truth_mask(spec.side, &spec.water)?;
    if !(spec.water_level >= 0.0) || !(spec.noise_amp >= 0.0) {
        return Err(Error::InvalidArgument("water level and noise amplitude must be nonnegative".into()));
    }
    let land = cascade(&spec.land)?;
    let tile = land.width();
    let unit = (tile * tile) as f64;
    let full = spec.side + 2 * spec.margin;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let off = tile - spec.margin % tile;
    let band = RasterBand::from_fn(full, full, "scene", |x, y| {
        let inside = x >= spec.margin && y >= spec.margin && x < spec.margin + spec.side && y < spec.margin + spec.side;
        if inside && truth.is_water(x - spec.margin, y - spec.margin) {
            let u: f64 = rng.random_range(-1.0..1.0);
            (spec.water_level + spec.noise_amp * u).max(0.0)
        } else {
            land.get((x + off) % tile, (y + off) % tile) * unit
        }
    })?;
    let window = AnalysisWindow { core_x: spec.margin, core_y: spec.margin, core_size: spec.side, pad: spec.margin };
    Ok(Scene { band, truth, window })
}

/// Band names of [`reflectance_scene`] stacks, in order.
pub const REFLECTANCE_BANDS: [&str; 5] = ["blue", "green", "red", "nir", "swir"];

// typical surface reflectances per band
const WATER_SIGNATURE: [f64; 5] = [0.08, 0.06, 0.045, 0.02, 0.01];
const LAND_SIGNATURE: [f64; 5] = [0.06, 0.09, 0.11, 0.30, 0.24];

/// Multi-band reflectance scene for the index and neural-network baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectanceSpec {
    pub side: usize,
    pub water: Vec<Rect>,
    /// Brightness texture of the land; tiled, unit mean, compressed by a 0.3 power.
    pub land: CascadeSpec,
    /// Independent per-band multiplicative noise amplitude.
    pub noise: f64,
    pub seed: u64,
}

pub fn reflectance_scene(spec: &ReflectanceSpec) -> Result<(RasterStack, SegmentationMask)> {
    let truth = truth_mask(spec.side, &spec.water)?;
    if !(0.0..1.0).contains(&spec.noise) {
        return Err(Error::InvalidArgument(format!("noise amplitude {} outside [0, 1)", spec.noise)));
    }
    let land = cascade(&spec.land)?;
    let tile = land.width();
    let unit = (tile * tile) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.side * spec.side;
    let mut values = vec![Vec::with_capacity(n); REFLECTANCE_BANDS.len()];
    for y in 0..spec.side {
        for x in 0..spec.side {
            let (signature, texture) = if truth.is_water(x, y) {
                (&WATER_SIGNATURE, 1.0)
            } else {
                (&LAND_SIGNATURE, (land.get(x % tile, y % tile) * unit).powf(0.3))
            };
            for (b, v) in values.iter_mut().enumerate() {
                let u: f64 = rng.random_range(-1.0..1.0);
                v.push(signature[b] * texture * (1.0 + spec.noise * u));
            }
        }
    }
    let bands = values
        .into_iter()
        .zip(REFLECTANCE_BANDS)
        .map(|(v, name)| RasterBand::new(spec.side, spec.side, v, name))
        .collect::<Result<Vec<_>>>()?;
    Ok((RasterStack::new(bands)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cascade_is_constant() {
        let band = cascade(&CascadeSpec::new([0.25; 4], 3, None).unwrap()).unwrap();
        assert_eq!(band.width(), 8);
        assert!(band.values().iter().all(|&v| v == 1.0 / 64.0));
    }

    #[test]
    fn degenerate_cascade_is_a_point() {
        let band = cascade(&CascadeSpec::new([1.0, 0.0, 0.0, 0.0], 4, None).unwrap()).unwrap();
        assert_eq!(band.get(0, 0), 1.0);
        assert_eq!(band.values().iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn invalid_specs() {
        assert!(CascadeSpec::new([0.5, 0.5, 0.5, -0.5], 3, None).is_err());
        assert!(CascadeSpec::new([0.4, 0.3, 0.2, 0.2], 3, None).is_err());
        assert!(CascadeSpec::new([0.25; 4], 0, None).is_err());
    }

    #[test]
    fn cell_values_match_enumerated_products() {
        // every length-n weight sequence appears exactly once, shuffled or not
        let w = [0.4, 0.3, 0.2, 0.1];
        let n = 4;
        let mut expected = Vec::new();
        for code in 0..4usize.pow(n) {
            let mut c = code;
            let mut p = 1.0;
            for _ in 0..n {
                p *= w[c % 4];
                c /= 4;
            }
            expected.push(p);
        }
        expected.sort_by(f64::total_cmp);
        for seed in [None, Some(7)] {
            let band = cascade(&CascadeSpec::new(w, n, seed).unwrap()).unwrap();
            let mut got = band.values().to_vec();
            got.sort_by(f64::total_cmp);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() <= 1e-15 * e);
            }
        }
    }

    #[test]
    fn analytic_values() {
        let uni = CascadeSpec::new([0.25; 4], 5, None).unwrap();
        for q in [-3.0, 0.0, 0.5, 2.0] {
            assert!((analytic_tau(&uni, q).unwrap() - 2.0 * (1.0 - q)).abs() < 1e-12);
        }
        let s = CascadeSpec::new([0.4, 0.3, 0.2, 0.1], 10, None).unwrap();
        assert!(analytic_tau(&s, 1.0).unwrap().abs() < 1e-15);
        assert!((analytic_tau(&s, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((analytic_alpha(&s, 50.0).unwrap() - (-(0.4f64).log2())).abs() < 1e-4);
        assert!((analytic_alpha(&s, -50.0).unwrap() - (-(0.1f64).log2())).abs() < 1e-4);
        let uniform_curve = analytic_spectrum(&uni, &[-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(uniform_curve.points.len(), 1);
        let p = uniform_curve.points[0];
        assert!((p.alpha - 2.0).abs() < 1e-12 && (p.f - 2.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_tau_q0_counts_positive_weights() {
        let s = CascadeSpec::new([0.5, 0.5, 0.0, 0.0], 4, None).unwrap();
        assert!((analytic_tau(&s, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(analytic_tau(&s, -2.0).unwrap().is_finite());
    }

    #[test]
    fn periodic_pad_wraps() {
        let b = RasterBand::from_fn(4, 4, "b", |x, y| (x + 4 * y) as f64).unwrap();
        let p = periodic_pad(&b, 2).unwrap();
        assert_eq!(p.width(), 8);
        assert_eq!(p.get(2, 2), 0.0);
        assert_eq!(p.get(0, 0), b.get(2, 2));
        assert_eq!(p.get(7, 7), b.get(1, 1));
    }

    fn scene_spec(noise_amp: f64, water: Vec<Rect>) -> SceneSpec {
        SceneSpec {
            side: 32,
            margin: 8,
            water,
            water_level: 1.0,
            noise_amp,
            land: CascadeSpec::new([0.4, 0.3, 0.2, 0.1], 5, Some(1)).unwrap(),
            seed: 3,
        }
    }

    #[test]
    fn noiseless_water_is_constant() {
        let s = composite_scene(&scene_spec(0.0, vec![Rect { x: 4, y: 4, w: 10, h: 6 }])).unwrap();
        assert_eq!(s.band.width(), 48);
        for y in 4..10 {
            for x in 4..14 {
                assert_eq!(s.band.get(x + 8, y + 8), 1.0);
            }
        }
        assert_eq!(s.truth.water_count(), 60);
    }

    #[test]
    fn no_water_means_empty_truth() {
        let s = composite_scene(&scene_spec(0.1, vec![])).unwrap();
        assert_eq!(s.truth.water_count(), 0);
        assert!(composite_scene(&scene_spec(0.1, vec![Rect { x: 30, y: 0, w: 4, h: 4 }])).is_err());
    }

    #[test]
    fn reflectance_scene_shapes() {
        let spec = ReflectanceSpec {
            side: 16,
            water: vec![Rect { x: 0, y: 0, w: 8, h: 8 }],
            land: CascadeSpec::new([0.4, 0.3, 0.2, 0.1], 3, Some(2)).unwrap(),
            noise: 0.05,
            seed: 9,
        };
        let (stack, truth) = reflectance_scene(&spec).unwrap();
        assert_eq!(stack.bands().len(), 5);
        assert_eq!(truth.water_count(), 64);
        let red = stack.band("red").unwrap();
        assert!(red.values().iter().all(|&v| v > 0.0));
    }
}
