//! Browser bindings: cascade explorer, scene alpha map and interactive segmentation.
//!
//! Images are returned as RGBA bytes ready for `ImageData`, curves as flat
//! `[alpha0, f0, alpha1, f1, ...]` arrays.

use mfwater::coarse::{self, FMap, FMapMode, SpectrumCurve};
use mfwater::eval::{confusion, metrics, MetricsReport};
use mfwater::holder::{alpha_map, AlphaMap, WindowLadder};
use mfwater::legendre;
use mfwater::measure::{mesh_widths_for, MeasureField, Region};
use mfwater::raster_io::{AnalysisWindow, RasterBand};
use mfwater::segment::{self, SegmentationMask, ThresholdSpec};
use mfwater::synth::{self, CascadeSpec, Rect, SceneSpec};
use wasm_bindgen::prelude::*;

fn js(e: mfwater::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn gray(values: impl Iterator<Item = Option<f64>>, len: usize) -> Vec<u8> {
    let vals: Vec<Option<f64>> = values.collect();
    let (lo, hi) = vals
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(4 * len);
    for v in vals {
        match v {
            Some(v) => {
                let g = (255.0 * (v - lo) / span).round() as u8;
                out.extend([g, g, g, 255]);
            }
            None => out.extend([160, 0, 160, 255]),
        }
    }
    out
}

fn flatten(curve: &SpectrumCurve) -> Vec<f64> {
    curve.points.iter().flat_map(|p| [p.alpha, p.f]).collect()
}

fn cascade_spec(w: [f64; 4], depth: u32, seed: Option<u64>) -> mfwater::Result<CascadeSpec> {
    let sum: f64 = w.iter().sum();
    CascadeSpec::new(w.map(|x| x / sum), depth, seed)
}

pub fn cascade_image_native(w: [f64; 4], depth: u32, seed: Option<u64>) -> mfwater::Result<Vec<u8>> {
    let band = synth::cascade(&cascade_spec(w, depth, seed)?)?;
    // log scale, otherwise the heaviest cell saturates everything
    let n = band.values().len();
    Ok(gray(band.values().iter().map(|&v| (v > 0.0).then(|| v.ln())), n))
}

pub fn cascade_spectra_native(w: [f64; 4], depth: u32, seed: Option<u64>) -> mfwater::Result<(Vec<f64>, Vec<f64>)> {
    let spec = cascade_spec(w, depth, seed)?;
    let q = legendre::q_grid(-5.0, 5.0, 0.25);
    let analytic = synth::analytic_spectrum(&spec, &legendre::q_grid(-5.0, 5.0, 0.05))?;
    let band = synth::cascade(&spec)?;
    let field = MeasureField::new(&band)?;
    let window = AnalysisWindow { core_x: 0, core_y: 0, core_size: spec.side(), pad: 0 };
    let table = legendre::partition_function(&field, Region::from(&window), &q, &mesh_widths_for(spec.side()))?;
    let est = legendre::legendre_spectrum(&legendre::tau(&table))?;
    Ok((flatten(&est.curve), flatten(&analytic)))
}

/// Grayscale RGBA rendering of a multiplicative cascade.
#[wasm_bindgen]
pub fn cascade_image(w0: f64, w1: f64, w2: f64, w3: f64, depth: u32, seed: Option<u64>) -> Result<Vec<u8>, JsError> {
    cascade_image_native([w0, w1, w2, w3], depth, seed).map_err(js)
}

/// Estimated Legendre spectrum of the cascade.
#[wasm_bindgen]
pub fn cascade_estimated_spectrum(w0: f64, w1: f64, w2: f64, w3: f64, depth: u32, seed: Option<u64>) -> Result<Vec<f64>, JsError> {
    cascade_spectra_native([w0, w1, w2, w3], depth, seed).map(|s| s.0).map_err(js)
}

/// Closed-form spectrum of the cascade.
#[wasm_bindgen]
pub fn cascade_analytic_spectrum(w0: f64, w1: f64, w2: f64, w3: f64, depth: u32) -> Result<Vec<f64>, JsError> {
    let spec = cascade_spec([w0, w1, w2, w3], depth, None).map_err(js)?;
    synth::analytic_spectrum(&spec, &legendre::q_grid(-5.0, 5.0, 0.05)).map(|c| flatten(&c)).map_err(js)
}

/// A synthetic water scene with its alpha map and coarse spectrum precomputed.
#[wasm_bindgen]
pub struct SceneDemo {
    side: usize,
    band: RasterBand,
    window: AnalysisWindow,
    truth: SegmentationMask,
    alpha: AlphaMap,
    curve: SpectrumCurve,
    fmap: FMap,
    report: Option<MetricsReport>,
}

impl SceneDemo {
    pub fn build(side: usize, seed: u64) -> mfwater::Result<Self> {
        let s = side as f64;
        let r = |x: f64, y: f64, w: f64, h: f64| Rect {
            x: (x * s) as usize,
            y: (y * s) as usize,
            w: (w * s) as usize,
            h: (h * s) as usize,
        };
        let spec = SceneSpec {
            side,
            margin: 8,
            water: vec![r(0.1, 0.12, 0.25, 0.25), r(0.58, 0.08, 0.3, 0.18), r(0.2, 0.64, 0.5, 0.12)],
            water_level: 1.0,
            noise_amp: 0.05,
            land: CascadeSpec::new([0.7, 0.1, 0.1, 0.1], 10, Some(seed.wrapping_add(1)))?,
            seed,
        };
        let scene = synth::composite_scene(&spec)?;
        let field = MeasureField::new(&scene.band)?;
        let alpha = alpha_map(&field, &scene.window, &WindowLadder::optical())?;
        let part = coarse::bin_alpha(&alpha, coarse::DEFAULT_CLASSES)?;
        let curve = coarse::coarse_spectrum(&alpha, &part, &mesh_widths_for(side))?;
        let fmap = coarse::f_map(&alpha, &curve, FMapMode::Linear)?;
        Ok(SceneDemo { side, band: scene.band, window: scene.window, truth: scene.truth, alpha, curve, fmap, report: None })
    }

    pub fn segment_native(&mut self, t: ThresholdSpec, majority: usize) -> mfwater::Result<Vec<u8>> {
        let mut mask = segment::threshold_classify(&self.alpha, &self.fmap, &t)?;
        if majority > 1 {
            mask = segment::majority_filter(&mask, majority)?;
        }
        self.report = Some(metrics(&confusion(&mask, &self.truth)?));
        let mut out = Vec::with_capacity(4 * mask.water().len());
        for (&m, &t) in mask.water().iter().zip(self.truth.water()) {
            out.extend(match (m, t) {
                (true, true) => [30, 90, 220, 255],
                (true, false) => [220, 40, 40, 255],
                (false, true) => [240, 200, 40, 255],
                (false, false) => [235, 235, 235, 255],
            });
        }
        Ok(out)
    }

    pub fn report(&self) -> Option<&MetricsReport> {
        self.report.as_ref()
    }
}

#[wasm_bindgen]
impl SceneDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(side: usize, seed: u64) -> Result<SceneDemo, JsError> {
        Self::build(side, seed).map_err(js)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// The analysed core of the scene, log scaled.
    pub fn scene_image(&self) -> Vec<u8> {
        let w = &self.window;
        let vals = (0..self.side * self.side).map(|i| {
            let v = self.band.get(w.core_x + i % self.side, w.core_y + i / self.side);
            Some((v + 1e-6).ln())
        });
        gray(vals, self.side * self.side)
    }

    pub fn alpha_image(&self) -> Vec<u8> {
        gray((0..self.alpha.len()).map(|i| self.alpha.get(i)), self.alpha.len())
    }

    pub fn alpha_range(&self) -> Vec<f64> {
        self.alpha.range().map_or(vec![], |(lo, hi)| vec![lo, hi])
    }

    pub fn coarse_spectrum(&self) -> Vec<f64> {
        flatten(&self.curve)
    }

    /// Water where both alpha and f(alpha) fall inside the bounds. Colours:
    /// blue hit, red false alarm, yellow miss.
    pub fn segment(&mut self, alpha_lo: f64, alpha_hi: f64, f_lo: f64, f_hi: f64, majority: usize) -> Result<Vec<u8>, JsError> {
        let t = ThresholdSpec::new(alpha_lo, alpha_hi, f_lo, f_hi).map_err(js)?;
        self.segment_native(t, majority).map_err(js)
    }

    /// Metrics of the last segmentation as JSON.
    pub fn metrics_json(&self) -> String {
        self.report.map_or("null".into(), |r| r.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_image_has_rgba_pixels() {
        let img = cascade_image_native([4.0, 3.0, 2.0, 1.0], 6, Some(1)).unwrap();
        assert_eq!(img.len(), 4 * 64 * 64);
        assert!(img.chunks(4).all(|p| p[0] == p[1] && p[3] == 255));
    }

    #[test]
    fn cascade_spectra_agree() {
        let (est, analytic) = cascade_spectra_native([0.4, 0.3, 0.2, 0.1], 8, None).unwrap();
        assert!(est.len() >= 2 && analytic.len() >= 2);
        let peak = |c: &[f64]| c.chunks(2).map(|p| p[1]).fold(f64::MIN, f64::max);
        assert!((peak(&est) - 2.0).abs() < 0.05);
        assert!((peak(&analytic) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn scene_segmentation_finds_water() {
        let mut demo = SceneDemo::build(256, 3).unwrap();
        assert_eq!(demo.scene_image().len(), 4 * 256 * 256);
        assert_eq!(demo.alpha_image().len(), 4 * 256 * 256);
        assert!(!demo.coarse_spectrum().is_empty());
        let img = demo.segment_native(ThresholdSpec::new(1.8, 2.2, 0.0, 2.01).unwrap(), 7).unwrap();
        assert_eq!(img.len(), 4 * 256 * 256);
        let acc = demo.report().unwrap().accuracy.unwrap();
        assert!(acc > 95.0, "accuracy {acc}");
    }
}
