use mfwater::coarse::{self, FMapMode, SpectrumKind};
use mfwater::eval::{confusion, metrics};
use mfwater::holder::{alpha_map, WindowLadder};
use mfwater::measure::{MeasureField, DEFAULT_MESH_WIDTHS};
use mfwater::mlp::{self, Dataset, TrainConfig};
use mfwater::raster_io::{self, AnalysisWindow, RasterBand, RasterStack};
use mfwater::segment::{self, SegmentationMask, ThresholdSpec};
use mfwater::synth::{self, CascadeSpec, Rect, ReflectanceSpec, SceneSpec};

fn iou(a: &SegmentationMask, b: &SegmentationMask) -> f64 {
    let inter = a.water().iter().zip(b.water()).filter(|(x, y)| **x && **y).count();
    let union = a.water().iter().zip(b.water()).filter(|(x, y)| **x || **y).count();
    inter as f64 / union as f64
}

fn land() -> CascadeSpec {
    CascadeSpec::new([0.7, 0.1, 0.1, 0.1], 10, Some(11)).unwrap()
}

#[test]
fn single_square_scene_is_recovered() {
    let scene = synth::composite_scene(&SceneSpec {
        side: 1024,
        margin: 8,
        water: vec![Rect { x: 384, y: 384, w: 256, h: 256 }],
        water_level: 1.0,
        noise_amp: 0.05,
        land: land(),
        seed: 1,
    })
    .unwrap();
    let field = MeasureField::new(&scene.band).unwrap();
    let am = alpha_map(&field, &scene.window, &WindowLadder::optical()).unwrap();
    let part = coarse::bin_alpha(&am, coarse::DEFAULT_CLASSES).unwrap();
    let curve = coarse::coarse_spectrum(&am, &part, &DEFAULT_MESH_WIDTHS).unwrap();
    let fm = coarse::f_map(&am, &curve, FMapMode::Linear).unwrap();
    let t = ThresholdSpec::new(1.8, 2.2, 0.0, 2.01).unwrap();
    let mask = segment::majority_filter(&segment::threshold_classify(&am, &fm, &t).unwrap(), 7).unwrap();
    let score = iou(&mask, &scene.truth);
    assert!(score >= 0.9, "IoU {score}");
}

#[test]
fn disk_round_trip_through_sidecar_and_window() {
    let dir = tempfile::tempdir().unwrap();
    let band = RasterBand::from_fn(40, 36, "nir", |x, y| (x * y % 17) as f64 + 0.5).unwrap();
    let other = band.scaled(2.0).unwrap().with_name("red");
    let path = dir.path().join("scene.json");
    RasterStack::new(vec![band.clone(), other]).unwrap().save(&path).unwrap();
    let loaded = raster_io::load_raster(&path).unwrap();
    assert_eq!(loaded.band("nir").unwrap(), &band);
    let win = AnalysisWindow::centered(40, 36, 16, 8).unwrap();
    let cut = raster_io::extract_window(&loaded, &win).unwrap();
    assert_eq!((cut.width(), cut.height()), (32, 32));
    assert_eq!(cut.band("red").unwrap().get(8, 8), loaded.band("red").unwrap().get(win.core_x, win.core_y));
}

#[test]
fn alpha_map_on_window_of_larger_raster() {
    let band = RasterBand::filled(64, 48, 3.0, "g").unwrap();
    let stack = RasterStack::single(band);
    let win = AnalysisWindow::centered(64, 48, 16, 8).unwrap();
    let padded = raster_io::extract_window(&stack, &win).unwrap();
    let field = MeasureField::new(&padded.bands()[0]).unwrap();
    let am = alpha_map(&field, &win.local(), &WindowLadder::sar()).unwrap();
    assert_eq!(am.valid_count(), 256);
    assert!(am.alpha.iter().all(|a| (a - 2.0).abs() < 1e-9));
}

#[test]
fn spectrum_survives_csv() {
    let band = synth::periodic_pad(&synth::cascade(&CascadeSpec::new([0.4, 0.3, 0.2, 0.1], 6, Some(3)).unwrap()).unwrap(), 8).unwrap();
    let field = MeasureField::new(&band).unwrap();
    let am = alpha_map(&field, &AnalysisWindow { core_x: 8, core_y: 8, core_size: 64, pad: 8 }, &WindowLadder::optical()).unwrap();
    let part = coarse::bin_alpha(&am, 30).unwrap();
    let curve = coarse::coarse_spectrum(&am, &part, &[4, 8, 16, 32, 64]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    raster_io::save_spectrum_csv(&curve, &p).unwrap();
    let back = raster_io::load_spectrum_csv(&p, SpectrumKind::Coarse).unwrap();
    assert_eq!(back.points.len(), curve.points.len());
    // edge half-classes overlap the first and last full classes
    let edges = curve.points[0].count + curve.points.last().unwrap().count;
    assert_eq!(curve.points.iter().map(|p| p.count).sum::<u64>(), am.valid_count() as u64 + edges);
}

#[test]
fn mlp_segments_reflectance_scene() {
    let spec = ReflectanceSpec {
        side: 128,
        water: vec![Rect { x: 10, y: 10, w: 50, h: 40 }, Rect { x: 70, y: 64, w: 40, h: 50 }],
        land: CascadeSpec::new([0.4, 0.3, 0.2, 0.1], 7, Some(5)).unwrap(),
        noise: 0.05,
        seed: 2,
    };
    let (stack, truth) = synth::reflectance_scene(&spec).unwrap();
    let four = RasterStack::new(
        ["blue", "green", "red", "nir"].iter().map(|b| stack.band(b).unwrap().clone()).collect(),
    )
    .unwrap();
    let data = Dataset::from_stack(&four, &truth).unwrap();
    let report = mlp::train(&data, &[4, 20, 2], &TrainConfig { seed: 1, max_epochs: 200, ..TrainConfig::default() }).unwrap();
    let mask = mlp::predict_mask(&report.model, &four).unwrap();
    let acc = metrics(&confusion(&mask, &truth).unwrap()).accuracy.unwrap();
    assert!(acc >= 95.0, "accuracy {acc}");
}

#[test]
fn confusion_orientation() {
    // test mask first, reference second
    let a = SegmentationMask::new(2, 2, vec![true, true, false, false]).unwrap();
    let b = SegmentationMask::new(2, 2, vec![true, false, true, false]).unwrap();
    let cm = confusion(&a, &b).unwrap();
    assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (1, 1, 1, 1));
}
