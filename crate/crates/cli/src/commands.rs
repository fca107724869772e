use std::path::{Path, PathBuf};

use mfwater::coarse::{self, FMap, FMapMode, SpectrumKind};
use mfwater::eval::{confusion, metrics};
use mfwater::holder::{alpha_map as estimate_alpha, AlphaMap, WindowLadder};
use mfwater::legendre::{self, TauCurve};
use mfwater::measure::{mesh_widths_for, MeasureField, Region};
use mfwater::mlp::{self, Dataset, MlpModel, Optimizer, TrainConfig};
use mfwater::raster_io::{self, AnalysisWindow, RasterBand, RasterStack};
use mfwater::segment::{self, SegmentationMask, ThresholdSpec};
use mfwater::synth::{self, CascadeSpec, Rect, ReflectanceSpec, SceneSpec};

use crate::config::required;
use crate::*;

type Out = Result<(), CliError>;

fn numeric(msg: impl Into<String>) -> CliError {
    CliError::Numeric(msg.into())
}

fn pick_band(stack: RasterStack, name: Option<&str>) -> Result<RasterBand, CliError> {
    match name {
        Some(n) => Ok(stack.band(n)?.clone()),
        None => Ok(stack.into_bands().remove(0)),
    }
}

fn ladder(a: &AnalysisArgs) -> Result<WindowLadder, CliError> {
    Ok(match (&a.ks, a.sensor) {
        (Some(ks), _) => WindowLadder::new(ks.clone())?,
        (None, Some(Sensor::Sar)) => WindowLadder::sar(),
        (None, _) => WindowLadder::optical(),
    })
}

struct Prepared {
    padded: RasterBand,
    window: AnalysisWindow,
    ladder: WindowLadder,
}

impl Prepared {
    fn local(&self) -> AnalysisWindow {
        self.window.local()
    }
}

fn prepare(a: &AnalysisArgs) -> Result<Prepared, CliError> {
    let input = required(a.input.clone(), "input")?;
    let mut band = pick_band(raster_io::load_raster(&input)?, a.band.as_deref())?;
    if a.gain.is_some() || a.offset.is_some() {
        band = raster_io::calibrate(&band, a.gain.unwrap_or(1.0), a.offset.unwrap_or(0.0))?;
    }
    let ladder = ladder(a)?;
    let pad = a.pad.unwrap_or(ladder.max_halfwidth());
    let (w, h) = (band.width(), band.height());
    let core = match a.core {
        Some(c) => c,
        None => {
            let room = w.min(h).saturating_sub(2 * pad);
            if room == 0 {
                return Err(numeric(format!("{w}x{h} raster is too small for padding {pad}")));
            }
            1 << room.ilog2()
        }
    };
    let window = match (a.core_x, a.core_y) {
        (None, None) => AnalysisWindow::centered(w, h, core, pad)?,
        (x, y) => {
            let win = AnalysisWindow {
                core_x: x.unwrap_or((w.saturating_sub(core)) / 2),
                core_y: y.unwrap_or((h.saturating_sub(core)) / 2),
                core_size: core,
                pad,
            };
            win.validate(w, h)?;
            win
        }
    };
    eprintln!(
        "{}: band '{}' {w}x{h}, core {core}x{core} at ({}, {}), pad {pad}, windows {:?}",
        input.display(),
        band.name(),
        window.core_x,
        window.core_y,
        ladder.widths().collect::<Vec<_>>()
    );
    let padded = raster_io::extract_window(&RasterStack::single(band), &window)?.into_bands().remove(0);
    Ok(Prepared { padded, window, ladder })
}

fn compute_alpha(p: &Prepared) -> Result<AlphaMap, CliError> {
    let field = MeasureField::new(&p.padded)?;
    let am = estimate_alpha(&field, &p.local(), &p.ladder)?;
    eprintln!("alpha: {} of {} pixels valid, range {:?}", am.valid_count(), am.len(), am.range());
    Ok(am)
}

fn save_alpha(am: &AlphaMap, path: &Path) -> Out {
    raster_io::save_raster(path, am.width, am.height, &[("alpha", &am.alpha), ("r2", &am.r2)])?;
    Ok(())
}

fn load_alpha(path: &Path) -> Result<AlphaMap, CliError> {
    let (w, h, bands) = raster_io::load_raster_with_nan(path)?;
    let mut alpha = None;
    let mut r2 = None;
    for (name, v) in bands {
        match name.as_str() {
            "alpha" => alpha = Some(v),
            "r2" => r2 = Some(v),
            _ => {}
        }
    }
    let alpha = alpha.ok_or_else(|| CliError::Io(format!("{}: no 'alpha' band", path.display())))?;
    Ok(AlphaMap::from_bands(w, h, alpha, r2)?)
}

fn load_fmap(path: &Path) -> Result<FMap, CliError> {
    let (width, height, bands) = raster_io::load_raster_with_nan(path)?;
    let f = bands
        .into_iter()
        .find(|(n, _)| n == "f_alpha")
        .map(|(_, v)| v)
        .ok_or_else(|| CliError::Io(format!("{}: no 'f_alpha' band", path.display())))?;
    Ok(FMap { width, height, f })
}

fn fmap_mode(degree: Option<usize>) -> FMapMode {
    degree.map_or(FMapMode::Linear, |degree| FMapMode::Polynomial { degree })
}

fn coarse_curve(am: &AlphaMap, classes: Option<usize>) -> Result<coarse::SpectrumCurve, CliError> {
    if am.width != am.height {
        return Err(numeric(format!("coarse spectrum needs a square alpha map, got {}x{}", am.width, am.height)));
    }
    let part = coarse::bin_alpha(am, classes.unwrap_or(coarse::DEFAULT_CLASSES))?;
    let widths = mesh_widths_for(am.width);
    eprintln!("coarse: {} classes, mesh widths {widths:?}", part.classes);
    Ok(coarse::coarse_spectrum(am, &part, &widths)?)
}

fn maybe_filter(mask: SegmentationMask, kernel: Option<usize>) -> Result<SegmentationMask, CliError> {
    match kernel {
        Some(k) => Ok(segment::majority_filter(&mask, k)?),
        None => Ok(mask),
    }
}

fn save_mask(mask: &SegmentationMask, path: &Path) -> Out {
    raster_io::save_mask(mask, path)?;
    eprintln!("{}: {} of {} pixels water", path.display(), mask.water_count(), mask.water().len());
    Ok(())
}

pub fn alpha_map(a: AlphaMapArgs) -> Out {
    let output = required(a.output.clone(), "output")?;
    let p = prepare(&a.analysis)?;
    let mut am = compute_alpha(&p)?;
    if let Some(min) = a.min_r2 {
        am = am.with_min_r2(min);
    }
    save_alpha(&am, &output)
}

pub fn spectrum_coarse(a: CoarseArgs) -> Out {
    let output = required(a.output.clone(), "output")?;
    let am = match (&a.alpha, &a.analysis.input) {
        (Some(path), None) => load_alpha(path)?,
        (None, Some(_)) => compute_alpha(&prepare(&a.analysis)?)?,
        _ => return Err(CliError::Usage("give exactly one of --alpha or --input".into())),
    };
    let curve = coarse_curve(&am, a.classes)?;
    raster_io::save_spectrum_csv(&curve, &output)?;
    Ok(())
}

pub fn spectrum_legendre(a: LegendreArgs) -> Out {
    let output = required(a.output.clone(), "output")?;
    let p = prepare(&a.analysis)?;
    let q = legendre::q_grid(a.q_min.unwrap_or(-10.0), a.q_max.unwrap_or(10.0), a.q_step.unwrap_or(0.25));
    if !(a.q_step.unwrap_or(0.25) > 0.0) {
        return Err(CliError::Usage("--q-step must be positive".into()));
    }
    let field = MeasureField::new(&p.padded)?;
    let window = p.local();
    let table = legendre::partition_function(&field, Region::from(&window), &q, &mesh_widths_for(window.core_size))?;
    let tc = legendre::tau(&table);
    if !tc.omitted.is_empty() {
        eprintln!("legendre: q values without enough scales: {:?}", tc.omitted);
    }
    let ls = legendre::legendre_spectrum(&tc)?;
    for w in &ls.warnings {
        eprintln!("legendre: warning: {w}");
    }
    if let Some(path) = &a.tau_output {
        raster_io::save_tau_csv(&tc, path)?;
    }
    raster_io::save_spectrum_csv(&ls.curve, &output)?;
    Ok(())
}

pub fn fmap(a: FmapArgs) -> Out {
    let am = load_alpha(&required(a.alpha, "alpha")?)?;
    let curve = raster_io::load_spectrum_csv(required(a.spectrum, "spectrum")?, SpectrumKind::Coarse)?;
    let output = required(a.output, "output")?;
    let fm = coarse::f_map(&am, &curve, fmap_mode(a.degree))?;
    raster_io::save_raster(&output, fm.width, fm.height, &[("f_alpha", &fm.f)])?;
    Ok(())
}

pub fn segment_mf(a: SegmentMfArgs) -> Out {
    let t = ThresholdSpec::new(
        required(a.alpha_lo, "alpha-lo")?,
        required(a.alpha_hi, "alpha-hi")?,
        required(a.f_lo, "f-lo")?,
        required(a.f_hi, "f-hi")?,
    )?;
    let output = required(a.output.clone(), "output")?;
    let (am, fm) = match (&a.analysis.input, &a.alpha, &a.fmap) {
        (Some(_), None, None) => {
            let am = compute_alpha(&prepare(&a.analysis)?)?;
            let curve = coarse_curve(&am, a.classes)?;
            let fm = coarse::f_map(&am, &curve, fmap_mode(a.degree))?;
            (am, fm)
        }
        (None, Some(alpha), Some(fmap)) => (load_alpha(alpha)?, load_fmap(fmap)?),
        _ => return Err(CliError::Usage("give either --input, or both --alpha and --fmap".into())),
    };
    let mask = maybe_filter(segment::threshold_classify(&am, &fm, &t)?, a.majority)?;
    save_mask(&mask, &output)
}

pub fn segment_ndwi(a: NdwiArgs) -> Out {
    let stack = raster_io::load_raster(required(a.input, "input")?)?;
    let output = required(a.output, "output")?;
    let red = stack.band(a.red_band.as_deref().unwrap_or("red"))?;
    let swir = stack.band(a.swir_band.as_deref().unwrap_or("swir"))?;
    let index = segment::ndwi(red, swir)?;
    if let Some(path) = &a.index_output {
        raster_io::save_raster(path, index.width, index.height, &[("ndwi", &index.values)])?;
    }
    let mask = maybe_filter(segment::ndwi_classify(&index), a.majority)?;
    save_mask(&mask, &output)
}

pub fn filter_majority(a: FilterArgs) -> Out {
    let mask = raster_io::load_mask(required(a.input, "input")?)?;
    let output = required(a.output, "output")?;
    let out = segment::majority_filter(&mask, a.kernel.unwrap_or(7))?;
    save_mask(&out, &output)
}

pub fn compare(a: CompareArgs) -> Out {
    let test = raster_io::load_mask(required(a.test, "test")?)?;
    let reference = raster_io::load_mask(required(a.reference, "reference")?)?;
    let report = metrics(&confusion(&test, &reference)?);
    eprintln!("{report}");
    let json = report.to_json();
    match a.output {
        Some(path) => std::fs::write(&path, json + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn cascade_spec(weights: Option<Vec<f64>>, depth: Option<u32>, shuffle: Option<u64>, flag: &str) -> Result<CascadeSpec, CliError> {
    let w = required(weights, flag)?;
    let w: [f64; 4] = w
        .try_into()
        .map_err(|w: Vec<f64>| CliError::Usage(format!("--{flag} needs 4 values, got {}", w.len())))?;
    Ok(CascadeSpec::new(w, depth.unwrap_or(10), shuffle)?)
}

pub fn synth_cascade(a: SynthCascadeArgs) -> Out {
    let spec = cascade_spec(a.cascade.weights, a.cascade.depth, a.cascade.shuffle_seed, "weights")?;
    let output = required(a.output, "output")?;
    let mut band = synth::cascade(&spec)?;
    if let Some(pad) = a.pad.filter(|&p| p > 0) {
        band = synth::periodic_pad(&band, pad)?;
    }
    eprintln!("cascade: {}x{} band", band.width(), band.height());
    RasterStack::single(band).save(&output)?;
    let q = legendre::default_q_grid();
    if let Some(path) = a.analytic_output {
        raster_io::save_spectrum_csv(&synth::analytic_spectrum(&spec, &q)?, path)?;
    }
    if let Some(path) = a.tau_output {
        let tau = q.iter().map(|&q| synth::analytic_tau(&spec, q)).collect::<Result<Vec<_>, _>>()?;
        let tc = TauCurve { r2: vec![1.0; q.len()], q, tau, omitted: vec![] };
        raster_io::save_tau_csv(&tc, path)?;
    }
    Ok(())
}

fn parse_rect(s: &str) -> Result<Rect, CliError> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--water expects x,y,w,h, got '{s}'")))?;
    match v[..] {
        [x, y, w, h] => Ok(Rect { x, y, w, h }),
        _ => Err(CliError::Usage(format!("--water expects x,y,w,h, got '{s}'"))),
    }
}

pub fn synth_scene(a: SynthSceneArgs) -> Out {
    let water = a.water.unwrap_or_default().iter().map(|s| parse_rect(s)).collect::<Result<Vec<_>, _>>()?;
    let land = cascade_spec(Some(a.land_weights.unwrap_or(vec![0.7, 0.1, 0.1, 0.1])), a.land_depth, a.land_seed, "land-weights")?;
    let output = required(a.output, "output")?;
    let side = a.side.unwrap_or(1024);
    let seed = a.seed.unwrap_or(0);
    let truth = if a.reflectance.unwrap_or(false) {
        let spec = ReflectanceSpec { side, water, land, noise: a.noise_amp.unwrap_or(0.05), seed };
        let (stack, truth) = synth::reflectance_scene(&spec)?;
        stack.save(&output)?;
        truth
    } else {
        let spec = SceneSpec {
            side,
            margin: a.margin.unwrap_or(8),
            water,
            water_level: a.water_level.unwrap_or(1.0),
            noise_amp: a.noise_amp.unwrap_or(0.05),
            land,
            seed,
        };
        let scene = synth::composite_scene(&spec)?;
        RasterStack::single(scene.band).save(&output)?;
        eprintln!("scene: core {0}x{0} at ({1}, {1})", side, spec.margin);
        scene.truth
    };
    if let Some(path) = a.truth {
        save_mask(&truth, &path)?;
    }
    Ok(())
}

fn feature_stack(path: PathBuf, bands: Option<Vec<String>>) -> Result<RasterStack, CliError> {
    let stack = raster_io::load_raster(path)?;
    match bands {
        None => Ok(stack),
        Some(names) => Ok(RasterStack::new(
            names.iter().map(|n| stack.band(n).cloned()).collect::<Result<Vec<_>, _>>()?,
        )?),
    }
}

pub fn mlp_train(a: MlpTrainArgs) -> Out {
    let stack = feature_stack(required(a.input, "input")?, a.bands)?;
    let truth = raster_io::load_mask(required(a.truth, "truth")?)?;
    let output = required(a.output, "output")?;
    let data = Dataset::from_stack(&stack, &truth)?;
    let mut layers = vec![data.dim()];
    layers.extend(a.hidden.unwrap_or(vec![20]));
    layers.push(2);
    let defaults = TrainConfig::default();
    let optimizer = match a.optimizer.unwrap_or(OptimizerKind::Scg) {
        OptimizerKind::Scg => Optimizer::default(),
        OptimizerKind::Gd => Optimizer::GradientDescent { learning_rate: a.learning_rate.unwrap_or(0.1) },
    };
    let cfg = TrainConfig {
        seed: a.seed.unwrap_or(defaults.seed),
        max_epochs: a.max_epochs.unwrap_or(defaults.max_epochs),
        patience: a.patience.unwrap_or(defaults.patience),
        optimizer,
        normalize: a.normalize.unwrap_or(defaults.normalize),
        ..defaults
    };
    eprintln!("mlp: layers {layers:?}, {} samples", data.len());
    let report = mlp::train(&data, &layers, &cfg)?;
    eprintln!(
        "mlp: {} epochs, loss {:.6} -> {:.6}, best validation {:.6}, test accuracy {}",
        report.epochs,
        report.initial_loss,
        report.final_train_loss,
        report.best_validation_loss,
        report.test_accuracy.map_or("n/a".into(), |a| format!("{a:.2}%"))
    );
    report.model.save(&output)?;
    Ok(())
}

pub fn mlp_predict(a: MlpPredictArgs) -> Out {
    let model = MlpModel::load(&required(a.model, "model")?)?;
    let stack = feature_stack(required(a.input, "input")?, a.bands)?;
    let output = required(a.output, "output")?;
    let mask = maybe_filter(mlp::predict_mask(&model, &stack)?, a.majority)?;
    save_mask(&mask, &output)
}
