//! Water-body segmentation of satellite rasters by per-pixel Hölder exponents
//! and coarse multifractal spectra, with NDWI and neural-network baselines.
//!
//! Typical pipeline:
//!
//! ```no_run
//! use mfwater::{holder, coarse, segment, raster_io, measure::MeasureField};
//! # fn main() -> mfwater::Result<()> {
//! let stack = raster_io::load_raster("scene.json")?;
//! let window = raster_io::AnalysisWindow::centered(stack.width(), stack.height(), 1024, 8)?;
//! let padded = raster_io::extract_window(&stack, &window)?;
//! let field = MeasureField::new(&padded.bands()[0])?;
//! let alpha = holder::alpha_map(&field, &window.local(), &holder::WindowLadder::optical())?;
//! let part = coarse::bin_alpha(&alpha, coarse::DEFAULT_CLASSES)?;
//! let curve = coarse::coarse_spectrum(&alpha, &part, &mfwater::measure::DEFAULT_MESH_WIDTHS)?;
//! let f = coarse::f_map(&alpha, &curve, coarse::FMapMode::Linear)?;
//! let t = segment::ThresholdSpec::new(2.15, 2.55, 0.0, 1.38)?;
//! let mask = segment::majority_filter(&segment::threshold_classify(&alpha, &f, &t)?, 7)?;
//! raster_io::save_mask(&mask, "water.pgm")?;
//! # Ok(()) }
//! ```

pub mod coarse;
pub mod error;
pub mod eval;
pub mod holder;
pub mod legendre;
pub mod measure;
pub mod mlp;
pub mod raster_io;
pub mod segment;
pub mod synth;

pub use error::{Error, Result};
