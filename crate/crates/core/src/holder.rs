//! Per-pixel Hölder exponents from the growth of window mass with window width.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::raster_io::AnalysisWindow;

/// Abscissae of a least-squares line, centred once and reused for many ordinates.
#[derive(Debug, Clone)]
pub struct PreparedAbscissa {
    centered: Vec<f64>,
    mean: f64,
    sxx: f64,
}

impl PreparedAbscissa {
    pub fn new(xs: &[f64]) -> Result<Self> {
        if xs.len() < 3 {
            return Err(Error::Degenerate(format!("line fit needs 3 points, got {}", xs.len())));
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let centered: Vec<f64> = xs.iter().map(|x| x - mean).collect();
        let sxx: f64 = centered.iter().map(|d| d * d).sum();
        if !(sxx > 0.0) || !sxx.is_finite() {
            return Err(Error::Degenerate("line fit abscissae are all equal".into()));
        }
        Ok(PreparedAbscissa { centered, mean, sxx })
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    /// `(slope, intercept, r2)` of the OLS line through `(x_i, ys[i])`.
    pub fn fit(&self, ys: &[f64]) -> (f64, f64, f64) {
        debug_assert_eq!(ys.len(), self.centered.len());
        let n = ys.len() as f64;
        let y_mean = ys.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        for (dx, y) in self.centered.iter().zip(ys) {
            sxy += dx * (y - y_mean);
        }
        let slope = sxy / self.sxx;
        let mut ss_tot = 0.0;
        let mut ss_res = 0.0;
        for (dx, y) in self.centered.iter().zip(ys) {
            let dy = y - y_mean;
            ss_tot += dy * dy;
            let r = dy - slope * dx;
            ss_res += r * r;
        }
        let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
        (slope, y_mean - slope * self.mean, r2)
    }
}

/// Ordinary least-squares slope and coefficient of determination.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!("{} abscissae vs {} ordinates", xs.len(), ys.len())));
    }
    let (slope, _, r2) = PreparedAbscissa::new(xs)?.fit(ys);
    Ok((slope, r2))
}

/// Neighbourhood sizes used for the local fit: each `k` is a `(2k-1)`-wide square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowLadder {
    ks: Vec<usize>,
}

impl WindowLadder {
    pub fn new(ks: Vec<usize>) -> Result<Self> {
        if ks.len() < 3 {
            return Err(Error::InvalidArgument(format!("window ladder needs 3 sizes, got {}", ks.len())));
        }
        if ks[0] == 0 || ks.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidArgument(format!("window ladder {ks:?} must be positive and strictly increasing")));
        }
        Ok(WindowLadder { ks })
    }

    /// k = 2..9: widths 3 to 17.
    pub fn optical() -> Self {
        WindowLadder { ks: (2..=9).collect() }
    }

    /// k = 3..9. The two smallest windows are dominated by speckle in radar data.
    pub fn sar() -> Self {
        WindowLadder { ks: (3..=9).collect() }
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn widths(&self) -> impl Iterator<Item = usize> + '_ {
        self.ks.iter().map(|k| 2 * k - 1)
    }

    /// Margin a window needs around its centre pixel.
    pub fn max_halfwidth(&self) -> usize {
        self.ks[self.ks.len() - 1] - 1
    }
}

/// Hölder exponent estimates over the core of an analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMap {
    pub width: usize,
    pub height: usize,
    /// NaN where `valid` is false.
    pub alpha: Vec<f64>,
    pub r2: Vec<f64>,
    pub valid: Vec<bool>,
}

impl AlphaMap {
    /// Rebuilds a map from exported bands; NaN alpha marks invalid pixels.
    pub fn from_bands(width: usize, height: usize, alpha: Vec<f64>, r2: Option<Vec<f64>>) -> Result<Self> {
        if alpha.len() != width * height || r2.as_ref().is_some_and(|r| r.len() != alpha.len()) {
            return Err(Error::DimensionMismatch("alpha map bands do not match the grid".into()));
        }
        let valid: Vec<bool> = alpha.iter().map(|a| a.is_finite()).collect();
        let r2 = r2.unwrap_or_else(|| valid.iter().map(|&v| if v { 1.0 } else { f64::NAN }).collect());
        Ok(AlphaMap { width, height, alpha, r2, valid })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.alpha[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Marks pixels whose fit explains less than `min_r2` of the variance as invalid.
    pub fn with_min_r2(mut self, min_r2: f64) -> Self {
        for i in 0..self.alpha.len() {
            if self.valid[i] && self.r2[i] < min_r2 {
                self.valid[i] = false;
                self.alpha[i] = f64::NAN;
            }
        }
        self
    }

    /// Valid alpha range, or `None` when no pixel is valid.
    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.alpha.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(a, _)| *a);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), a| (lo.min(a), hi.max(a))))
    }
}

/// Fits `ln mu` against `ln width` over the ladder for every core pixel.
///
/// Pixels for which any window is empty get no exponent.
pub fn alpha_map<M: Measure + ?Sized>(field: &M, window: &AnalysisWindow, ladder: &WindowLadder) -> Result<AlphaMap> {
    window.validate(field.width(), field.height())?;
    if ladder.max_halfwidth() > window.pad {
        return Err(Error::OutOfBounds(format!(
            "largest window needs {} pixels of padding, window has {}",
            ladder.max_halfwidth(),
            window.pad
        )));
    }
    let side = window.core_size;
    let xs: Vec<f64> = ladder.widths().map(|w| (w as f64).ln()).collect();
    let abscissa = PreparedAbscissa::new(&xs)?;
    let halfwidths: Vec<usize> = ladder.ks().iter().map(|k| k - 1).collect();
    let total = field.total_mass();

    let mut alpha = vec![f64::NAN; side * side];
    let mut r2 = vec![f64::NAN; side * side];
    let mut valid = vec![false; side * side];

    alpha
        .par_chunks_mut(side)
        .zip(r2.par_chunks_mut(side))
        .zip(valid.par_chunks_mut(side))
        .enumerate()
        .for_each(|(row, ((a_row, r_row), v_row))| {
            let cy = window.core_y + row;
            let mut ys = vec![0.0; halfwidths.len()];
            for col in 0..side {
                let cx = window.core_x + col;
                let mut ok = true;
                for (y, &hw) in ys.iter_mut().zip(&halfwidths) {
                    let w = 2 * hw + 1;
                    let mu = field.rect_mass(cx - hw, cy - hw, w, w) / total;
                    if mu <= 0.0 {
                        ok = false;
                        break;
                    }
                    *y = mu.ln();
                }
                if ok {
                    let (slope, _, fit_r2) = abscissa.fit(&ys);
                    a_row[col] = slope;
                    r_row[col] = fit_r2;
                    v_row[col] = true;
                }
            }
        });

    Ok(AlphaMap { width: side, height: side, alpha, r2, valid })
}
