//! Moment sums over box meshes, the mass exponent and its Legendre spectrum.
//!
//! Sign convention: `chi_q(r) ~ r^(-tau(q))`, so a uniform 2-D measure has
//! `tau(q) = 2(1 - q)`. With that convention the transform that keeps the
//! uniform fixed point at `(alpha, f) = (2, 2)` is
//! `alpha(q) = -tau'(q)`, `f(alpha) = inf_q (q * alpha + tau(q))`.

use rayon::prelude::*;

use crate::coarse::{SpectrumCurve, SpectrumKind, SpectrumPoint};
use crate::error::{Error, Result};
use crate::holder::PreparedAbscissa;
use crate::measure::{Measure, Region};

/// -10 to 10 in steps of 0.25.
pub fn default_q_grid() -> Vec<f64> {
    q_grid(-10.0, 10.0, 0.25)
}

/// Evenly spaced q values from `lo` to `hi` inclusive.
pub fn q_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// `ln chi_q(r)` for every `(q, r)` pair. Logarithms avoid overflow at large |q|.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    pub q: Vec<f64>,
    pub widths: Vec<usize>,
    /// `[q index][width index]`
    pub ln_chi: Vec<Vec<f64>>,
}

impl PartitionTable {
    pub fn chi(&self, qi: usize, wi: usize) -> f64 {
        self.ln_chi[qi][wi].exp()
    }

    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q.iter().position(|&x| (x - q).abs() < 1e-12)
    }
}

/// Moment sums `chi_q(r) = sum mu_i^q` over the nonempty boxes of each mesh.
///
/// Box masses are normalized by the region's own mass, so `chi_1 = 1`.
pub fn partition_function<M: Measure + ?Sized>(
    field: &M,
    region: Region,
    q_grid: &[f64],
    widths: &[usize],
) -> Result<PartitionTable> {
    if q_grid.iter().any(|q| !q.is_finite()) {
        return Err(Error::InvalidArgument("q grid must be finite".into()));
    }
    if region.size == 0 || region.x + region.size > field.width() || region.y + region.size > field.height() {
        return Err(Error::OutOfBounds(format!("region {region:?} is outside the raster")));
    }
    if let Some(w) = widths.iter().find(|&&w| w == 0 || region.size % w != 0) {
        return Err(Error::InvalidArgument(format!("mesh width {w} does not tile side {}", region.size)));
    }
    let region_mass = field.rect_mass(region.x, region.y, region.size, region.size);
    if !(region_mass > 0.0) {
        return Err(Error::Degenerate("analysis region carries no mass".into()));
    }

    // log masses of the nonempty boxes, mesh by mesh, row-major
    let log_masses: Vec<Vec<f64>> = widths
        .par_iter()
        .map(|&w| {
            let cells = region.size / w;
            let mut out = Vec::with_capacity(cells * cells);
            for j in 0..cells {
                for i in 0..cells {
                    let m = field.rect_mass(region.x + i * w, region.y + j * w, w, w);
                    if m > 0.0 {
                        out.push((m / region_mass).ln());
                    }
                }
            }
            out
        })
        .collect();

    let ln_chi = q_grid
        .par_iter()
        .map(|&q| log_masses.iter().map(|lm| log_sum_exp(lm.iter().map(|l| q * l))).collect())
        .collect();
    Ok(PartitionTable { q: q_grid.to_vec(), widths: widths.to_vec(), ln_chi })
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut s = 0.0;
    for t in terms {
        s += (t - m).exp();
    }
    m + s.ln()
}

/// Mass exponent per q with the r² of its fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TauCurve {
    pub q: Vec<f64>,
    pub tau: Vec<f64>,
    pub r2: Vec<f64>,
    /// q values dropped for lack of usable scales.
    pub omitted: Vec<f64>,
}

impl TauCurve {
    pub fn at(&self, q: f64) -> Option<f64> {
        self.q.iter().position(|&x| (x - q).abs() < 1e-12).map(|i| self.tau[i])
    }
}

/// `tau(q)` as the OLS slope of `ln chi_q(r)` against `-ln r`.
pub fn tau(table: &PartitionTable) -> TauCurve {
    let mut out = TauCurve::default();
    for (qi, &q) in table.q.iter().enumerate() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = table
            .widths
            .iter()
            .zip(&table.ln_chi[qi])
            .filter(|(_, l)| l.is_finite())
            .map(|(&w, &l)| (-(w as f64).ln(), l))
            .unzip();
        match PreparedAbscissa::new(&xs) {
            Ok(abscissa) => {
                let (slope, _, r2) = abscissa.fit(&ys);
                out.q.push(q);
                out.tau.push(slope);
                out.r2.push(r2);
            }
            Err(_) => out.omitted.push(q),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreSpectrum {
    pub curve: SpectrumCurve,
    /// Places where `alpha(q)` increased with q by more than the tolerance.
    pub warnings: Vec<String>,
}

const MONOTONE_TOLERANCE: f64 = 1e-6;
const MERGE_TOLERANCE: f64 = 1e-9;

/// Legendre transform of a tau curve by central differences on its q grid.
///
/// The end points of the grid have no central difference and are dropped.
pub fn legendre_spectrum(tc: &TauCurve) -> Result<LegendreSpectrum> {
    let n = tc.q.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("Legendre transform needs 3 q values, got {n}")));
    }
    let mut raw = Vec::with_capacity(n - 2);
    for j in 1..n - 1 {
        let alpha = -(tc.tau[j + 1] - tc.tau[j - 1]) / (tc.q[j + 1] - tc.q[j - 1]);
        // inf over the grid equals q_j * alpha + tau_j when tau is concave,
        // and keeps the emitted curve concave when the estimate is not
        let f = tc.q.iter().zip(&tc.tau).map(|(q, t)| q * alpha + t).fold(f64::INFINITY, f64::min);
        raw.push((tc.q[j], alpha, f));
    }
    let mut warnings = Vec::new();
    for w in raw.windows(2) {
        if w[1].1 > w[0].1 + MONOTONE_TOLERANCE {
            warnings.push(format!(
                "alpha increases from {:.6} at q={} to {:.6} at q={}",
                w[0].1, w[0].0, w[1].1, w[1].0
            ));
        }
    }
    raw.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut points: Vec<SpectrumPoint> = Vec::with_capacity(raw.len());
    for (_, alpha, f) in raw {
        match points.last_mut() {
            Some(last) if alpha - last.alpha <= MERGE_TOLERANCE => last.f = last.f.max(f),
            _ => points.push(SpectrumPoint { alpha, f, count: 0 }),
        }
    }
    Ok(LegendreSpectrum { curve: SpectrumCurve { points, kind: SpectrumKind::Legendre }, warnings })
}

/// Largest increase of chord slope along the curve; `<= 0` means concave.
pub fn concavity_violation(curve: &SpectrumCurve) -> f64 {
    let slopes: Vec<f64> = curve
        .points
        .windows(2)
        .map(|w| (w[1].f - w[0].f) / (w[1].alpha - w[0].alpha))
        .collect();
    slopes.windows(2).map(|s| s[1] - s[0]).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{mesh_widths_for, MeasureField};
    use crate::raster_io::RasterBand;

    #[test]
    fn grid_has_81_points() {
        let g = default_q_grid();
        assert_eq!(g.len(), 81);
        assert_eq!((g[0], g[40], g[80]), (-10.0, 0.0, 10.0));
    }

    #[test]
    fn uniform_closed_forms() {
        let band = RasterBand::filled(64, 64, 2.5, "g").unwrap();
        let field = MeasureField::new(&band).unwrap();
        let widths = mesh_widths_for(64);
        let table = partition_function(&field, Region::whole(64), &[0.0, 1.0, 2.0], &widths).unwrap();
        for (wi, &w) in widths.iter().enumerate() {
            let n = ((64 / w) * (64 / w)) as f64;
            assert!((table.chi(0, wi) - n).abs() <= 1e-9 * n);
            assert!((table.chi(1, wi) - 1.0).abs() <= 1e-9);
            assert!((table.chi(2, wi) - 1.0 / n).abs() <= 1e-9 / n);
        }
        let tc = tau(&table);
        for (q, t) in tc.q.iter().zip(&tc.tau) {
            assert!((t - 2.0 * (1.0 - q)).abs() < 1e-9);
        }
    }

    #[test]
    fn full_size_uniform_chi2_at_r4() {
        let band = RasterBand::filled(1024, 1024, 1.0, "g").unwrap();
        let field = MeasureField::new(&band).unwrap();
        let table = partition_function(&field, Region::whole(1024), &[2.0], &[4]).unwrap();
        assert!((table.chi(0, 0) - 1.0 / 65536.0).abs() < 1e-18);
    }

    #[test]
    fn zero_boxes_are_skipped_for_negative_q() {
        let band = RasterBand::from_fn(16, 16, "g", |x, _| if x < 8 { 1.0 } else { 0.0 }).unwrap();
        let field = MeasureField::new(&band).unwrap();
        let table = partition_function(&field, Region::whole(16), &[-2.0, 0.0], &[4, 8, 16]).unwrap();
        assert!((table.chi(1, 0) - 8.0).abs() < 1e-12);
        assert!(table.ln_chi[0].iter().all(|l| l.is_finite()));
    }

    #[test]
    fn uniform_tau_collapses_to_one_point() {
        let q = default_q_grid();
        let tc = TauCurve { tau: q.iter().map(|q| 2.0 * (1.0 - q)).collect(), r2: vec![1.0; q.len()], q, omitted: vec![] };
        let ls = legendre_spectrum(&tc).unwrap();
        assert_eq!(ls.curve.points.len(), 1);
        let p = ls.curve.points[0];
        assert!((p.alpha - 2.0).abs() < 1e-12 && (p.f - 2.0).abs() < 1e-12);
        assert!(ls.warnings.is_empty());
    }

    #[test]
    fn non_monotone_alpha_is_flagged() {
        let q = vec![-1.0, 0.0, 1.0, 2.0, 3.0];
        let tc = TauCurve { tau: vec![0.0, 1.0, 0.0, 0.0, 0.0], r2: vec![1.0; 5], q, omitted: vec![] };
        let ls = legendre_spectrum(&tc).unwrap();
        assert!(!ls.warnings.is_empty());
        assert!(legendre_spectrum(&TauCurve { q: vec![0.0, 1.0], tau: vec![2.0, 0.0], r2: vec![1.0; 2], omitted: vec![] }).is_err());
    }
}
