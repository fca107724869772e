use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::coarse::{SpectrumCurve, SpectrumKind, SpectrumPoint};
use crate::error::{Error, Result};
use crate::legendre::TauCurve;

const SPECTRUM_HEADER: &str = "alpha,f,count";
const TAU_HEADER: &str = "q,tau,r2";

pub fn spectrum_to_csv(curve: &SpectrumCurve) -> String {
    let mut out = format!("{SPECTRUM_HEADER}\n");
    for p in &curve.points {
        writeln!(out, "{:.8},{:.8},{}", p.alpha, p.f, p.count).unwrap();
    }
    out
}

pub fn save_spectrum_csv(curve: &SpectrumCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, spectrum_to_csv(curve)).map_err(|e| Error::io(path, e))
}

fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::Format(format!("expected CSV header '{header}'")));
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 2, l.split(',').map(str::trim).collect())))
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, line: usize) -> Result<T> {
    cols.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("line {line}: bad column {}", i + 1)))
}

/// Parses a spectrum CSV. The kind is not stored on disk and must be supplied.
pub fn load_spectrum_csv(path: impl AsRef<Path>, kind: SpectrumKind) -> Result<SpectrumCurve> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (line, cols) in rows(&text, SPECTRUM_HEADER)? {
        if cols.len() != 3 {
            return Err(Error::Format(format!("line {line}: expected 3 columns")));
        }
        points.push(SpectrumPoint {
            alpha: field(&cols, 0, line)?,
            f: field(&cols, 1, line)?,
            count: field(&cols, 2, line)?,
        });
    }
    Ok(SpectrumCurve { points, kind })
}

pub fn save_tau_csv(tau: &TauCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("{TAU_HEADER}\n");
    for ((q, t), r2) in tau.q.iter().zip(&tau.tau).zip(&tau.r2) {
        writeln!(out, "{q:.8},{t:.8},{r2:.8}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_tau_csv(path: impl AsRef<Path>) -> Result<TauCurve> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tau = TauCurve::default();
    for (line, cols) in rows(&text, TAU_HEADER)? {
        tau.q.push(field(&cols, 0, line)?);
        tau.tau.push(field(&cols, 1, line)?);
        tau.r2.push(field(&cols, 2, line)?);
    }
    Ok(tau)
}
