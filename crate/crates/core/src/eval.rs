//! Confusion matrices between a tested mask and a reference mask.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::SegmentationMask;

/// Counts with the tested method on the rows and the reference on the columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn population(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The matrix with test and reference roles exchanged.
    pub fn transposed(&self) -> Self {
        ConfusionMatrix { tp: self.tp, fp: self.fn_, fn_: self.fp, tn: self.tn }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ConfusionMatrix { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }
}

pub fn confusion(test: &SegmentationMask, reference: &SegmentationMask) -> Result<ConfusionMatrix> {
    if test.width() != reference.width() || test.height() != reference.height() {
        return Err(Error::DimensionMismatch(format!(
            "test mask {}x{} vs reference {}x{}",
            test.width(),
            test.height(),
            reference.width(),
            reference.height()
        )));
    }
    let w = test.width().max(1);
    Ok(test
        .water()
        .par_chunks(w)
        .zip(reference.water().par_chunks(w))
        .map(|(t_row, r_row)| {
            let mut cm = ConfusionMatrix::default();
            for (&t, &r) in t_row.iter().zip(r_row) {
                match (t, r) {
                    (true, true) => cm.tp += 1,
                    (true, false) => cm.fp += 1,
                    (false, true) => cm.fn_ += 1,
                    (false, false) => cm.tn += 1,
                }
            }
            cm
        })
        .reduce(ConfusionMatrix::default, |a, b| a + b))
}

/// The five percentages; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    MetricsReport {
        tp: cm.tp,
        fp: cm.fp,
        fn_: cm.fn_,
        tn: cm.tn,
        ppv: percent(cm.tp, cm.tp + cm.fp),
        npv: percent(cm.tn, cm.tn + cm.fn_),
        sensitivity: percent(cm.tp, cm.tp + cm.fn_),
        specificity: percent(cm.tn, cm.tn + cm.fp),
        accuracy: percent(cm.tp + cm.tn, cm.population()),
    }
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}%"));
        let pop = self.tp + self.fp + self.fn_ + self.tn;
        writeln!(f, "population {pop:>12} | ref water   | ref other   |")?;
        writeln!(f, "test water       | {:>11} | {:>11} | PPV {}", self.tp, self.fp, pct(self.ppv))?;
        writeln!(f, "test other       | {:>11} | {:>11} | NPV {}", self.fn_, self.tn, pct(self.npv))?;
        write!(
            f,
            "sensitivity {}  specificity {}  accuracy {}",
            pct(self.sensitivity),
            pct(self.specificity),
            pct(self.accuracy)
        )
    }
}
