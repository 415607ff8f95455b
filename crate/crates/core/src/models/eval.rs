use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl Confusion {
    pub fn add(&mut self, y: u8, pred: u8) {
        match (y, pred) {
            (1, 1) => self.true_positives += 1,
            (0, 1) => self.false_positives += 1,
            (0, 0) => self.true_negatives += 1,
            _ => self.false_negatives += 1,
        }
    }

    pub fn n(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    fn ratio(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        Self::ratio(self.true_positives + self.true_negatives, self.n())
    }

    pub fn tpr(&self) -> Option<f64> {
        Self::ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn tnr(&self) -> Option<f64> {
        Self::ratio(self.true_negatives, self.true_negatives + self.false_positives)
    }

    pub fn fpr(&self) -> Option<f64> {
        Self::ratio(self.false_positives, self.true_negatives + self.false_positives)
    }
}

/// Rates over one set of rows. `None` marks a rate whose conditioning cell is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n: usize,
    pub accuracy: Option<f64>,
    pub true_positive_rate: Option<f64>,
    pub true_negative_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub confusion: Confusion,
}

impl From<Confusion> for Rates {
    fn from(c: Confusion) -> Self {
        Rates {
            n: c.n(),
            accuracy: c.accuracy(),
            true_positive_rate: c.tpr(),
            true_negative_rate: c.tnr(),
            false_positive_rate: c.fpr(),
            confusion: c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub overall: Rates,
    /// Indexed by `s`.
    pub groups: [Rates; 2],
}

impl EvalMetrics {
    pub fn accuracy(&self) -> f64 {
        self.overall.accuracy.unwrap_or(f64::NAN)
    }
}

pub fn evaluate_predictions(y: &[u8], s: &[u8], pred: &[u8]) -> Result<EvalMetrics> {
    if y.len() != s.len() || y.len() != pred.len() {
        return Err(Error::Argument(format!(
            "length mismatch: y {}, s {}, predictions {}",
            y.len(),
            s.len(),
            pred.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty dataset".into()));
    }
    let mut all = Confusion::default();
    let mut groups = [Confusion::default(); 2];
    for i in 0..y.len() {
        all.add(y[i], pred[i]);
        groups[s[i] as usize].add(y[i], pred[i]);
    }
    Ok(EvalMetrics {
        overall: all.into(),
        groups: [groups[0].into(), groups[1].into()],
    })
}

pub fn evaluate(clf: &dyn Classifier, ds: &EncodedDataset) -> Result<EvalMetrics> {
    evaluate_predictions(&ds.y, &ds.s, &clf.predict_dataset(ds))
}
