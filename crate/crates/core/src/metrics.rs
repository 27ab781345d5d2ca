//! Multiclass precision / recall / F1 with support-weighted averages.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_set: Vec<String>,
    counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    /// Builds scores from P and R; F1 is their harmonic mean, 0 when both are 0.
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Per-class and weighted scores for one evaluated classifier.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub support: BTreeMap<String, usize>,
    pub per_class: BTreeMap<String, Scores>,
    pub weighted: Scores,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    /// Tallies over the sorted union of true and predicted labels.
    pub fn from_labels<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Result<Self> {
        let classes: BTreeSet<&str> = truth
            .iter()
            .chain(predicted.iter())
            .map(AsRef::as_ref)
            .collect();
        let classes: Vec<String> = classes.into_iter().map(str::to_owned).collect();
        Self::with_classes(classes, truth, predicted)
    }

    /// Tallies over a fixed class order; unseen labels extend it in sorted order.
    pub fn with_classes<S: AsRef<str>>(
        mut class_set: Vec<String>,
        truth: &[S],
        predicted: &[S],
    ) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch(truth.len(), predicted.len()));
        }
        let extra: BTreeSet<&str> = truth
            .iter()
            .chain(predicted.iter())
            .map(AsRef::as_ref)
            .filter(|l| !class_set.iter().any(|c| c == l))
            .collect();
        class_set.extend(extra.into_iter().map(str::to_owned));
        let index: HashMap<&str, usize> = class_set
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let k = class_set.len();
        let mut counts = vec![vec![0usize; k]; k];
        for (t, p) in truth.iter().zip(predicted) {
            counts[index[t.as_ref()]][index[p.as_ref()]] += 1;
        }
        Ok(Self { class_set, counts })
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct = (0..self.class_set.len()).map(|i| self.counts[i][i]).sum();
        ratio(correct, self.total())
    }

    /// Per-class and support-weighted scores; 0/0 cells are 0.
    pub fn evaluate(&self) -> Result<EvalReport> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyMatrix);
        }
        let k = self.class_set.len();
        let mut report = EvalReport {
            classes: self.class_set.clone(),
            ..Default::default()
        };
        let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = self.counts[c][c];
            let predicted: usize = (0..k).map(|t| self.counts[t][c]).sum();
            let support: usize = self.counts[c].iter().sum();
            let s = Scores::from_precision_recall(ratio(tp, predicted), ratio(tp, support));
            let w = support as f64;
            wp += w * s.precision;
            wr += w * s.recall;
            wf += w * s.f1;
            report.support.insert(self.class_set[c].clone(), support);
            report.per_class.insert(self.class_set[c].clone(), s);
        }
        let t = total as f64;
        report.weighted = Scores {
            precision: wp / t,
            recall: wr / t,
            f1: wf / t,
        };
        Ok(report)
    }
}

pub fn confusion<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_labels(truth, predicted)
}

pub fn evaluate(cm: &ConfusionMatrix) -> Result<EvalReport> {
    cm.evaluate()
}

/// Renders a `[0, 1]` score as a percentage with one decimal.
pub fn percent(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}
