//! Serializable experiment results: metrics plus training-set growth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ViewKind;
use crate::metrics::EvalReport;

/// One pass of a self- or co-training loop.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Samples appended to this view's training set.
    pub promoted_count: usize,
    pub promoted_per_class: BTreeMap<String, usize>,
    /// Newly taken predictions above the threshold made by this view's classifier.
    pub confident_count: usize,
    /// Confident samples dropped because they could not be mapped.
    pub skipped_count: usize,
    /// Training set size after the append.
    pub training_size: usize,
    /// Held-out weighted F1 of the retrained model, when an eval set was given.
    pub weighted_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub initial_training_size: usize,
    pub iterations: Vec<IterationRecord>,
}

impl TrainingHistory {
    pub fn new(initial_training_size: usize) -> Self {
        Self {
            initial_training_size,
            iterations: Vec::new(),
        }
    }

    pub fn final_training_size(&self) -> usize {
        self.iterations
            .last()
            .map_or(self.initial_training_size, |r| r.training_size)
    }

    pub fn total_promoted(&self) -> usize {
        self.iterations.iter().map(|r| r.promoted_count).sum()
    }

    /// Sizes never shrink and each equals the previous size plus that iteration's promotions.
    pub fn growth_is_consistent(&self) -> bool {
        let mut size = self.initial_training_size;
        for r in &self.iterations {
            if r.training_size != size + r.promoted_count
                || r.promoted_per_class.values().sum::<usize>() != r.promoted_count
            {
                return false;
            }
            size = r.training_size;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Baseline,
    SelfTrain,
    CoTrain,
}

/// Test-set metrics and training history of one classifier.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViewReport {
    pub view: ViewKind,
    #[serde(flatten)]
    pub eval: EvalReport,
    #[serde(flatten)]
    pub history: TrainingHistory,
}

/// Top level of the report JSON. The primary classifier's fields sit at the
/// top level; in co-training mode the gene-view classifier is in `partner`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub mode: Mode,
    #[serde(flatten)]
    pub primary: ViewReport,
    pub partner: Option<ViewReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{read_report_json, write_report_json};
    use crate::metrics::confusion;

    fn sample() -> ExperimentReport {
        let eval = confusion(&["a", "b", "b"], &["a", "b", "a"]).unwrap().evaluate().unwrap();
        let mut history = TrainingHistory::new(10);
        history.iterations.push(IterationRecord {
            iteration: 1,
            promoted_count: 3,
            promoted_per_class: [("a".to_string(), 2), ("b".to_string(), 1)].into(),
            confident_count: 3,
            skipped_count: 0,
            training_size: 13,
            weighted_f1: Some(0.123456789),
        });
        ExperimentReport {
            name: "demo".into(),
            mode: Mode::SelfTrain,
            primary: ViewReport {
                view: ViewKind::Gene,
                eval,
                history,
            },
            partner: None,
        }
    }

    #[test]
    fn json_round_trip_and_keys() {
        let dir = tempfile::TempDir::new().unwrap();
        let p = dir.path().join("r.json");
        let r = sample();
        write_report_json(&r, &p).unwrap();
        assert_eq!(read_report_json(&p).unwrap(), r);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        for key in ["classes", "per_class", "weighted", "iterations"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let it = &v["iterations"][0];
        for key in ["iteration", "promoted_count", "training_size", "weighted_f1"] {
            assert!(it.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn zero_iterations_serialize_as_empty_array() {
        let mut r = sample();
        r.primary.history.iterations.clear();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["iterations"], serde_json::json!([]));
    }

    #[test]
    fn growth_check() {
        let mut h = sample().primary.history;
        assert!(h.growth_is_consistent());
        h.iterations[0].training_size = 12;
        assert!(!h.growth_is_consistent());
    }
}
