//! Confidence-emitting multiclass classifiers.
//!
//! Two implementations sit behind [`train`] and
//! [`TrainedModel::predict_with_confidence`]: a random forest whose
//! confidence is the winning vote fraction, and a one-vs-rest linear margin
//! model whose confidence is the softmax probability of the winning class.
//!
//! Training is a pure function of `(spec, data)`. Features are put into
//! lexicographic order and samples are addressed by sorted sample id, so
//! permuting the columns or rows of the training matrix does not change
//! the fitted model.

mod forest;
mod linear;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{ConfidentPrediction, ExpressionMatrix, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use forest::{DecisionTree, RandomForest};
pub use linear::LinearOvr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    RandomForest,
    LinearOvr,
}

/// Number of candidate features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// `floor(sqrt(M))`, at least 1.
    Sqrt,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub features_per_split: FeaturesPerSplit,
    /// Draw a bootstrap sample per tree; when false every tree sees the full set.
    pub bootstrap: bool,
    pub seed: u64,
    pub linear_epochs: usize,
    pub linear_lr: f64,
    pub linear_reg: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::RandomForest,
            n_trees: 10,
            max_depth: None,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            seed: 0,
            linear_epochs: 50,
            linear_lr: 0.01,
            linear_reg: 1e-3,
        }
    }
}

impl ClassifierSpec {
    pub fn random_forest(n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            seed,
            ..Self::default()
        }
    }

    pub fn linear(seed: u64) -> Self {
        Self {
            kind: ClassifierKind::LinearOvr,
            seed,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ClassifierKind::RandomForest => {
                if self.n_trees == 0 {
                    return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
                }
                if self.max_depth == Some(0) {
                    return Err(Error::InvalidConfig("max_depth must be positive".into()));
                }
                if self.features_per_split == FeaturesPerSplit::Count(0) {
                    return Err(Error::InvalidConfig("features_per_split must be positive".into()));
                }
            }
            ClassifierKind::LinearOvr => {
                let ok = self.linear_epochs > 0
                    && self.linear_lr > 0.0
                    && self.linear_reg > 0.0
                    && self.linear_lr.is_finite()
                    && self.linear_reg.is_finite();
                if !ok {
                    return Err(Error::InvalidConfig(
                        "linear epochs, learning rate and regularization must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn split_width(&self, n_features: usize) -> Result<usize> {
        match self.features_per_split {
            FeaturesPerSplit::Sqrt => Ok(((n_features as f64).sqrt().floor() as usize).max(1)),
            FeaturesPerSplit::Count(k) if k <= n_features => Ok(k),
            FeaturesPerSplit::Count(k) => Err(Error::InvalidConfig(format!(
                "features_per_split {k} exceeds {n_features} features"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState<T> {
    Forest(RandomForest<T>),
    Linear(LinearOvr<T>),
}

/// A fitted classifier with its class order and feature panel.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    spec: ClassifierSpec,
    class_set: Vec<String>,
    features: Vec<String>,
    state: ModelState<T>,
}

/// Training matrix in the layout both learners consume.
pub(crate) struct TrainingView<T> {
    /// Sample-major rows over the canonical feature order.
    pub rows: Vec<Vec<T>>,
    /// Class index per row.
    pub targets: Vec<usize>,
    pub n_classes: usize,
}

pub fn train<T: Scalar>(spec: &ClassifierSpec, data: &LabeledDataset<T>) -> Result<TrainedModel<T>> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let class_set = data.class_set();
    if class_set.len() < 2 {
        return Err(Error::DegenerateLabels(class_set.len()));
    }
    let canonical = data.matrix().canonical();
    let features = canonical.feature_ids().to_vec();

    // Samples are visited in sample-id order so the model does not depend on column order.
    let mut order: Vec<usize> = (0..canonical.n_samples()).collect();
    order.sort_by(|&a, &b| canonical.sample_ids()[a].cmp(&canonical.sample_ids()[b]));
    let class_index: HashMap<&str, usize> = class_set
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let view = TrainingView {
        rows: order.iter().map(|&j| canonical.sample(j).to_vec()).collect(),
        targets: order
            .iter()
            .map(|&j| class_index[data.labels()[j].as_str()])
            .collect(),
        n_classes: class_set.len(),
    };

    let state = match spec.kind {
        ClassifierKind::RandomForest => ModelState::Forest(RandomForest::fit(spec, &view)?),
        ClassifierKind::LinearOvr => ModelState::Linear(LinearOvr::fit(spec, &view)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        class_set,
        features,
        state,
    })
}

impl<T: Scalar> TrainedModel<T> {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn state(&self) -> &ModelState<T> {
        &self.state
    }

    fn rows(&self, m: &ExpressionMatrix<T>) -> Result<Vec<Vec<T>>> {
        let m = m.select_features(&self.features)?;
        Ok((0..m.n_samples()).map(|j| m.sample(j).to_vec()).collect())
    }

    /// Per-sample class scores: vote counts for a forest, margins for the linear model.
    pub fn scores(&self, m: &ExpressionMatrix<T>) -> Result<Vec<Vec<f64>>> {
        let rows = self.rows(m)?;
        Ok(match &self.state {
            ModelState::Forest(f) => rows
                .iter()
                .map(|r| f.votes(r).into_iter().map(|v| v as f64).collect())
                .collect(),
            ModelState::Linear(l) => rows.iter().map(|r| l.margins(r)).collect(),
        })
    }

    /// One prediction per sample column. Ties go to the class listed first.
    pub fn predict_with_confidence(&self, m: &ExpressionMatrix<T>) -> Result<Vec<ConfidentPrediction>> {
        let rows = self.rows(m)?;
        Ok(rows
            .iter()
            .zip(m.sample_ids())
            .map(|(row, id)| {
                let (class, confidence) = match &self.state {
                    ModelState::Forest(f) => {
                        let votes = f.votes(row);
                        let c = first_argmax(&votes);
                        (c, votes[c] as f64 / f.n_trees() as f64)
                    }
                    ModelState::Linear(l) => {
                        let probs = softmax(&l.margins(row));
                        let c = first_argmax(&probs);
                        (c, probs[c])
                    }
                };
                ConfidentPrediction {
                    sample_id: id.clone(),
                    label: self.class_set[class].clone(),
                    confidence,
                }
            })
            .collect())
    }

    pub fn predict(&self, m: &ExpressionMatrix<T>) -> Result<Vec<String>> {
        Ok(self
            .predict_with_confidence(m)?
            .into_iter()
            .map(|p| p.label)
            .collect())
    }
}

pub(crate) fn first_argmax<V: PartialOrd + Copy>(xs: &[V]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for substream `stream` of `seed`.
pub(crate) fn substream(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::ids;
    use crate::data::ViewKind;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two well separated clusters on two features.
    pub(crate) fn separable(n: usize, seed: u64) -> LabeledDataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Array2::zeros((3, n));
        let mut labels = Vec::new();
        for j in 0..n {
            let class = j % 2;
            let shift = if class == 0 { -5.0 } else { 5.0 };
            values[[0, j]] = shift + rng.random_range(-1.0..1.0);
            values[[1, j]] = shift + rng.random_range(-1.0..1.0);
            values[[2, j]] = rng.random_range(-1.0..1.0);
            labels.push(if class == 0 { "A".to_string() } else { "B".to_string() });
        }
        let samples = (0..n).map(|j| format!("s{j:03}")).collect();
        let m = ExpressionMatrix::new(ids(&["f0", "f1", "f2"]), samples, values, ViewKind::MiRna).unwrap();
        LabeledDataset::new(m, labels).unwrap()
    }

    #[test]
    fn rf_memorizes_separable_training_set() {
        let data = separable(20, 3);
        let model = train(&ClassifierSpec::random_forest(10, 42), &data).unwrap();
        assert_eq!(model.predict(data.matrix()).unwrap(), data.labels());
    }

    #[test]
    fn degenerate_and_empty_inputs() {
        let data = separable(6, 1);
        let one = LabeledDataset::new(data.matrix().clone(), vec!["A".into(); 6]).unwrap();
        assert!(matches!(
            train(&ClassifierSpec::default(), &one),
            Err(Error::DegenerateLabels(1))
        ));
        let empty = LabeledDataset::new(
            ExpressionMatrix::<f64>::empty(ids(&["f0"]), ViewKind::MiRna).unwrap(),
            vec![],
        )
        .unwrap();
        assert!(matches!(train(&ClassifierSpec::default(), &empty), Err(Error::EmptyDataset)));
        let spec = ClassifierSpec {
            features_per_split: FeaturesPerSplit::Count(9),
            ..Default::default()
        };
        assert!(matches!(train(&spec, &data), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(30, 5);
        let probe = separable(25, 99);
        for spec in [ClassifierSpec::random_forest(10, 7), ClassifierSpec::linear(7)] {
            let a = train(&spec, &data).unwrap();
            let b = train(&spec, &data).unwrap();
            assert_eq!(a, b);
            assert_eq!(
                a.predict_with_confidence(probe.matrix()).unwrap(),
                b.predict_with_confidence(probe.matrix()).unwrap()
            );
        }
    }

    #[test]
    fn column_and_row_order_do_not_matter() {
        let data = separable(24, 8);
        let n = data.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let m = data.matrix().select_samples(&perm);
        let feats = ids(&["f2", "f0", "f1"]);
        let m = m.select_features(&feats).unwrap();
        let labels = perm.iter().map(|&j| data.labels()[j].clone()).collect();
        let shuffled = LabeledDataset::new(m, labels).unwrap();
        let probe = separable(40, 1234);
        for spec in [ClassifierSpec::random_forest(10, 1), ClassifierSpec::linear(1)] {
            let a = train(&spec, &data).unwrap();
            let b = train(&spec, &shuffled).unwrap();
            assert_eq!(
                a.predict_with_confidence(probe.matrix()).unwrap(),
                b.predict_with_confidence(probe.matrix()).unwrap()
            );
        }
    }

    #[test]
    fn predict_requires_training_features() {
        let data = separable(10, 2);
        let model = train(&ClassifierSpec::default(), &data).unwrap();
        let fewer = data.matrix().select_features(&ids(&["f0", "f1"])).unwrap();
        assert!(matches!(model.predict(&fewer), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn linear_confidence_is_open_unit_interval() {
        let data = separable(30, 4);
        let model = train(&ClassifierSpec::linear(3), &data).unwrap();
        let preds = model.predict_with_confidence(data.matrix()).unwrap();
        for (p, l) in preds.iter().zip(data.labels()) {
            assert!(p.confidence > 0.5 && p.confidence < 1.0);
            assert_eq!(&p.label, l);
        }
    }

    #[test]
    fn tie_break_prefers_first_class() {
        assert_eq!(first_argmax(&[5, 5]), 0);
        assert_eq!(first_argmax(&[1, 3, 3]), 1);
        let p = softmax(&[0.3, 0.3]);
        assert_eq!(first_argmax(&p), 0);
        assert_eq!(p[0], 0.5);
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream(1, 0), substream(1, 1));
        assert_ne!(substream(1, 0), substream(2, 0));
        assert_eq!(substream(9, 4), substream(9, 4));
    }
}
