//! Self-training: a classifier labels the unlabeled pools, its most
//! confident predictions join the training set, and it is retrained.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::classifier::{train, ClassifierSpec, TrainedModel};
use crate::data::{
    append_samples, feature_overlap, shared_features, ConfidentPrediction, ExpressionMatrix,
    LabeledDataset, UnlabeledDataset,
};
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::report::{IterationRecord, TrainingHistory};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainConfig {
    /// Promotion requires confidence strictly above this value.
    pub alpha: f64,
    pub max_iterations: usize,
    pub classifier: ClassifierSpec,
    /// Drop promoted samples from their pool so they are not scored again.
    pub remove_promoted: bool,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            max_iterations: 2,
            classifier: ClassifierSpec::default(),
            remove_promoted: true,
        }
    }
}

pub(crate) fn validate_loop(alpha: f64, max_iterations: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if max_iterations == 0 {
        return Err(Error::InvalidConfig("max_iterations must be positive".into()));
    }
    Ok(())
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        validate_loop(self.alpha, self.max_iterations)?;
        self.classifier.validate()
    }
}

/// Predictions with confidence strictly greater than `alpha`, order kept.
pub fn choose_most_confident(preds: &[ConfidentPrediction], alpha: f64) -> Vec<ConfidentPrediction> {
    preds.iter().filter(|p| p.confidence > alpha).cloned().collect()
}

/// A pool sample appended to the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Promotion {
    pub iteration: usize,
    pub pool: String,
    /// Id inside the pool.
    pub source_id: String,
    /// Id inside the training set.
    pub sample_id: String,
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutput<T> {
    pub model: TrainedModel<T>,
    pub history: TrainingHistory,
    pub training_set: LabeledDataset<T>,
    pub promotions: Vec<Promotion>,
}

/// Weighted F1 of `model` on a labeled set.
pub fn weighted_f1<T: Scalar>(model: &TrainedModel<T>, eval: &LabeledDataset<T>) -> Result<f64> {
    let predicted = model.predict(eval.matrix())?;
    let cm = ConfusionMatrix::with_classes(model.class_set().to_vec(), eval.labels(), &predicted)?;
    Ok(cm.evaluate()?.weighted.f1)
}

/// Pool state across iterations.
pub(crate) struct Pool<T> {
    pub name: String,
    pub matrix: ExpressionMatrix<T>,
    pub active: Vec<bool>,
    pub promoted: HashSet<usize>,
}

/// Confident, not yet promoted samples of one pool.
pub(crate) struct PoolHarvest<T> {
    pub matrix: ExpressionMatrix<T>,
    pub predictions: Vec<ConfidentPrediction>,
}

impl<T: Scalar> Pool<T> {
    pub fn new(name: String, matrix: ExpressionMatrix<T>) -> Self {
        let n = matrix.n_samples();
        Self {
            name,
            matrix,
            active: vec![true; n],
            promoted: HashSet::new(),
        }
    }

    /// Scores the active samples and takes the confident ones that were
    /// never taken before.
    pub fn harvest(
        &mut self,
        model: &TrainedModel<T>,
        alpha: f64,
        remove_promoted: bool,
    ) -> Result<PoolHarvest<T>> {
        let cols: Vec<usize> = (0..self.matrix.n_samples()).filter(|&j| self.active[j]).collect();
        let preds = model.predict_with_confidence(&self.matrix.select_samples(&cols))?;
        let mut picked = Vec::new();
        let mut predictions = Vec::new();
        for (&col, pred) in cols.iter().zip(&preds) {
            if pred.confidence <= alpha {
                continue;
            }
            if self.promoted.insert(col) {
                picked.push(col);
                predictions.push(pred.clone());
            }
            if remove_promoted {
                self.active[col] = false;
            }
        }
        Ok(PoolHarvest {
            matrix: self.matrix.select_samples(&picked),
            predictions,
        })
    }
}

fn count_by_label<'a>(labels: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.clone()).or_insert(0) += 1;
    }
    counts
}

pub(crate) fn labeled_batch<T: Scalar>(
    matrix: &ExpressionMatrix<T>,
    preds: &[ConfidentPrediction],
    prefix: &str,
) -> Result<LabeledDataset<T>> {
    let renamed = matrix.rename_samples(|s| format!("{prefix}{s}"))?;
    LabeledDataset::new(renamed, preds.iter().map(|p| p.label.clone()).collect())
}

/// Feature panel shared by `labeled` and every pool that overlaps it, sorted.
pub(crate) fn common_panel<T: Scalar>(
    labeled: &ExpressionMatrix<T>,
    pools: &[UnlabeledDataset<T>],
) -> Result<Vec<String>> {
    let mut panel = shared_features(labeled.feature_ids(), labeled.feature_ids());
    if pools.is_empty() {
        return Ok(panel);
    }
    let mut any = false;
    for pool in pools {
        if feature_overlap(labeled, &pool.matrix) == 0 {
            continue;
        }
        any = true;
        panel = shared_features(&panel, pool.matrix.feature_ids());
    }
    if !any || panel.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(panel)
}

pub fn self_train<T: Scalar>(
    labeled: &LabeledDataset<T>,
    pools: &[UnlabeledDataset<T>],
    cfg: &SelfTrainConfig,
    eval: Option<&LabeledDataset<T>>,
) -> Result<SelfTrainOutput<T>> {
    cfg.validate()?;
    let panel = common_panel(labeled.matrix(), pools)?;
    let mut training = labeled.select_features(&panel)?;
    let mut state: Vec<Pool<T>> = pools
        .iter()
        .filter(|p| feature_overlap(labeled.matrix(), &p.matrix) > 0)
        .map(|p| Ok(Pool::new(p.name.clone(), p.matrix.select_features(&panel)?)))
        .collect::<Result<_>>()?;
    let eval = eval
        .map(|e| e.select_features(&panel).map_err(|err| err.context("eval set")))
        .transpose()?;

    let mut model = train(&cfg.classifier, &training)?;
    let mut best_f1 = eval.as_ref().map(|e| weighted_f1(&model, e)).transpose()?;
    let mut history = TrainingHistory::new(training.len());
    let mut promotions = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        let mut record = IterationRecord {
            iteration,
            ..Default::default()
        };
        for pool in state.iter_mut() {
            let harvest = pool.harvest(&model, cfg.alpha, cfg.remove_promoted)?;
            record.confident_count += harvest.predictions.len();
            if harvest.predictions.is_empty() {
                continue;
            }
            let prefix = format!("{}:", pool.name);
            let batch = labeled_batch(&harvest.matrix, &harvest.predictions, &prefix)?;
            training = append_samples(&training, &batch)?;
            for (pred, new_id) in harvest.predictions.iter().zip(batch.matrix().sample_ids()) {
                promotions.push(Promotion {
                    iteration,
                    pool: pool.name.clone(),
                    source_id: pred.sample_id.clone(),
                    sample_id: new_id.clone(),
                    label: pred.label.clone(),
                    confidence: pred.confidence,
                });
            }
            record.promoted_count += batch.len();
            for (label, n) in count_by_label(batch.labels().iter()) {
                *record.promoted_per_class.entry(label).or_insert(0) += n;
            }
        }
        record.training_size = training.len();

        if record.promoted_count == 0 {
            record.weighted_f1 = best_f1;
            history.iterations.push(record);
            break;
        }
        model = train(&cfg.classifier, &training)?;
        let f1 = eval.as_ref().map(|e| weighted_f1(&model, e)).transpose()?;
        record.weighted_f1 = f1;
        history.iterations.push(record);
        match (f1, best_f1) {
            (Some(now), Some(before)) if now <= before => break,
            _ => best_f1 = f1,
        }
    }

    Ok(SelfTrainOutput {
        model,
        history,
        training_set: training,
        promotions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::ids;
    use crate::data::ViewKind;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pred(id: &str, label: &str, c: f64) -> ConfidentPrediction {
        ConfidentPrediction {
            sample_id: id.into(),
            label: label.into(),
            confidence: c,
        }
    }

    #[test]
    fn threshold_is_strict() {
        let preds = [pred("s1", "A", 0.95), pred("s2", "B", 0.5), pred("s3", "A", 0.9)];
        assert_eq!(choose_most_confident(&preds, 0.9), vec![preds[0].clone()]);
        let rf = [pred("a", "A", 1.0), pred("b", "A", 0.9), pred("c", "B", 1.0)];
        let out = choose_most_confident(&rf, 1.0);
        assert!(out.is_empty());
    }

    fn blobs(n: usize, seed: u64, prefix: &str) -> LabeledDataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Array2::zeros((2, n));
        let mut labels = Vec::new();
        for j in 0..n {
            let c = j % 2;
            let mu = if c == 0 { -4.0 } else { 4.0 };
            values[[0, j]] = mu + rng.random_range(-1.0..1.0);
            values[[1, j]] = mu + rng.random_range(-1.0..1.0);
            labels.push(["A", "B"][c].to_string());
        }
        let samples = (0..n).map(|j| format!("{prefix}{j}")).collect();
        LabeledDataset::new(
            ExpressionMatrix::new(ids(&["f0", "f1"]), samples, values, ViewKind::MiRna).unwrap(),
            labels,
        )
        .unwrap()
    }

    fn cfg(alpha: f64, max_iterations: usize) -> SelfTrainConfig {
        SelfTrainConfig {
            alpha,
            max_iterations,
            classifier: ClassifierSpec::random_forest(10, 11),
            remove_promoted: true,
        }
    }

    #[test]
    fn identical_pool_is_fully_promoted_with_true_labels() {
        let l = blobs(16, 1, "l");
        let pool = UnlabeledDataset::new("pool", l.matrix().rename_samples(|s| format!("u{s}")).unwrap());
        let out = self_train(&l, &[pool], &cfg(0.5, 2), None).unwrap();
        let first = &out.history.iterations[0];
        assert_eq!(first.promoted_count, 16);
        assert_eq!(out.history.final_training_size(), 32);
        for p in &out.promotions {
            let j: usize = p.source_id.trim_start_matches("ul").parse().unwrap();
            assert_eq!(p.label, l.labels()[j]);
            assert!(p.sample_id.starts_with("pool:"));
        }
        // pool exhausted, second iteration promotes nothing
        assert_eq!(out.history.iterations.len(), 2);
        assert_eq!(out.history.iterations[1].promoted_count, 0);
        assert!(out.history.growth_is_consistent());
    }

    #[test]
    fn no_unanimous_votes_means_no_promotion() {
        let l = blobs(12, 2, "l");
        // pool sits on the class boundary
        let values = Array2::from_elem((2, 5), 0.0);
        let m = ExpressionMatrix::new(ids(&["f0", "f1"]), ids(&["a", "b", "c", "d", "e"]), values, ViewKind::MiRna).unwrap();
        let pool = UnlabeledDataset::new("p", m);
        let c = cfg(1.0, 2);
        let out = self_train(&l, std::slice::from_ref(&pool), &c, None).unwrap();
        let base = train(&c.classifier, &l).unwrap();
        assert_eq!(out.history.iterations.len(), 1);
        assert_eq!(out.history.total_promoted(), 0);
        assert_eq!(out.model, base);
    }

    #[test]
    fn empty_pool_list_is_baseline() {
        let l = blobs(10, 3, "l");
        let c = cfg(0.9, 2);
        let out = self_train(&l, &[], &c, None).unwrap();
        assert_eq!(out.model, train(&c.classifier, &l).unwrap());
        assert_eq!(out.history.total_promoted(), 0);
    }

    #[test]
    fn disjoint_pools_are_rejected() {
        let l = blobs(10, 3, "l");
        let m = ExpressionMatrix::new(ids(&["zz"]), ids(&["a"]), Array2::zeros((1, 1)), ViewKind::MiRna).unwrap();
        let err = self_train(&l, &[UnlabeledDataset::new("p", m)], &cfg(0.9, 2), None).unwrap_err();
        assert!(matches!(err, Error::NoOverlap));
    }

    #[test]
    fn rejects_bad_alpha() {
        let l = blobs(10, 3, "l");
        for alpha in [0.0, 1.5, f64::NAN] {
            assert!(self_train(&l, &[], &cfg(alpha, 2), None).is_err());
        }
    }

    #[test]
    fn keep_promoted_in_pool_never_promotes_twice() {
        let l = blobs(16, 4, "l");
        let pool = UnlabeledDataset::new("p", blobs(20, 5, "u").matrix().clone());
        let mut c = cfg(0.6, 3);
        c.remove_promoted = false;
        let out = self_train(&l, &[pool], &c, None).unwrap();
        let ids: HashSet<&String> = out.promotions.iter().map(|p| &p.sample_id).collect();
        assert_eq!(ids.len(), out.promotions.len());
        assert!(out.history.growth_is_consistent());
    }

    #[test]
    fn eval_set_stops_when_f1_does_not_improve() {
        let l = blobs(16, 6, "l");
        let pool = UnlabeledDataset::new("p", blobs(30, 7, "u").matrix().clone());
        let eval = blobs(30, 8, "t");
        let out = self_train(&l, &[pool], &cfg(0.5, 5), Some(&eval)).unwrap();
        // the baseline already scores 1.0 on these blobs, so nothing can improve it
        assert_eq!(out.history.iterations.len(), 1);
        assert_eq!(out.history.iterations[0].weighted_f1, Some(1.0));
    }

    proptest! {
        #[test]
        fn raising_alpha_never_adds_promotions(
            confs in proptest::collection::vec(0.0f64..=1.0, 0..30),
            a in 0.01f64..1.0,
            b in 0.01f64..1.0,
        ) {
            let preds: Vec<_> = confs.iter().enumerate().map(|(i, &c)| pred(&i.to_string(), "A", c)).collect();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(choose_most_confident(&preds, hi).len() <= choose_most_confident(&preds, lo).len());
            for p in choose_most_confident(&preds, lo) {
                prop_assert!(p.confidence > lo);
            }
        }
    }
}
