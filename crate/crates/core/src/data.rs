//! Expression matrices, labeled / unlabeled datasets and the set algebra
//! over their feature panels.

use std::collections::{BTreeSet, HashMap, HashSet};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which kind of feature a matrix row represents.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    #[default]
    #[serde(rename = "mirna")]
    MiRna,
    Gene,
}

impl ViewKind {
    pub fn other(self) -> ViewKind {
        match self {
            ViewKind::MiRna => ViewKind::Gene,
            ViewKind::Gene => ViewKind::MiRna,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::MiRna => "mirna",
            ViewKind::Gene => "gene",
        }
    }
}

/// Features x samples matrix. Column `j` is the expression vector of sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix<T> {
    feature_ids: Vec<String>,
    sample_ids: Vec<String>,
    values: Array2<T>,
    view: ViewKind,
}

fn check_unique(ids: &[String], dup: fn(String) -> Error) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(dup(id.clone()));
        }
    }
    Ok(())
}

impl<T: Scalar> ExpressionMatrix<T> {
    /// Builds a matrix, validating id uniqueness, shape and finiteness.
    pub fn new(
        feature_ids: Vec<String>,
        sample_ids: Vec<String>,
        values: Array2<T>,
        view: ViewKind,
    ) -> Result<Self> {
        check_unique(&feature_ids, Error::DuplicateFeature)?;
        check_unique(&sample_ids, Error::DuplicateSample)?;
        if values.dim() != (feature_ids.len(), sample_ids.len()) {
            return Err(Error::InvalidConfig(format!(
                "value array has shape {:?}, ids imply {}x{}",
                values.dim(),
                feature_ids.len(),
                sample_ids.len()
            )));
        }
        if let Some(((f, s), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite value at feature `{}`, sample `{}`",
                feature_ids[f], sample_ids[s]
            )));
        }
        Ok(Self {
            feature_ids,
            sample_ids,
            values,
            view,
        })
    }

    /// A matrix with the given feature panel and no samples.
    pub fn empty(feature_ids: Vec<String>, view: ViewKind) -> Result<Self> {
        let n = feature_ids.len();
        Self::new(feature_ids, Vec::new(), Array2::zeros((n, 0)), view)
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn view(&self) -> ViewKind {
        self.view
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn sample(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    pub fn feature_index(&self) -> HashMap<&str, usize> {
        self.feature_ids
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect()
    }

    /// Keeps exactly the features in `ids`, in that order. Every id must exist.
    pub fn select_features(&self, ids: &[String]) -> Result<Self> {
        let index = self.feature_index();
        let rows = ids
            .iter()
            .map(|id| {
                index.get(id.as_str()).copied().ok_or_else(|| {
                    Error::FeatureMismatch(format!("feature `{id}` missing from matrix"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            feature_ids: ids.to_vec(),
            sample_ids: self.sample_ids.clone(),
            values: self.values.select(Axis(0), &rows),
            view: self.view,
        })
    }

    /// Keeps the sample columns at `cols`, in that order.
    pub fn select_samples(&self, cols: &[usize]) -> Self {
        Self {
            feature_ids: self.feature_ids.clone(),
            sample_ids: cols.iter().map(|&c| self.sample_ids[c].clone()).collect(),
            values: self.values.select(Axis(1), cols),
            view: self.view,
        }
    }

    /// Same data with every sample id rewritten by `f`.
    pub fn rename_samples(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        let ids = self.sample_ids.iter().map(|s| f(s)).collect();
        Self::new(self.feature_ids.clone(), ids, self.values.clone(), self.view)
    }

    /// Rows sorted by feature id.
    pub fn canonical(&self) -> Self {
        let mut ids = self.feature_ids.clone();
        ids.sort();
        self.select_features(&ids).expect("permutation of own features")
    }

    pub(crate) fn with_values(&self, values: Array2<T>) -> Result<Self> {
        Self::new(
            self.feature_ids.clone(),
            self.sample_ids.clone(),
            values,
            self.view,
        )
    }
}

/// Sorted intersection of two feature panels.
pub fn shared_features(a: &[String], b: &[String]) -> Vec<String> {
    let left: BTreeSet<&String> = a.iter().collect();
    let right: HashSet<&String> = b.iter().collect();
    left.into_iter()
        .filter(|id| right.contains(id))
        .cloned()
        .collect()
}

/// Restricts both matrices to their shared features, rows in lexicographic order.
pub fn align_features<T: Scalar>(
    a: &ExpressionMatrix<T>,
    b: &ExpressionMatrix<T>,
) -> Result<(ExpressionMatrix<T>, ExpressionMatrix<T>)> {
    if a.view != b.view {
        return Err(Error::ViewMismatch {
            expected: a.view,
            found: b.view,
        });
    }
    let shared = shared_features(&a.feature_ids, &b.feature_ids);
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok((a.select_features(&shared)?, b.select_features(&shared)?))
}

/// Number of feature ids present in both matrices.
pub fn feature_overlap<T>(a: &ExpressionMatrix<T>, b: &ExpressionMatrix<T>) -> usize {
    let left: HashSet<&String> = a.feature_ids.iter().collect();
    b.feature_ids.iter().filter(|f| left.contains(f)).count()
}

/// Samples with class labels aligned to the matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    matrix: ExpressionMatrix<T>,
    labels: Vec<String>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(matrix: ExpressionMatrix<T>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.n_samples() {
            return Err(Error::LengthMismatch(labels.len(), matrix.n_samples()));
        }
        Ok(Self { matrix, labels })
    }

    /// Attaches labels looked up by sample id.
    pub fn from_label_map(
        matrix: ExpressionMatrix<T>,
        labels: &HashMap<String, String>,
    ) -> Result<Self> {
        let labels = matrix
            .sample_ids()
            .iter()
            .map(|s| {
                labels
                    .get(s)
                    .cloned()
                    .ok_or_else(|| Error::MissingLabel(s.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrix, labels)
    }

    pub fn matrix(&self) -> &ExpressionMatrix<T> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct labels, sorted.
    pub fn class_set(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.labels.iter().collect();
        set.into_iter().cloned().collect()
    }

    pub fn select_features(&self, ids: &[String]) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.select_features(ids)?,
            labels: self.labels.clone(),
        })
    }

    pub fn into_parts(self) -> (ExpressionMatrix<T>, Vec<String>) {
        (self.matrix, self.labels)
    }
}

/// Samples without labels.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDataset<T> {
    /// Pool name, used to prefix promoted sample ids.
    pub name: String,
    pub matrix: ExpressionMatrix<T>,
}

impl<T: Scalar> UnlabeledDataset<T> {
    pub fn new(name: impl Into<String>, matrix: ExpressionMatrix<T>) -> Self {
        Self {
            name: name.into(),
            matrix,
        }
    }
}

/// A predicted label with its confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidentPrediction {
    pub sample_id: String,
    pub label: String,
    pub confidence: f64,
}

/// Column-wise concatenation; `base` columns come first.
pub fn append_samples<T: Scalar>(
    base: &LabeledDataset<T>,
    extra: &LabeledDataset<T>,
) -> Result<LabeledDataset<T>> {
    if base.matrix.feature_ids != extra.matrix.feature_ids {
        return Err(Error::FeatureMismatch(format!(
            "appended panel has {} features, base has {}",
            extra.matrix.n_features(),
            base.matrix.n_features()
        )));
    }
    if base.matrix.view != extra.matrix.view {
        return Err(Error::ViewMismatch {
            expected: base.matrix.view,
            found: extra.matrix.view,
        });
    }
    if extra.is_empty() {
        return Ok(base.clone());
    }
    let existing: HashSet<&String> = base.matrix.sample_ids.iter().collect();
    if let Some(dup) = extra.matrix.sample_ids.iter().find(|s| existing.contains(s)) {
        return Err(Error::DuplicateSample(dup.clone()));
    }
    let values = ndarray::concatenate(
        Axis(1),
        &[base.matrix.values.view(), extra.matrix.values.view()],
    )
    .expect("row counts match");
    let mut sample_ids = base.matrix.sample_ids.clone();
    sample_ids.extend(extra.matrix.sample_ids.iter().cloned());
    let mut labels = base.labels.clone();
    labels.extend(extra.labels.iter().cloned());
    LabeledDataset::new(
        ExpressionMatrix::new(
            base.matrix.feature_ids.clone(),
            sample_ids,
            values,
            base.matrix.view,
        )?,
        labels,
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    pub(crate) fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn matrix(features: &[&str], samples: &[&str]) -> ExpressionMatrix<f64> {
        let values = Array2::from_shape_fn((features.len(), samples.len()), |(f, s)| {
            (f * 10 + s) as f64
        });
        ExpressionMatrix::new(ids(features), ids(samples), values, ViewKind::MiRna).unwrap()
    }

    #[test]
    fn align_keeps_intersection_sorted() {
        let a = matrix(&["m3", "m1", "m2"], &["s1"]);
        let b = matrix(&["m4", "m2", "m3"], &["s2", "s3"]);
        let (a2, b2) = align_features(&a, &b).unwrap();
        assert_eq!(a2.feature_ids(), ids(&["m2", "m3"]));
        assert_eq!(b2.feature_ids(), ids(&["m2", "m3"]));
        // m2 is row 2 in a, m3 row 0
        assert_eq!(a2.values()[[0, 0]], 20.0);
        assert_eq!(a2.values()[[1, 0]], 0.0);
        assert_eq!(b2.n_samples(), 2);
    }

    #[test]
    fn align_identity_up_to_reordering() {
        let a = matrix(&["b", "a"], &["s1", "s2"]);
        let (x, y) = align_features(&a, &a).unwrap();
        assert_eq!(x, a.canonical());
        assert_eq!(y, a.canonical());
    }

    #[test]
    fn align_disjoint_is_error() {
        let a = matrix(&["m1"], &["s1"]);
        let b = matrix(&["m2"], &["s1"]);
        assert!(matches!(align_features(&a, &b), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn align_rejects_mixed_views() {
        let a = matrix(&["m1"], &["s1"]);
        let mut b = matrix(&["m1"], &["s1"]);
        b.view = ViewKind::Gene;
        assert!(matches!(align_features(&a, &b), Err(Error::ViewMismatch { .. })));
    }

    #[test]
    fn overlap_counts() {
        let a = matrix(&["a", "b", "c"], &["s"]);
        let b = matrix(&["b", "c", "d"], &["s"]);
        let c = matrix(&["x", "y"], &["s"]);
        assert_eq!(feature_overlap(&a, &b), 2);
        assert_eq!(feature_overlap(&a, &c), 0);
        let names: Vec<String> = (0..336).map(|i| format!("hsa-mir-{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let big = matrix(&refs, &["s"]);
        assert_eq!(feature_overlap(&big, &big), 336);
    }

    #[test]
    fn constructor_rejects_duplicates_and_nan() {
        let err = ExpressionMatrix::new(
            ids(&["a", "a"]),
            ids(&["s"]),
            array![[1.0], [2.0]],
            ViewKind::Gene,
        );
        assert!(matches!(err, Err(Error::DuplicateFeature(_))));
        let err = ExpressionMatrix::new(ids(&["a"]), ids(&["s"]), array![[f64::NAN]], ViewKind::Gene);
        assert!(err.is_err());
    }

    fn labeled(samples: &[&str]) -> LabeledDataset<f64> {
        let m = matrix(&["f1", "f2"], samples);
        let labels = samples.iter().enumerate().map(|(i, _)| format!("c{}", i % 2)).collect();
        LabeledDataset::new(m, labels).unwrap()
    }

    #[test]
    fn append_cardinality_and_order() {
        let base = labeled(&["a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8"]);
        let extra = labeled(&["b1", "b2", "b3"]);
        let out = append_samples(&base, &extra).unwrap();
        assert_eq!(out.len(), 11);
        assert_eq!(out.matrix().sample_ids()[8], "b1");
        assert_eq!(out.labels()[9], extra.labels()[1]);
    }

    #[test]
    fn append_empty_is_identity() {
        let base = labeled(&["a1", "a2"]);
        let extra = LabeledDataset::new(
            ExpressionMatrix::empty(ids(&["f1", "f2"]), ViewKind::MiRna).unwrap(),
            vec![],
        )
        .unwrap();
        assert_eq!(append_samples(&base, &extra).unwrap(), base);
    }

    #[test]
    fn append_rejects_feature_order_and_collisions() {
        let base = labeled(&["a1", "a2"]);
        let swapped = LabeledDataset::new(
            matrix(&["f2", "f1"], &["b1"]),
            vec!["c0".into()],
        )
        .unwrap();
        assert!(matches!(append_samples(&base, &swapped), Err(Error::FeatureMismatch(_))));
        let clash = labeled(&["a2"]);
        assert!(matches!(append_samples(&base, &clash), Err(Error::DuplicateSample(_))));
    }

    fn arb_matrix() -> impl Strategy<Value = ExpressionMatrix<f64>> {
        (
            proptest::collection::btree_set("[a-f]{1,2}", 1..8),
            1usize..5,
        )
            .prop_flat_map(|(features, n)| {
                let features: Vec<String> = features.into_iter().collect();
                let m = features.len();
                proptest::collection::vec(-1e3f64..1e3, m * n).prop_map(move |vals| {
                    let samples = (0..n).map(|j| format!("s{j}")).collect();
                    ExpressionMatrix::new(
                        features.clone(),
                        samples,
                        Array2::from_shape_vec((m, n), vals).unwrap(),
                        ViewKind::Gene,
                    )
                    .unwrap()
                })
            })
    }

    proptest! {
        #[test]
        fn align_is_idempotent(a in arb_matrix(), b in arb_matrix()) {
            if let Ok((x, y)) = align_features(&a, &b) {
                let (x2, y2) = align_features(&x, &y).unwrap();
                prop_assert_eq!(x, x2);
                prop_assert_eq!(y, y2);
            }
        }

        #[test]
        fn overlap_is_symmetric(a in arb_matrix(), b in arb_matrix()) {
            prop_assert_eq!(feature_overlap(&a, &b), feature_overlap(&b, &a));
            prop_assert_eq!(feature_overlap(&a, &a), a.n_features());
        }

        #[test]
        fn append_preserves_values(a in arb_matrix(), picks in proptest::collection::vec((0usize..64, 0usize..64), 5)) {
            let base = LabeledDataset::new(a.clone(), vec!["x".into(); a.n_samples()]).unwrap();
            let extra_m = a.rename_samples(|s| format!("extra:{s}")).unwrap();
            let extra = LabeledDataset::new(extra_m, vec!["y".into(); a.n_samples()]).unwrap();
            let out = append_samples(&base, &extra).unwrap();
            let n = a.n_samples();
            for (f, s) in picks {
                let (f, s) = (f % a.n_features(), s % n);
                prop_assert_eq!(out.matrix().values()[[f, s]].to_bits(), a.values()[[f, s]].to_bits());
                prop_assert_eq!(out.matrix().values()[[f, n + s]].to_bits(), a.values()[[f, s]].to_bits());
            }
        }
    }
}
