//! Cross-view conversion through a many-to-many miRNA / target-gene table.
//!
//! A miRNA expression value is rebuilt as the arithmetic mean of the
//! expression of its target genes, and a gene value as the mean over the
//! miRNAs targeting it. Only partners present in the input matrix count;
//! panel features with no present partner are dropped from the output and
//! listed in [`ViewConversion::uncovered`].

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;

use crate::data::{ExpressionMatrix, ViewKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Set of `(miRNA, gene)` pairs with indexes in both directions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetPairTable {
    pairs: BTreeSet<(String, String)>,
    genes_of: BTreeMap<String, BTreeSet<String>>,
    mirnas_of: BTreeMap<String, BTreeSet<String>>,
}

impl TargetPairTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the pair was already present.
    pub fn insert(&mut self, mirna: impl Into<String>, gene: impl Into<String>) -> bool {
        let (mirna, gene) = (mirna.into(), gene.into());
        if !self.pairs.insert((mirna.clone(), gene.clone())) {
            return false;
        }
        self.genes_of
            .entry(mirna.clone())
            .or_default()
            .insert(gene.clone());
        self.mirnas_of.entry(gene).or_default().insert(mirna);
        true
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(m, g)| (m.as_str(), g.as_str()))
    }

    pub fn genes_of(&self, mirna: &str) -> Option<&BTreeSet<String>> {
        self.genes_of.get(mirna)
    }

    pub fn mirnas_of(&self, gene: &str) -> Option<&BTreeSet<String>> {
        self.mirnas_of.get(gene)
    }

    /// Partners of `feature` in the opposite view, where `feature` belongs to `view`.
    pub fn partners(&self, view: ViewKind, feature: &str) -> Option<&BTreeSet<String>> {
        match view {
            ViewKind::MiRna => self.genes_of(feature),
            ViewKind::Gene => self.mirnas_of(feature),
        }
    }
}

impl<M: Into<String>, G: Into<String>> FromIterator<(M, G)> for TargetPairTable {
    fn from_iter<I: IntoIterator<Item = (M, G)>>(iter: I) -> Self {
        let mut t = TargetPairTable::new();
        for (m, g) in iter {
            t.insert(m, g);
        }
        t
    }
}

/// Converted matrix plus the requested features that had no covered partner.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewConversion<T> {
    pub matrix: ExpressionMatrix<T>,
    pub uncovered: Vec<String>,
}

/// Gene-view matrix to the miRNA features of `target_panel`.
pub fn convert_to_mirna<T: Scalar>(
    genes: &ExpressionMatrix<T>,
    table: &TargetPairTable,
    target_panel: &[String],
) -> Result<ViewConversion<T>> {
    convert(genes, table, target_panel, ViewKind::MiRna)
}

/// miRNA-view matrix to the gene features of `target_panel`.
pub fn convert_to_gene<T: Scalar>(
    mirnas: &ExpressionMatrix<T>,
    table: &TargetPairTable,
    target_panel: &[String],
) -> Result<ViewConversion<T>> {
    convert(mirnas, table, target_panel, ViewKind::Gene)
}

/// Dispatches on the output view.
pub fn convert_to<T: Scalar>(
    input: &ExpressionMatrix<T>,
    table: &TargetPairTable,
    target_panel: &[String],
    target_view: ViewKind,
) -> Result<ViewConversion<T>> {
    convert(input, table, target_panel, target_view)
}

fn convert<T: Scalar>(
    input: &ExpressionMatrix<T>,
    table: &TargetPairTable,
    target_panel: &[String],
    target_view: ViewKind,
) -> Result<ViewConversion<T>> {
    if input.view() != target_view.other() {
        return Err(Error::ViewMismatch {
            expected: target_view.other(),
            found: input.view(),
        });
    }
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if target_panel.is_empty() {
        return Err(Error::InvalidConfig("empty target panel".into()));
    }
    let index = input.feature_index();
    let n = input.n_samples();

    let mut kept = Vec::new();
    let mut uncovered = Vec::new();
    let mut sources: Vec<Vec<usize>> = Vec::new();
    for feature in target_panel {
        let rows: Vec<usize> = table
            .partners(target_view, feature)
            .map(|ps| ps.iter().filter_map(|p| index.get(p.as_str()).copied()).collect())
            .unwrap_or_default();
        if rows.is_empty() {
            uncovered.push(feature.clone());
        } else {
            kept.push(feature.clone());
            sources.push(rows);
        }
    }
    if kept.is_empty() {
        return Err(Error::NoCoverage { view: target_view });
    }

    let values = input.values();
    let mut out = Array2::<T>::zeros((kept.len(), n));
    for (r, rows) in sources.iter().enumerate() {
        let count = T::from_usize(rows.len()).expect("row count fits scalar");
        for s in 0..n {
            let sum = rows.iter().fold(T::zero(), |acc, &g| acc + values[[g, s]]);
            out[[r, s]] = sum / count;
        }
    }
    Ok(ViewConversion {
        matrix: ExpressionMatrix::new(kept, input.sample_ids().to_vec(), out, target_view)?,
        uncovered,
    })
}
