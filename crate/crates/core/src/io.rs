//! Readers and writers for the on-disk formats.
//!
//! * expression CSV: `feature_id,<sample1>,<sample2>,...`, one feature per row
//! * labels TSV: `sample_id<TAB>label`, no header
//! * target pairs TSV: `miRNA_id<TAB>gene_id`, no header
//! * report JSON, see [`crate::report`]
//!
//! LF and CRLF line endings are accepted; LF is written.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{ExpressionMatrix, ViewKind};
use crate::error::{Error, Result};
use crate::mapping::TargetPairTable;
use crate::report::ExperimentReport;
use crate::scalar::Scalar;

/// What to do with empty, `NA` or `null` expression cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    ImputeRowMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    #[default]
    None,
    ZScorePerFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    LabeledMiRna,
    UnlabeledMiRna,
    LabeledGene,
    UnlabeledGene,
    TestMiRna,
    TestGene,
    TargetPairs,
    Labels,
}

impl DatasetRole {
    pub fn view(self) -> Option<ViewKind> {
        match self {
            DatasetRole::LabeledMiRna | DatasetRole::UnlabeledMiRna | DatasetRole::TestMiRna => {
                Some(ViewKind::MiRna)
            }
            DatasetRole::LabeledGene | DatasetRole::UnlabeledGene | DatasetRole::TestGene => {
                Some(ViewKind::Gene)
            }
            DatasetRole::TargetPairs | DatasetRole::Labels => None,
        }
    }
}

/// One input file and how to treat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub role: DatasetRole,
    #[serde(default)]
    pub normalize: Normalize,
}

impl DatasetManifest {
    pub fn new(path: impl Into<PathBuf>, role: DatasetRole, normalize: Normalize) -> Self {
        Self {
            path: path.into(),
            role,
            normalize,
        }
    }

    /// File stem, used as the pool name for unlabeled sets.
    pub fn name(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.path.as_os_str().is_empty() {
            return Err(Error::InvalidConfig(format!("{:?} manifest has an empty path", self.role)));
        }
        Ok(())
    }

    /// Loads an expression manifest, applying its normalization.
    pub fn load_matrix<T: Scalar>(&self, missing: MissingPolicy) -> Result<ExpressionMatrix<T>> {
        let view = self.role.view().ok_or_else(|| {
            Error::InvalidConfig(format!("{:?} is not an expression role", self.role))
        })?;
        let m = read_expression_csv_with(&self.path, view, missing)?;
        match self.normalize {
            Normalize::None => Ok(m),
            Normalize::ZScorePerFeature => zscore_per_feature(&m),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "null")
}

/// Reads an expression CSV, rejecting missing cells.
pub fn read_expression_csv<T: Scalar>(
    path: impl AsRef<Path>,
    view: ViewKind,
) -> Result<ExpressionMatrix<T>> {
    read_expression_csv_with(path, view, MissingPolicy::Reject)
}

pub fn read_expression_csv_with<T: Scalar>(
    path: impl AsRef<Path>,
    view: ViewKind,
    missing: MissingPolicy,
) -> Result<ExpressionMatrix<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::EmptyMatrix),
    };
    let sample_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = sample_ids.len();

    let mut feature_ids = Vec::new();
    let mut flat: Vec<T> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let id = rec[0].to_owned();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty feature id"));
        }
        let mut row: Vec<Option<T>> = Vec::with_capacity(n);
        for cell in rec.iter().skip(1) {
            if is_missing(cell) {
                row.push(None);
                continue;
            }
            let v: T = cell
                .parse()
                .map_err(|_| Error::parse(path, line, format!("malformed number `{cell}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value `{cell}`")));
            }
            row.push(Some(v));
        }
        let filled = fill_missing(row, missing).map_err(|m| Error::parse(path, line, m))?;
        feature_ids.push(id);
        flat.extend(filled);
    }
    if feature_ids.is_empty() || n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let values = Array2::from_shape_vec((feature_ids.len(), n), flat).expect("rows have n cells");
    ExpressionMatrix::new(feature_ids, sample_ids, values, view)
}

fn fill_missing<T: Scalar>(row: Vec<Option<T>>, policy: MissingPolicy) -> Result<Vec<T>, String> {
    let present: Vec<T> = row.iter().flatten().copied().collect();
    if present.len() == row.len() {
        return Ok(present);
    }
    match policy {
        MissingPolicy::Reject => Err("missing expression value".into()),
        MissingPolicy::ImputeRowMean => {
            if present.is_empty() {
                return Err("row has no observed values to impute from".into());
            }
            let count = T::from_usize(present.len()).expect("count fits scalar");
            let mean = present.iter().copied().sum::<T>() / count;
            Ok(row.into_iter().map(|v| v.unwrap_or(mean)).collect())
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::parse(
            path,
            line,
            format!("ragged row: {len} fields, expected {expected_len}"),
        ),
        _ => Error::parse(path, line, e.to_string()),
    }
}

/// Writes an expression CSV. Values use the shortest decimal form that
/// parses back to the identical scalar.
pub fn write_expression_csv<T: Scalar>(m: &ExpressionMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("feature_id");
    for s in m.sample_ids() {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for (f, id) in m.feature_ids().iter().enumerate() {
        out.push_str(id);
        for v in m.values().row(f) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn tsv_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 2 tab-separated columns, found {}", cols.len()),
            ));
        }
        let (a, b) = (cols[0].trim(), cols[1].trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::parse(path, i + 1, "empty column"));
        }
        rows.push((i + 1, a.to_owned(), b.to_owned()));
    }
    Ok(rows)
}

/// Reads `sample_id<TAB>label` lines into a map.
pub fn read_labels_tsv(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    let path = path.as_ref();
    let mut labels = HashMap::new();
    for (_, id, label) in tsv_pairs(path)? {
        if labels.contains_key(&id) {
            return Err(Error::DuplicateSample(id));
        }
        labels.insert(id, label);
    }
    Ok(labels)
}

pub fn write_labels_tsv<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a str)>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (id, label) in rows {
        out.push_str(id);
        out.push('\t');
        out.push_str(label);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads `miRNA_id<TAB>gene_id` lines; duplicate lines collapse.
pub fn read_target_pairs_tsv(path: impl AsRef<Path>) -> Result<TargetPairTable> {
    Ok(tsv_pairs(path.as_ref())?
        .into_iter()
        .map(|(_, m, g)| (m, g))
        .collect())
}

pub fn write_target_pairs_tsv(table: &TargetPairTable, path: impl AsRef<Path>) -> Result<()> {
    write_labels_tsv(table.pairs(), path)
}

/// Standardizes every feature row to mean 0 and population standard
/// deviation 1. Constant rows become all zeros.
pub fn zscore_per_feature<T: Scalar>(m: &ExpressionMatrix<T>) -> Result<ExpressionMatrix<T>> {
    let n = m.n_samples();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let count = T::from_usize(n).expect("count fits scalar");
    let mut values = m.values().clone();
    for mut row in values.rows_mut() {
        let first = row[0];
        if row.iter().all(|&v| v == first) {
            row.fill(T::zero());
            continue;
        }
        let mean = row.iter().copied().sum::<T>() / count;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
        let sd = var.sqrt();
        row.mapv_inplace(|v| (v - mean) / sd);
    }
    m.with_values(values)
}

/// Pretty JSON with a trailing newline; field order is fixed by the types.
pub fn write_report_json(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    Ok(serde_json::from_str(&read_text(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::ids;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parses_well_formed_csv_with_crlf() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "m.csv", "feature_id,s1,s2,s3\r\nm1,1,2.5,-3e2\r\nm2,0,0,1E-3\r\n");
        let m: ExpressionMatrix<f64> = read_expression_csv(&p, ViewKind::MiRna).unwrap();
        assert_eq!(m.values().dim(), (2, 3));
        assert_eq!(m.sample_ids(), ids(&["s1", "s2", "s3"]));
        assert_eq!(m.values()[[0, 2]], -300.0);
        assert_eq!(m.values()[[1, 2]], 0.001);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = TempDir::new().unwrap();
        let dup = write(&dir, "d.csv", "feature_id,s1\nm1,1\nm1,2\n");
        assert!(matches!(
            read_expression_csv::<f64>(&dup, ViewKind::MiRna),
            Err(Error::DuplicateFeature(_))
        ));
        let ragged = write(&dir, "r.csv", "feature_id,s1,s2\nm1,1\n");
        assert!(matches!(
            read_expression_csv::<f64>(&ragged, ViewKind::MiRna),
            Err(Error::Parse { .. })
        ));
        let bad = write(&dir, "b.csv", "feature_id,s1\nm1,abc\n");
        assert!(matches!(
            read_expression_csv::<f64>(&bad, ViewKind::MiRna),
            Err(Error::Parse { line: 2, .. })
        ));
        let inf = write(&dir, "i.csv", "feature_id,s1\nm1,inf\n");
        assert!(read_expression_csv::<f64>(&inf, ViewKind::MiRna).is_err());
        let empty = write(&dir, "e.csv", "feature_id,s1\n");
        assert!(matches!(
            read_expression_csv::<f64>(&empty, ViewKind::MiRna),
            Err(Error::EmptyMatrix)
        ));
        let na = write(&dir, "na.csv", "feature_id,s1,s2\nm1,NA,1\n");
        assert!(read_expression_csv::<f64>(&na, ViewKind::MiRna).is_err());
    }

    #[test]
    fn imputes_row_mean() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "na.csv", "feature_id,s1,s2,s3,s4\nm1,1.5,NA,4.0,2.0\nm2,1,null,,3\n");
        let m: ExpressionMatrix<f64> =
            read_expression_csv_with(&p, ViewKind::MiRna, MissingPolicy::ImputeRowMean).unwrap();
        // oracle: (1.5 + 4.0 + 2.0) / 3
        let oracle = [1.5, 4.0, 2.0].iter().sum::<f64>() / 3.0;
        assert_abs_diff_eq!(m.values()[[0, 1]], 2.5, epsilon = 1e-12);
        assert_eq!(m.values()[[0, 1]], oracle);
        assert_eq!(m.values()[[1, 1]], 2.0);
        assert_eq!(m.values()[[1, 2]], 2.0);
    }

    #[test]
    fn labels_tsv() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "l.tsv", "s1\tA\r\ns2\tB\ns3\tA\n");
        assert_eq!(read_labels_tsv(&p).unwrap().len(), 3);
        let d = write(&dir, "d.tsv", "s1\tA\ns1\tB\n");
        assert!(matches!(read_labels_tsv(&d), Err(Error::DuplicateSample(_))));
        let e = write(&dir, "e.tsv", "");
        assert!(read_labels_tsv(&e).unwrap().is_empty());
        let bad = write(&dir, "b.tsv", "s1 A\n");
        assert!(matches!(read_labels_tsv(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn target_pairs_tsv() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "t.tsv", "m1\tg1\nm1\tg2\nm2\tg1\nm1\tg1\n");
        let t = read_target_pairs_tsv(&p).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.genes_of("m1").unwrap().len(), 2);
        assert_eq!(t.mirnas_of("g1").unwrap().len(), 2);
        let e = write(&dir, "e.tsv", "");
        assert!(read_target_pairs_tsv(&e).unwrap().is_empty());
    }

    fn row_matrix(rows: Array2<f64>) -> ExpressionMatrix<f64> {
        let f = (0..rows.nrows()).map(|i| format!("f{i}")).collect();
        let s = (0..rows.ncols()).map(|i| format!("s{i}")).collect();
        ExpressionMatrix::new(f, s, rows, ViewKind::Gene).unwrap()
    }

    #[test]
    fn zscore_examples() {
        let m = row_matrix(array![[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]);
        let z = zscore_per_feature(&m).unwrap();
        // mean 2, population sd sqrt(2/3)
        let sd = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(z.values()[[0, 0]], -1.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[[0, 0]], -1.2247, epsilon = 1e-4);
        assert_abs_diff_eq!(z.values()[[0, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[[0, 2]], 1.2247, epsilon = 1e-4);
        assert_eq!(z.values().row(1).to_vec(), vec![0.0; 3]);
        let one = row_matrix(array![[1.0]]);
        assert!(matches!(zscore_per_feature(&one), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn report_write_to_bad_path_is_io_error() {
        let r = ExperimentReport::default();
        let err = write_report_json(&r, "/nonexistent-dir/x/report.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)) {
            let dir = TempDir::new().unwrap();
            let m = row_matrix(Array2::from_shape_vec((2, 3), vals).unwrap());
            let p = dir.path().join("m.csv");
            write_expression_csv(&m, &p).unwrap();
            let back: ExpressionMatrix<f64> = read_expression_csv(&p, ViewKind::Gene).unwrap();
            prop_assert_eq!(back.feature_ids(), m.feature_ids());
            for (a, b) in back.values().iter().zip(m.values().iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn zscore_idempotent(vals in proptest::collection::vec(-100.0f64..100.0, 8)) {
            let m = row_matrix(Array2::from_shape_vec((2, 4), vals).unwrap());
            let once = zscore_per_feature(&m).unwrap();
            let twice = zscore_per_feature(&once).unwrap();
            for (a, b) in once.values().iter().zip(twice.values().iter()) {
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!(a.is_finite());
            }
        }
    }
}
