//! Gaussian two-view datasets with known classes.
//!
//! Gene-view class means are the vertices of a regular simplex centred at
//! the origin, with edge length `class_separation`, spanning the first
//! `n_classes - 1` genes. The remaining genes carry no signal. Noise is
//! unit-variance and independent per view.
//! A miRNA's mean is the average of its target genes' means, so the table
//! carries the class signal from one view to the other.
//!
//! Both views share sample ids and latent classes. Labeled, unlabeled and
//! test splits use the id prefixes `L`, `U` and `T`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ExpressionMatrix, LabeledDataset, UnlabeledDataset, ViewKind};
use crate::error::{Error, Result};
use crate::io::{write_expression_csv, write_labels_tsv, write_target_pairs_tsv};
use crate::mapping::TargetPairTable;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewCoupling {
    /// miRNA `i` targets gene `i` only.
    Bijective,
    /// Each pair is present with the given probability; every miRNA keeps at
    /// least one target.
    RandomManyToMany(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub features_per_view: usize,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    /// Distance between class means in units of the noise sd.
    pub class_separation: f64,
    pub view_coupling: ViewCoupling,
    /// Probability that a labeled sample carries a wrong label.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 2,
            features_per_view: 10,
            n_labeled: 10,
            n_unlabeled: 200,
            n_test: 200,
            class_separation: 3.0,
            view_coupling: ViewCoupling::Bijective,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_classes < 2 {
            return bad(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if self.features_per_view + 1 < self.n_classes {
            return bad(format!(
                "features_per_view ({}) must be at least n_classes - 1 ({})",
                self.features_per_view,
                self.n_classes - 1
            ));
        }
        if self.n_labeled < self.n_classes {
            return bad("every class needs a labeled sample".into());
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return bad(format!("class_separation must be finite and >= 0, got {}", self.class_separation));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad(format!("label_noise must lie in [0, 0.5), got {}", self.label_noise));
        }
        if let ViewCoupling::RandomManyToMany(d) = self.view_coupling {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("coupling density must lie in (0, 1], got {d}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData<T> {
    pub l_mirna: LabeledDataset<T>,
    pub u_mirna: UnlabeledDataset<T>,
    pub l_gene: LabeledDataset<T>,
    pub u_gene: UnlabeledDataset<T>,
    pub test_mirna: LabeledDataset<T>,
    pub test_gene: LabeledDataset<T>,
    pub table: TargetPairTable,
    /// True class of every unlabeled sample. Not for learners.
    pub truth: BTreeMap<String, String>,
}

pub fn class_name(c: usize) -> String {
    format!("c{c}")
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(3);
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

struct Split {
    samples: Vec<String>,
    classes: Vec<usize>,
}

impl Split {
    /// Balanced classes in shuffled order.
    fn new(prefix: &str, n: usize, k: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut classes: Vec<usize> = (0..n).map(|i| i % k).collect();
        classes.shuffle(rng);
        Self {
            samples: ids(prefix, n),
            classes,
        }
    }
}

fn draw<T: Scalar>(
    means: &[Vec<f64>],
    split: &Split,
    features: &[String],
    view: ViewKind,
    rng: &mut ChaCha8Rng,
) -> Result<ExpressionMatrix<T>> {
    let mut values = Array2::from_elem((features.len(), split.samples.len()), T::zero());
    for (j, &c) in split.classes.iter().enumerate() {
        for f in 0..features.len() {
            let z: f64 = rng.sample(StandardNormal);
            values[[f, j]] = T::from_f64_lossy(means[c][f] + z);
        }
    }
    ExpressionMatrix::new(features.to_vec(), split.samples.clone(), values, view)
}

fn coupling(spec: &SyntheticSpec, mirnas: &[String], genes: &[String], rng: &mut ChaCha8Rng) -> TargetPairTable {
    let mut table = TargetPairTable::new();
    match spec.view_coupling {
        ViewCoupling::Bijective => {
            for (m, g) in mirnas.iter().zip(genes) {
                table.insert(m.clone(), g.clone());
            }
        }
        ViewCoupling::RandomManyToMany(density) => {
            for m in mirnas {
                let mut any = false;
                for g in genes {
                    if rng.random_bool(density) {
                        table.insert(m.clone(), g.clone());
                        any = true;
                    }
                }
                if !any {
                    let g = &genes[rng.random_range(0..genes.len())];
                    table.insert(m.clone(), g.clone());
                }
            }
        }
    }
    table
}

/// Vertex `c` of the unit simplex `e_0..e_{k-1}`, centred and expressed in
/// the Helmert basis of the sum-zero subspace, scaled to edge `edge`, and
/// padded with zeros to `m` coordinates.
fn simplex_means(k: usize, m: usize, edge: f64) -> Vec<Vec<f64>> {
    let scale = edge / std::f64::consts::SQRT_2;
    (0..k)
        .map(|c| {
            (0..m)
                .map(|f| {
                    let i = f + 1;
                    if i >= k {
                        return 0.0;
                    }
                    let norm = ((i * (i + 1)) as f64).sqrt();
                    let h = match c.cmp(&i) {
                        std::cmp::Ordering::Less => 1.0,
                        std::cmp::Ordering::Equal => -(i as f64),
                        std::cmp::Ordering::Greater => 0.0,
                    };
                    scale * h / norm
                })
                .collect()
        })
        .collect()
}

pub fn generate<T: Scalar>(spec: &SyntheticSpec) -> Result<SyntheticData<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (k, m) = (spec.n_classes, spec.features_per_view);
    let genes = ids("g", m);
    let mirnas = ids("mir", m);
    let table = coupling(spec, &mirnas, &genes, &mut rng);

    let gene_means = simplex_means(k, m, spec.class_separation);
    let gene_pos: BTreeMap<&str, usize> = genes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let mirna_means: Vec<Vec<f64>> = gene_means
        .iter()
        .map(|gm| {
            mirnas
                .iter()
                .map(|mi| {
                    let targets = table.genes_of(mi).expect("every miRNA has a target");
                    targets.iter().map(|g| gm[gene_pos[g.as_str()]]).sum::<f64>() / targets.len() as f64
                })
                .collect()
        })
        .collect();

    let labeled = Split::new("L", spec.n_labeled, k, &mut rng);
    let unlabeled = Split::new("U", spec.n_unlabeled, k, &mut rng);
    let test = Split::new("T", spec.n_test, k, &mut rng);

    let mut noisy: Vec<String> = labeled.classes.iter().map(|&c| class_name(c)).collect();
    for label in noisy.iter_mut() {
        if rng.random_bool(spec.label_noise) {
            let c: usize = label[1..].parse().expect("class name");
            let shift = rng.random_range(1..k);
            *label = class_name((c + shift) % k);
        }
    }
    let names = |s: &Split| s.classes.iter().map(|&c| class_name(c)).collect::<Vec<_>>();

    let mut view = |means: &[Vec<f64>], features: &[String], view: ViewKind| -> Result<_> {
        Ok((
            draw::<T>(means, &labeled, features, view, &mut rng)?,
            draw::<T>(means, &unlabeled, features, view, &mut rng)?,
            draw::<T>(means, &test, features, view, &mut rng)?,
        ))
    };
    let (lm, um, tm) = view(&mirna_means, &mirnas, ViewKind::MiRna)?;
    let (lg, ug, tg) = view(&gene_means, &genes, ViewKind::Gene)?;

    Ok(SyntheticData {
        l_mirna: LabeledDataset::new(lm, noisy.clone())?,
        u_mirna: UnlabeledDataset::new("u_mirna", um),
        l_gene: LabeledDataset::new(lg, noisy)?,
        u_gene: UnlabeledDataset::new("u_gene", ug),
        test_mirna: LabeledDataset::new(tm, names(&test))?,
        test_gene: LabeledDataset::new(tg, names(&test))?,
        table,
        truth: unlabeled.samples.iter().cloned().zip(names(&unlabeled)).collect(),
    })
}

/// File names written by [`write_dataset`].
pub const FILES: [&str; 9] = [
    "l_mirna.csv",
    "u_mirna.csv",
    "l_gene.csv",
    "u_gene.csv",
    "test_mirna.csv",
    "test_gene.csv",
    "labels.tsv",
    "targets.tsv",
    "truth.tsv",
];

/// Writes the dataset under `dir`. `labels.tsv` holds labeled and test
/// labels; `truth.tsv` holds the unlabeled classes.
pub fn write_dataset<T: Scalar>(data: &SyntheticData<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_expression_csv(data.l_mirna.matrix(), dir.join(FILES[0]))?;
    write_expression_csv(&data.u_mirna.matrix, dir.join(FILES[1]))?;
    write_expression_csv(data.l_gene.matrix(), dir.join(FILES[2]))?;
    write_expression_csv(&data.u_gene.matrix, dir.join(FILES[3]))?;
    write_expression_csv(data.test_mirna.matrix(), dir.join(FILES[4]))?;
    write_expression_csv(data.test_gene.matrix(), dir.join(FILES[5]))?;
    let labeled = data.l_gene.matrix().sample_ids().iter().zip(data.l_gene.labels());
    let test = data.test_gene.matrix().sample_ids().iter().zip(data.test_gene.labels());
    write_labels_tsv(
        labeled.chain(test).map(|(s, l)| (s.as_str(), l.as_str())),
        dir.join(FILES[6]),
    )?;
    write_target_pairs_tsv(&data.table, dir.join(FILES[7]))?;
    write_labels_tsv(
        data.truth.iter().map(|(s, l)| (s.as_str(), l.as_str())),
        dir.join(FILES[8]),
    )
}
