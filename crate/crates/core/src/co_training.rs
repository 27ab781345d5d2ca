//! Two-view co-training. The miRNA classifier and the gene classifier each
//! label their own unlabeled pools; confident samples are mapped into the
//! opposite view through the target table and appended to the other
//! classifier's training set.
//!
//! One iteration runs, in order: train both classifiers, classify and
//! threshold the miRNA pools, classify and threshold the gene pools, append
//! mapped gene-view picks to the miRNA training set, append mapped
//! miRNA-view picks to the gene training set. The retrain that opens the
//! next iteration is also what produces the returned classifiers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{train, ClassifierSpec, TrainedModel};
use crate::data::{
    append_samples, ConfidentPrediction, ExpressionMatrix, LabeledDataset, UnlabeledDataset,
    ViewKind,
};
use crate::error::{Error, Result};
use crate::mapping::{convert_to, TargetPairTable};
use crate::report::{IterationRecord, TrainingHistory};
use crate::scalar::Scalar;
use crate::self_training::{
    common_panel, validate_loop, weighted_f1, Pool, Promotion,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTrainConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    pub mirna_classifier: ClassifierSpec,
    pub gene_classifier: ClassifierSpec,
    pub remove_promoted: bool,
    /// Before the first iteration, map each view's labeled set into the
    /// other view with its true labels and append it there.
    pub seed_with_opposite_labeled: bool,
}

impl Default for CoTrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            max_iterations: 2,
            mirna_classifier: ClassifierSpec::default(),
            gene_classifier: ClassifierSpec::default(),
            remove_promoted: true,
            seed_with_opposite_labeled: false,
        }
    }
}

impl CoTrainConfig {
    pub fn validate(&self) -> Result<()> {
        validate_loop(self.alpha, self.max_iterations)?;
        self.mirna_classifier.validate()?;
        self.gene_classifier.validate()
    }
}

/// Everything the co-training loop reads.
#[derive(Debug, Clone, Copy)]
pub struct CoTrainInputs<'a, T> {
    pub l_mirna: &'a LabeledDataset<T>,
    pub u_mirna: &'a [UnlabeledDataset<T>],
    pub l_gene: &'a LabeledDataset<T>,
    pub u_gene: &'a [UnlabeledDataset<T>],
    pub table: &'a TargetPairTable,
    pub eval_mirna: Option<&'a LabeledDataset<T>>,
    pub eval_gene: Option<&'a LabeledDataset<T>>,
}

#[derive(Debug, Clone)]
pub struct CoTrainOutput<T> {
    pub c_mirna: TrainedModel<T>,
    pub c_gene: TrainedModel<T>,
    pub history_mirna: TrainingHistory,
    pub history_gene: TrainingHistory,
    /// Final training sets.
    pub l_mirna: LabeledDataset<T>,
    pub l_gene: LabeledDataset<T>,
    /// Samples appended to the miRNA training set; all originate in gene pools.
    pub promoted_to_mirna: Vec<Promotion>,
    /// Samples appended to the gene training set; all originate in miRNA pools.
    pub promoted_to_gene: Vec<Promotion>,
    /// Opposite-view labeled samples appended before the loop.
    pub seeded_mirna: usize,
    pub seeded_gene: usize,
}

/// Prefix for samples that entered a view by mapping from `source`.
pub fn mapped_prefix(source: ViewKind) -> String {
    format!("mapped:{}:", source.as_str())
}

/// One view's training set and bookkeeping.
struct Side<T> {
    view: ViewKind,
    training: LabeledDataset<T>,
    pools: Vec<Pool<T>>,
    spec: ClassifierSpec,
    model: TrainedModel<T>,
    eval: Option<LabeledDataset<T>>,
    best_f1: Option<f64>,
    history: TrainingHistory,
    promoted: Vec<Promotion>,
}

/// Picks of one view waiting to be mapped into the other.
struct Picks<T> {
    pool: String,
    matrix: ExpressionMatrix<T>,
    predictions: Vec<ConfidentPrediction>,
}

impl<T: Scalar> Side<T> {
    fn harvest(&mut self, alpha: f64, remove: bool) -> Result<Vec<Picks<T>>> {
        let mut out = Vec::new();
        for pool in self.pools.iter_mut() {
            let h = pool.harvest(&self.model, alpha, remove)?;
            if !h.predictions.is_empty() {
                out.push(Picks {
                    pool: pool.name.clone(),
                    matrix: h.matrix,
                    predictions: h.predictions,
                });
            }
        }
        Ok(out)
    }

    /// Maps `matrix` onto this side's panel and appends it. Panel features
    /// the table cannot cover are dropped from the training set. Returns
    /// `None` when nothing of the panel is covered.
    fn absorb(
        &mut self,
        matrix: &ExpressionMatrix<T>,
        labels: Vec<String>,
        prefix: &str,
        table: &TargetPairTable,
    ) -> Result<Option<LabeledDataset<T>>> {
        let converted = match convert_to(matrix, table, self.training.matrix().feature_ids(), self.view) {
            Ok(c) => c,
            Err(Error::NoCoverage { .. }) => return Ok(None),
            Err(e) => return Err(e.context(format!("mapping into the {} view", self.view.as_str()))),
        };
        if !converted.uncovered.is_empty() {
            self.training = self.training.select_features(converted.matrix.feature_ids())?;
        }
        let renamed = converted.matrix.rename_samples(|s| format!("{prefix}{s}"))?;
        let batch = LabeledDataset::new(renamed, labels)?;
        self.training = append_samples(&self.training, &batch)?;
        Ok(Some(batch))
    }

    fn retrain(&mut self) -> Result<()> {
        self.model = train(&self.spec, &self.training)
            .map_err(|e| e.context(format!("training the {} classifier", self.view.as_str())))?;
        Ok(())
    }

    fn score(&self) -> Result<Option<f64>> {
        self.eval.as_ref().map(|e| weighted_f1(&self.model, e)).transpose()
    }
}

fn absorb_picks<T: Scalar>(
    target: &mut Side<T>,
    picks: &[Picks<T>],
    source: ViewKind,
    iteration: usize,
    table: &TargetPairTable,
    record: &mut IterationRecord,
) -> Result<()> {
    for p in picks {
        let prefix = format!("{}{}:", mapped_prefix(source), p.pool);
        let labels = p.predictions.iter().map(|x| x.label.clone()).collect();
        let Some(batch) = target.absorb(&p.matrix, labels, &prefix, table)? else {
            record.skipped_count += p.predictions.len();
            continue;
        };
        for (pred, id) in p.predictions.iter().zip(batch.matrix().sample_ids()) {
            *record.promoted_per_class.entry(pred.label.clone()).or_insert(0) += 1;
            target.promoted.push(Promotion {
                iteration,
                pool: format!("{}:{}", source.as_str(), p.pool),
                source_id: pred.sample_id.clone(),
                sample_id: id.clone(),
                label: pred.label.clone(),
                confidence: pred.confidence,
            });
        }
        record.promoted_count += batch.len();
    }
    record.training_size = target.training.len();
    Ok(())
}

fn check_view<T: Scalar>(data: &ExpressionMatrix<T>, view: ViewKind) -> Result<()> {
    if data.view() != view {
        return Err(Error::ViewMismatch {
            expected: view,
            found: data.view(),
        });
    }
    Ok(())
}

/// True when some feature of `panel` (in `view`) has a partner in `other_panel`.
fn panels_connected(table: &TargetPairTable, view: ViewKind, panel: &[String], other_panel: &[String]) -> bool {
    let other: std::collections::HashSet<&String> = other_panel.iter().collect();
    panel.iter().any(|f| {
        table
            .partners(view, f)
            .is_some_and(|ps| ps.iter().any(|p| other.contains(p)))
    })
}

fn build_side<T: Scalar>(
    view: ViewKind,
    labeled: &LabeledDataset<T>,
    pools: &[UnlabeledDataset<T>],
    spec: &ClassifierSpec,
) -> Result<(LabeledDataset<T>, Vec<Pool<T>>)> {
    check_view(labeled.matrix(), view)?;
    for p in pools {
        check_view(&p.matrix, view).map_err(|e| e.context(format!("pool `{}`", p.name)))?;
    }
    let panel = common_panel(labeled.matrix(), pools)
        .map_err(|e| e.context(format!("{} pools", view.as_str())))?;
    let training = labeled.select_features(&panel)?;
    let pools = pools
        .iter()
        .filter(|p| crate::data::feature_overlap(labeled.matrix(), &p.matrix) > 0)
        .map(|p| Ok(Pool::new(p.name.clone(), p.matrix.select_features(&panel)?)))
        .collect::<Result<Vec<_>>>()?;
    spec.validate()?;
    Ok((training, pools))
}

pub fn co_train<T: Scalar>(inputs: CoTrainInputs<'_, T>, cfg: &CoTrainConfig) -> Result<CoTrainOutput<T>> {
    cfg.validate()?;
    let (mirna_classes, gene_classes) = (inputs.l_mirna.class_set(), inputs.l_gene.class_set());
    if mirna_classes != gene_classes {
        return Err(Error::ClassSetMismatch(mirna_classes, gene_classes));
    }
    if inputs.table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let (l_m, pools_m) = build_side(ViewKind::MiRna, inputs.l_mirna, inputs.u_mirna, &cfg.mirna_classifier)?;
    let (l_g, pools_g) = build_side(ViewKind::Gene, inputs.l_gene, inputs.u_gene, &cfg.gene_classifier)?;
    let (panel_m, panel_g) = (l_m.matrix().feature_ids(), l_g.matrix().feature_ids());
    if !panels_connected(inputs.table, ViewKind::MiRna, panel_m, panel_g) {
        return Err(Error::NoCoverage { view: ViewKind::MiRna }
            .context("target table links no miRNA of the labeled panel to any gene of the labeled panel"));
    }

    let mut mirna = Side {
        view: ViewKind::MiRna,
        model: train(&cfg.mirna_classifier, &l_m)?,
        training: l_m,
        pools: pools_m,
        spec: cfg.mirna_classifier.clone(),
        eval: inputs.eval_mirna.cloned(),
        best_f1: None,
        history: TrainingHistory::default(),
        promoted: Vec::new(),
    };
    let mut gene = Side {
        view: ViewKind::Gene,
        model: train(&cfg.gene_classifier, &l_g)?,
        training: l_g,
        pools: pools_g,
        spec: cfg.gene_classifier.clone(),
        eval: inputs.eval_gene.cloned(),
        best_f1: None,
        history: TrainingHistory::default(),
        promoted: Vec::new(),
    };

    let (mut seeded_mirna, mut seeded_gene) = (0, 0);
    if cfg.seed_with_opposite_labeled {
        let gene_labeled = gene.training.clone();
        let mirna_labeled = mirna.training.clone();
        let prefix_m = format!("{}labeled:", mapped_prefix(ViewKind::Gene));
        let prefix_g = format!("{}labeled:", mapped_prefix(ViewKind::MiRna));
        if let Some(b) = mirna.absorb(gene_labeled.matrix(), gene_labeled.labels().to_vec(), &prefix_m, inputs.table)? {
            seeded_mirna = b.len();
        }
        if let Some(b) = gene.absorb(mirna_labeled.matrix(), mirna_labeled.labels().to_vec(), &prefix_g, inputs.table)? {
            seeded_gene = b.len();
        }
        mirna.retrain()?;
        gene.retrain()?;
    }
    for side in [&mut mirna, &mut gene] {
        side.history = TrainingHistory::new(side.training.len());
        side.best_f1 = side.score()?;
    }

    for iteration in 1..=cfg.max_iterations {
        let picks_m = mirna.harvest(cfg.alpha, cfg.remove_promoted)?;
        let picks_g = gene.harvest(cfg.alpha, cfg.remove_promoted)?;
        let count = |p: &[Picks<T>]| p.iter().map(|x| x.predictions.len()).sum::<usize>();
        let mut rec_m = IterationRecord {
            iteration,
            confident_count: count(&picks_m),
            ..Default::default()
        };
        let mut rec_g = IterationRecord {
            iteration,
            confident_count: count(&picks_g),
            ..Default::default()
        };
        absorb_picks(&mut mirna, &picks_g, ViewKind::Gene, iteration, inputs.table, &mut rec_m)?;
        absorb_picks(&mut gene, &picks_m, ViewKind::MiRna, iteration, inputs.table, &mut rec_g)?;

        if rec_m.promoted_count + rec_g.promoted_count == 0 {
            rec_m.weighted_f1 = mirna.best_f1;
            rec_g.weighted_f1 = gene.best_f1;
            mirna.history.iterations.push(rec_m);
            gene.history.iterations.push(rec_g);
            break;
        }
        // Only a view whose training set grew needs a new model.
        if rec_m.promoted_count > 0 {
            mirna.retrain()?;
        }
        if rec_g.promoted_count > 0 {
            gene.retrain()?;
        }
        let (f1_m, f1_g) = (mirna.score()?, gene.score()?);
        rec_m.weighted_f1 = f1_m;
        rec_g.weighted_f1 = f1_g;
        mirna.history.iterations.push(rec_m);
        gene.history.iterations.push(rec_g);

        let improved = |now: Option<f64>, before: Option<f64>| matches!((now, before), (Some(a), Some(b)) if a > b);
        let has_eval = mirna.eval.is_some() || gene.eval.is_some();
        let any_improved = improved(f1_m, mirna.best_f1) || improved(f1_g, gene.best_f1);
        let best = |now: Option<f64>, before: Option<f64>| match (now, before) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        mirna.best_f1 = best(f1_m, mirna.best_f1);
        gene.best_f1 = best(f1_g, gene.best_f1);
        if has_eval && !any_improved {
            break;
        }
    }

    Ok(CoTrainOutput {
        c_mirna: mirna.model,
        c_gene: gene.model,
        history_mirna: mirna.history,
        history_gene: gene.history,
        l_mirna: mirna.training,
        l_gene: gene.training,
        promoted_to_mirna: mirna.promoted,
        promoted_to_gene: gene.promoted,
        seeded_mirna,
        seeded_gene,
    })
}

/// Promotions per class, for reporting.
pub fn promotions_by_class(promotions: &[Promotion]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in promotions {
        *out.entry(p.label.clone()).or_insert(0) += 1;
    }
    out
}
