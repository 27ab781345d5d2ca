//! Experiment runner: loads manifests, trains per mode, evaluates on the
//! test set and writes the report.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::classifier::{train, ClassifierSpec, TrainedModel};
use crate::co_training::{co_train, CoTrainConfig, CoTrainInputs};
use crate::data::{LabeledDataset, UnlabeledDataset, ViewKind};
use crate::error::{Error, Result};
use crate::io::{read_labels_tsv, read_target_pairs_tsv, write_report_json, DatasetManifest, DatasetRole, MissingPolicy};
use crate::mapping::TargetPairTable;
use crate::metrics::{percent, ConfusionMatrix, EvalReport};
use crate::report::{ExperimentReport, Mode, TrainingHistory, ViewReport};
use crate::self_training::{self_train, SelfTrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub manifests: Vec<DatasetManifest>,
    pub mode: Mode,
    pub alpha: f64,
    pub max_iterations: usize,
    pub classifier: ClassifierSpec,
    /// Overrides `classifier.seed`.
    pub seed: u64,
    pub remove_promoted: bool,
    pub seed_with_opposite_labeled: bool,
    /// Stop iterating once test-set weighted F1 stops improving.
    pub early_stop: bool,
    pub missing: MissingPolicy,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            manifests: Vec::new(),
            mode: Mode::Baseline,
            alpha: 0.9,
            max_iterations: 2,
            classifier: ClassifierSpec::default(),
            seed: 0,
            remove_promoted: true,
            seed_with_opposite_labeled: false,
            early_stop: false,
            missing: MissingPolicy::Reject,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
    }

    fn manifests_of(&self, role: DatasetRole) -> impl Iterator<Item = &DatasetManifest> {
        self.manifests.iter().filter(move |m| m.role == role)
    }

    fn single(&self, role: DatasetRole) -> Result<Option<&DatasetManifest>> {
        let mut it = self.manifests_of(role);
        let first = it.next();
        if it.next().is_some() {
            return Err(Error::InvalidConfig(format!("more than one {role:?} manifest")));
        }
        Ok(first)
    }

    fn require(&self, role: DatasetRole) -> Result<&DatasetManifest> {
        self.single(role)?
            .ok_or_else(|| Error::InvalidConfig(format!("mode {:?} needs a {role:?} manifest", self.mode)))
    }

    /// View trained in Baseline and SelfTrain modes: miRNA when a labeled
    /// miRNA manifest is present, gene otherwise.
    pub fn primary_view(&self) -> ViewKind {
        match self.mode {
            Mode::CoTrain => ViewKind::MiRna,
            _ if self.manifests_of(DatasetRole::LabeledMiRna).next().is_some() => ViewKind::MiRna,
            _ => ViewKind::Gene,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.manifests {
            m.validate()?;
        }
        self.require(DatasetRole::Labels)?;
        let (labeled, test) = roles(self.primary_view());
        self.require(labeled)?;
        self.require(test)?;
        if self.mode == Mode::CoTrain {
            let (labeled, test) = roles(ViewKind::Gene);
            self.require(labeled)?;
            self.require(test)?;
            self.require(DatasetRole::TargetPairs)?;
        }
        self.single(DatasetRole::TargetPairs)?;
        self.loop_config().validate()
    }

    fn spec(&self) -> ClassifierSpec {
        self.classifier.clone().with_seed(self.seed)
    }

    fn loop_config(&self) -> SelfTrainConfig {
        SelfTrainConfig {
            alpha: self.alpha,
            max_iterations: self.max_iterations,
            classifier: self.spec(),
            remove_promoted: self.remove_promoted,
        }
    }

    /// Test manifests in a comparable form.
    fn test_set(&self) -> Vec<(DatasetRole, PathBuf)> {
        let mut out: Vec<_> = self
            .manifests
            .iter()
            .filter(|m| matches!(m.role, DatasetRole::TestMiRna | DatasetRole::TestGene))
            .map(|m| (m.role, m.path.clone()))
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1));
        out
    }
}

fn roles(view: ViewKind) -> (DatasetRole, DatasetRole) {
    match view {
        ViewKind::MiRna => (DatasetRole::LabeledMiRna, DatasetRole::TestMiRna),
        ViewKind::Gene => (DatasetRole::LabeledGene, DatasetRole::TestGene),
    }
}

fn unlabeled_role(view: ViewKind) -> DatasetRole {
    match view {
        ViewKind::MiRna => DatasetRole::UnlabeledMiRna,
        ViewKind::Gene => DatasetRole::UnlabeledGene,
    }
}

struct Inputs<'a> {
    cfg: &'a ExperimentConfig,
    labels: HashMap<String, String>,
}

impl Inputs<'_> {
    fn labeled(&self, m: &DatasetManifest) -> Result<LabeledDataset<f64>> {
        let ctx = |e: Error| e.context(format!("loading {}", m.path.display()));
        let matrix = m.load_matrix(self.cfg.missing).map_err(ctx)?;
        LabeledDataset::from_label_map(matrix, &self.labels).map_err(ctx)
    }

    fn labeled_role(&self, role: DatasetRole) -> Result<LabeledDataset<f64>> {
        self.labeled(self.cfg.require(role)?)
    }

    fn pools(&self, view: ViewKind) -> Result<Vec<UnlabeledDataset<f64>>> {
        let mut seen = HashSet::new();
        self.cfg
            .manifests_of(unlabeled_role(view))
            .map(|m| {
                let matrix = m
                    .load_matrix(self.cfg.missing)
                    .map_err(|e| e.context(format!("loading {}", m.path.display())))?;
                let mut name = m.name();
                let mut k = 1;
                while !seen.insert(name.clone()) {
                    k += 1;
                    name = format!("{}#{k}", m.name());
                }
                Ok(UnlabeledDataset::new(name, matrix))
            })
            .collect()
    }

    fn table(&self) -> Result<TargetPairTable> {
        let m = self.cfg.require(DatasetRole::TargetPairs)?;
        read_target_pairs_tsv(&m.path).map_err(|e| e.context(format!("loading {}", m.path.display())))
    }
}

/// Weighted evaluation of `model` on `test`, over the model's classes plus
/// any label seen only in the test set.
pub fn evaluate_model(model: &TrainedModel<f64>, test: &LabeledDataset<f64>) -> Result<EvalReport> {
    let predicted = model.predict(test.matrix())?;
    ConfusionMatrix::with_classes(model.class_set().to_vec(), test.labels(), &predicted)?.evaluate()
}

fn view_report(
    view: ViewKind,
    model: &TrainedModel<f64>,
    test: &LabeledDataset<f64>,
    history: TrainingHistory,
) -> Result<ViewReport> {
    Ok(ViewReport {
        view,
        eval: evaluate_model(model, test).map_err(|e| e.context(format!("evaluating the {} classifier", view.as_str())))?,
        history,
    })
}

/// Runs one experiment and returns its report. When `cfg.out` is set, the
/// report is written there and a timestamped line goes to `<out>.log`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let labels_manifest = cfg.require(DatasetRole::Labels)?;
    let inputs = Inputs {
        cfg,
        labels: read_labels_tsv(&labels_manifest.path)
            .map_err(|e| e.context(format!("loading {}", labels_manifest.path.display())))?,
    };
    let view = cfg.primary_view();
    let (labeled_role, test_role) = roles(view);
    let labeled = inputs.labeled_role(labeled_role)?;
    let test = inputs.labeled_role(test_role)?;

    let (primary, partner) = match cfg.mode {
        Mode::Baseline => {
            let model = train(&cfg.spec(), &labeled)?;
            (view_report(view, &model, &test, TrainingHistory::new(labeled.len()))?, None)
        }
        Mode::SelfTrain => {
            let pools = inputs.pools(view)?;
            let eval = cfg.early_stop.then_some(&test);
            let out = self_train(&labeled, &pools, &cfg.loop_config(), eval)?;
            (view_report(view, &out.model, &test, out.history)?, None)
        }
        Mode::CoTrain => {
            let l_gene = inputs.labeled_role(DatasetRole::LabeledGene)?;
            let test_gene = inputs.labeled_role(DatasetRole::TestGene)?;
            let u_mirna = inputs.pools(ViewKind::MiRna)?;
            let u_gene = inputs.pools(ViewKind::Gene)?;
            let table = inputs.table()?;
            let co = CoTrainConfig {
                alpha: cfg.alpha,
                max_iterations: cfg.max_iterations,
                mirna_classifier: cfg.spec(),
                gene_classifier: cfg.spec(),
                remove_promoted: cfg.remove_promoted,
                seed_with_opposite_labeled: cfg.seed_with_opposite_labeled,
            };
            let out = co_train(
                CoTrainInputs {
                    l_mirna: &labeled,
                    u_mirna: &u_mirna,
                    l_gene: &l_gene,
                    u_gene: &u_gene,
                    table: &table,
                    eval_mirna: cfg.early_stop.then_some(&test),
                    eval_gene: cfg.early_stop.then_some(&test_gene),
                },
                &co,
            )?;
            (
                view_report(ViewKind::MiRna, &out.c_mirna, &test, out.history_mirna)?,
                Some(view_report(ViewKind::Gene, &out.c_gene, &test_gene, out.history_gene)?),
            )
        }
    };
    let report = ExperimentReport {
        name: cfg.name.clone(),
        mode: cfg.mode,
        primary,
        partner,
    };
    if let Some(out) = &cfg.out {
        write_report_json(&report, out)?;
        write_log(cfg, &report, out)?;
    }
    Ok(report)
}

/// Path of the sidecar log for a report path.
pub fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

fn write_log(cfg: &ExperimentConfig, report: &ExperimentReport, out: &Path) -> Result<()> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let line = format!(
        "{secs}\t{}\t{:?}\tseed={}\tweighted_f1={}\n",
        cfg.name, cfg.mode, cfg.seed, report.primary.eval.weighted.f1
    );
    let path = log_path(out);
    fs::write(&path, line).map_err(|e| Error::io(path, e))
}

/// One comparison row, metrics as percentages with one decimal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub precision: String,
    pub recall: String,
    pub f1: String,
}

impl ComparisonRow {
    pub fn from_report(report: &ExperimentReport) -> Self {
        let w = &report.primary.eval.weighted;
        Self {
            name: report.name.clone(),
            precision: percent(w.precision),
            recall: percent(w.recall),
            f1: percent(w.f1),
        }
    }
}

/// Runs every config and tabulates their primary weighted scores. All
/// configs must evaluate on the same test manifests.
pub fn compare(cfgs: &[ExperimentConfig]) -> Result<Vec<ComparisonRow>> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::InvalidConfig("compare needs at least one config".into()))?;
    let tests = first.test_set();
    for c in &cfgs[1..] {
        if c.test_set() != tests {
            return Err(Error::TestSetMismatch(format!("`{}` vs `{}`", first.name, c.name)));
        }
    }
    cfgs.iter()
        .map(|c| Ok(ComparisonRow::from_report(&run(c).map_err(|e| e.context(format!("experiment `{}`", c.name)))?)))
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
    let mut out = format!("{:<width$}  {:>9}  {:>6}  {:>5}\n", "name", "precision", "recall", "f1");
    for r in rows {
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>6}  {:>5}", r.name, r.precision, r.recall, r.f1);
    }
    out
}
