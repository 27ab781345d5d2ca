use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cotrain::harness::{compare, comparison_csv, comparison_table, ComparisonRow};
use cotrain::io::{read_expression_csv, DatasetManifest, DatasetRole, Normalize};
use cotrain::metrics::percent;
use cotrain::synthetic::{generate, write_dataset, SyntheticSpec, ViewCoupling};
use cotrain::{ClassifierKind, ClassifierSpec, ExperimentConfig, Mode, ViewKind};

#[derive(Parser)]
#[command(name = "cotrain", version, about = "Self-training and co-training over miRNA and gene expression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one experiment.
    Run(RunArgs),
    /// Run several JSON experiment configs and tabulate them.
    Compare {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a synthetic two-view dataset.
    Generate(GenerateArgs),
    /// Count features two expression files share.
    Overlap {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "mirna")]
        view: ViewArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    SelfTrain,
    CoTrain,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Rf,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeArg {
    None,
    Zscore,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Mirna,
    Gene,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; other flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "baseline")]
    mode: ModeArg,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    labeled_mirna: Option<PathBuf>,
    #[arg(long)]
    unlabeled_mirna: Vec<PathBuf>,
    #[arg(long)]
    labeled_gene: Option<PathBuf>,
    #[arg(long)]
    unlabeled_gene: Vec<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Test set of the trained view (the miRNA view in co-training).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Gene-view test set for co-training.
    #[arg(long)]
    test_gene: Option<PathBuf>,
    /// `sample<TAB>label` for labeled and test samples.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "rf")]
    classifier: ClassifierArg,
    #[arg(long, default_value_t = 10)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "none")]
    normalize: NormalizeArg,
    /// Report JSON path; a timestamped log goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop once test-set F1 stops improving.
    #[arg(long)]
    early_stop: bool,
    /// Keep promoted samples in their pools.
    #[arg(long)]
    keep_promoted: bool,
    /// Map each view's labeled set into the other before co-training.
    #[arg(long)]
    seed_with_opposite_labeled: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return Ok(ExperimentConfig::from_json_file(path)?);
        }
        let normalize = match self.normalize {
            NormalizeArg::None => Normalize::None,
            NormalizeArg::Zscore => Normalize::ZScorePerFeature,
        };
        let mut manifests = Vec::new();
        let mut add = |path: &Option<PathBuf>, role| {
            if let Some(p) = path {
                manifests.push(DatasetManifest::new(p, role, normalize));
            }
        };
        add(&self.labeled_mirna, DatasetRole::LabeledMiRna);
        add(&self.labeled_gene, DatasetRole::LabeledGene);
        let test_role = if self.labeled_mirna.is_some() {
            DatasetRole::TestMiRna
        } else {
            DatasetRole::TestGene
        };
        add(&self.test, test_role);
        add(&self.test_gene, DatasetRole::TestGene);
        for p in &self.unlabeled_mirna {
            add(&Some(p.clone()), DatasetRole::UnlabeledMiRna);
        }
        for p in &self.unlabeled_gene {
            add(&Some(p.clone()), DatasetRole::UnlabeledGene);
        }
        if let Some(p) = &self.targets {
            manifests.push(DatasetManifest::new(p, DatasetRole::TargetPairs, Normalize::None));
        }
        if let Some(p) = &self.labels {
            manifests.push(DatasetManifest::new(p, DatasetRole::Labels, Normalize::None));
        }
        let mode = match self.mode {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::SelfTrain => Mode::SelfTrain,
            ModeArg::CoTrain => Mode::CoTrain,
        };
        let classifier = match self.classifier {
            ClassifierArg::Rf => ClassifierSpec::random_forest(self.trees, self.seed),
            ClassifierArg::Linear => ClassifierSpec {
                kind: ClassifierKind::LinearOvr,
                ..ClassifierSpec::linear(self.seed)
            },
        };
        Ok(ExperimentConfig {
            name: self.name.unwrap_or_else(|| format!("{mode:?}")),
            manifests,
            mode,
            alpha: self.alpha,
            max_iterations: self.max_iters,
            classifier,
            seed: self.seed,
            remove_promoted: !self.keep_promoted,
            seed_with_opposite_labeled: self.seed_with_opposite_labeled,
            early_stop: self.early_stop,
            out: self.out,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    features: usize,
    #[arg(long, default_value_t = 10)]
    labeled: usize,
    #[arg(long, default_value_t = 200)]
    unlabeled: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Pair density for many-to-many coupling; bijective when absent.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn print_rows(rows: &[ComparisonRow]) {
    print!("{}", comparison_table(rows));
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let report = cotrain::run(&cfg).with_context(|| format!("experiment `{}`", cfg.name))?;
            let w = &report.primary.eval.weighted;
            println!(
                "{} {} precision={} recall={} f1={} training_size={}",
                report.name,
                report.primary.view.as_str(),
                percent(w.precision),
                percent(w.recall),
                percent(w.f1),
                report.primary.history.final_training_size(),
            );
            if let Some(p) = &report.partner {
                let w = &p.eval.weighted;
                println!(
                    "{} {} precision={} recall={} f1={} training_size={}",
                    report.name,
                    p.view.as_str(),
                    percent(w.precision),
                    percent(w.recall),
                    percent(w.f1),
                    p.history.final_training_size(),
                );
            }
        }
        Command::Compare { configs, csv } => {
            let cfgs = configs
                .iter()
                .map(ExperimentConfig::from_json_file)
                .collect::<Result<Vec<_>, _>>()?;
            let rows = compare(&cfgs)?;
            print_rows(&rows);
            if let Some(path) = csv {
                fs::write(&path, comparison_csv(&rows)?).with_context(|| path.display().to_string())?;
            }
        }
        Command::Generate(g) => {
            let spec = SyntheticSpec {
                n_classes: g.classes,
                features_per_view: g.features,
                n_labeled: g.labeled,
                n_unlabeled: g.unlabeled,
                n_test: g.test,
                class_separation: g.separation,
                view_coupling: g.density.map_or(ViewCoupling::Bijective, ViewCoupling::RandomManyToMany),
                label_noise: g.label_noise,
                seed: g.seed,
            };
            write_dataset(&generate::<f64>(&spec)?, &g.out_dir)?;
            println!("wrote {}", g.out_dir.display());
        }
        Command::Overlap { a, b, view } => {
            let view = match view {
                ViewArg::Mirna => ViewKind::MiRna,
                ViewArg::Gene => ViewKind::Gene,
            };
            let ma = read_expression_csv::<f64>(&a, view)?;
            let mb = read_expression_csv::<f64>(&b, view)?;
            let shared = cotrain::data::feature_overlap(&ma, &mb);
            if ma.n_features() == 0 || mb.n_features() == 0 {
                bail!("empty feature panel");
            }
            println!("{}\t{}\t{shared}", ma.n_features(), mb.n_features());
        }
    }
    Ok(())
}
