//! Semi-supervised cancer sample classification over two expression views.
//!
//! A labeled expression set trains a baseline classifier. Self-training
//! grows its training set with the classifier's own confident predictions
//! on unlabeled sets. Co-training runs one classifier per view (miRNA and
//! gene) and feeds each one's confident predictions, mapped through a
//! miRNA-target table, to the other.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to one of them.

pub mod classifier;
pub mod co_training;
pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod mapping;
pub mod metrics;
pub mod report;
pub mod scalar;
pub mod self_training;
pub mod synthetic;

pub use classifier::{train, ClassifierKind, ClassifierSpec, FeaturesPerSplit, TrainedModel};
pub use co_training::{co_train, CoTrainConfig, CoTrainInputs, CoTrainOutput};
pub use data::{
    align_features, append_samples, ConfidentPrediction, ExpressionMatrix, LabeledDataset,
    UnlabeledDataset, ViewKind,
};
pub use error::{Error, Result};
pub use harness::{compare, run, ExperimentConfig};
pub use mapping::{convert_to_gene, convert_to_mirna, TargetPairTable};
pub use metrics::{confusion, evaluate, ConfusionMatrix, EvalReport, Scores};
pub use report::{ExperimentReport, IterationRecord, Mode, TrainingHistory};
pub use scalar::Scalar;
pub use self_training::{choose_most_confident, self_train, SelfTrainConfig, SelfTrainOutput};
pub use synthetic::{generate, SyntheticData, SyntheticSpec, ViewCoupling};

pub type Matrix = ExpressionMatrix<f64>;
pub type Labeled = LabeledDataset<f64>;
pub type Unlabeled = UnlabeledDataset<f64>;
pub type Model = TrainedModel<f64>;

pub type Matrix32 = ExpressionMatrix<f32>;
pub type Labeled32 = LabeledDataset<f32>;
pub type Unlabeled32 = UnlabeledDataset<f32>;
pub type Model32 = TrainedModel<f32>;
