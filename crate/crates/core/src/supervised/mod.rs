//! Supervised segmentation from hand-labelled pixels.
//!
//! Each labelled pixel becomes a 36-value vector of raw intensities from the
//! 6×6 patch around it. Classifiers are either least-squares SVMs (one
//! machine per class pair) or ensembles of shallow decision trees.

mod ensemble;
mod features;
mod lssvm;
mod model;
mod table;
mod tree;
mod validate;

pub use ensemble::{train_ensemble, BoostRound, EnsembleMethod, EnsembleModel, EnsembleParams};
pub use features::{extract_features, patch_at, FeatureMatrix, N_FEATURES, PATCH_ANCHOR, PATCH_SIDE};
pub use lssvm::{train_lssvm, BinaryMachine, KernelKind, LssvmModel, LssvmParams, Scaler};
pub use model::{classify_volume, classify_volume_monitored, Classifier, Trainer, MODEL_FORMAT, MODEL_VERSION};
pub use table::{TrainingRow, TrainingTable};
pub use tree::{DecisionTree, Node};
pub use validate::{cross_validate, fold_assignment, roc_curve, segmentation_entropy, CvReport, Roc};
