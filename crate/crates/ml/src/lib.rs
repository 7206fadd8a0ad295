//! Dense classifiers for precomputed node features: a from-scratch MLP with
//! full-batch AdamW training, evaluation metrics, grid sweeps and
//! permutation importance grouped by hop.

pub mod error;
pub mod explain;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod sweep;
pub mod train;

pub use error::{MlError, Result};
pub use explain::{hop_stack_report, permutation_importance, HopStackRow, ImportanceOptions, ImportanceReport};
pub use metrics::{accuracy, evaluate, roc_auc, MetricKind};
pub use mlp::{Classifier, Mlp, MlpConfig, Mode, Normalization};
pub use optim::AdamW;
pub use sweep::{sweep, RunRecord, SweepGrid, SweepOptions, SweepResult, SweepRow};
pub use train::{gradient_check, gradient_check_model, train, train_matrix, TrainOutcome, TrainReport};
