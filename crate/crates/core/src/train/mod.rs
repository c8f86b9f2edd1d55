//! The two-branch ensemble model and everything around training it.

mod checkpoint;
mod cv;
mod kfold;
mod loss;
mod metrics;
mod model;
mod optim;
mod trainer;

pub use checkpoint::{checkpoint_entries, load_checkpoint, save_checkpoint};
pub use cv::{cross_validate, fit_final, node_feature_matrix, prepare, CvReport, Fitted, FoldResult, Prepared};
pub use kfold::{kfold_split, FoldPlan};
pub use loss::{ensemble_loss, nll_backward, nll_loss};
pub use metrics::{compute_metrics, ClassScores, Metrics};
pub use model::{edge_embed, EnsembleModel, ModelSpec, CONV_KERNELS, CONV_LEAKY_SLOPE, EDGE_HIDDEN};
pub use optim::{
    Adam, Optimizer, OptimizerFactory, OptimizerRegistry, OptimizerSettings, Sgd, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPSILON,
};
pub use trainer::{
    accumulate_gradients, argmax, predict, predict_log_probs, train_items, train_model, EpochRecord, History,
    TrainingConfig,
};
