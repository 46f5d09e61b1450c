//! Tree-boosted hazard estimation for recurrent events with time-varying
//! covariates.

mod ensemble;
mod train;
mod tree;

pub use ensemble::{
    neg_log_likelihood, survival, variable_importance, FeatureImportance, HazardEnsemble,
    HazardStep, MODEL_VERSION,
};
pub use train::{candidate_thresholds, fit_f0, train, train_with_report, TrainConfig, TrainReport};
pub use tree::{TreeNode, TIME_FEATURE};
