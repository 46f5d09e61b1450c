//! Continuous-time risk monitoring with a tree-boosted hazard estimator.
//!
//! The crate covers the whole pipeline: long-format recurrent-event data
//! ([`data`], [`io`]), carry-forward ingestion and embedding fusion
//! ([`ingest`], [`fusion`]), boosting of the log-hazard ([`boost`]), grouped
//! cross-validation ([`cv`]), evaluation of realtime flagging ([`eval`]),
//! streaming scoring ([`monitor`]) and a synthetic cohort simulator with a
//! known hazard ([`synth`]).

pub mod boost;
pub mod cv;
pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod ingest;
pub mod io;
pub mod monitor;
pub mod synth;

pub use boost::{
    fit_f0, neg_log_likelihood, survival, train, train_with_report, variable_importance,
    HazardEnsemble, TrainConfig, TreeNode,
};
pub use data::{
    event_count, total_exposure, validate_episode, DatasetSchema, Episode, Epoch, FeatureKind,
    Violation,
};
pub use error::{Error, Result};
pub use fusion::{fuse_embeddings, EmbeddingEntry, EmbeddingStream};
pub use monitor::{score_batch, MonitorRow, StreamingMonitor};
pub use synth::{simulate, ScenarioSpec, SimulatedCohort};
