use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{TreeNode, TIME_FEATURE};
use crate::data::{DatasetSchema, Episode, Epoch};
use crate::error::{Error, Result};

pub const MODEL_VERSION: &str = "hazardforge-model-v1";

/// `λ̂(t, x) = exp(f0 + nu · Σ tree(t, x))`.
///
/// Within any interval free of time thresholds the hazard of a fixed
/// covariate vector is constant, so integrals over an epoch are computed
/// exactly by summing over the pieces between `time_split_points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardEnsemble {
    version: String,
    f0: f64,
    nu: f64,
    schema: DatasetSchema,
    trees: Vec<TreeNode>,
    time_split_points: Vec<f64>,
}

/// Constant-hazard interval of a scored trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardStep {
    pub start: f64,
    pub end: f64,
    pub hazard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub importance: f64,
}

fn collect_time_splits(trees: &[TreeNode]) -> Vec<f64> {
    let mut points = Vec::new();
    for tree in trees {
        tree.for_each_split(&mut |feature, threshold, _| {
            if feature == TIME_FEATURE {
                points.push(threshold);
            }
        });
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

impl HazardEnsemble {
    pub fn new(f0: f64, nu: f64, trees: Vec<TreeNode>, schema: DatasetSchema) -> Result<Self> {
        let model = Self {
            version: MODEL_VERSION.to_string(),
            f0,
            nu,
            time_split_points: collect_time_splits(&trees),
            schema,
            trees,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model version `{}`",
                self.version
            )));
        }
        if !self.f0.is_finite() {
            return Err(Error::InvalidConfig("f0 must be finite".into()));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidConfig(format!("nu must be in (0, 1], got {}", self.nu)));
        }
        for tree in &self.trees {
            tree.check(self.schema.width()).map_err(Error::InvalidConfig)?;
        }
        if self.time_split_points != collect_time_splits(&self.trees) {
            return Err(Error::Parse(
                "time_split_points disagree with the trees".into(),
            ));
        }
        self.schema.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.check()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn time_split_points(&self) -> &[f64] {
        &self.time_split_points
    }

    /// The model made of the first `m` trees.
    pub fn truncated(&self, m: usize) -> Self {
        let trees = self.trees[..m.min(self.trees.len())].to_vec();
        Self {
            version: self.version.clone(),
            f0: self.f0,
            nu: self.nu,
            time_split_points: collect_time_splits(&trees),
            schema: self.schema.clone(),
            trees,
        }
    }

    pub fn log_hazard(&self, t: f64, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.schema.width());
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(t, x);
        }
        self.f0 + self.nu * sum
    }

    pub fn hazard(&self, t: f64, x: &[f64]) -> f64 {
        self.log_hazard(t, x).exp()
    }

    /// Start points of the constant pieces of `[a, b)`.
    fn piece_starts(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let lo = self.time_split_points.partition_point(|&p| p <= a);
        let hi = self.time_split_points.partition_point(|&p| p < b);
        std::iter::once(a).chain(self.time_split_points[lo..hi].iter().copied())
    }

    /// Constant pieces of `λ̂(·, x)` over `[a, b)`.
    pub fn steps(&self, a: f64, b: f64, x: &[f64]) -> Vec<HazardStep> {
        let starts: Vec<f64> = self.piece_starts(a, b).collect();
        starts
            .iter()
            .enumerate()
            .map(|(i, &s)| HazardStep {
                start: s,
                end: starts.get(i + 1).copied().unwrap_or(b),
                hazard: self.hazard(s, x),
            })
            .collect()
    }

    /// Exact `∫_a^b λ̂(u, x) du`; zero for an empty interval.
    pub fn integrate(&self, a: f64, b: f64, x: &[f64]) -> f64 {
        if !(a < b) {
            return 0.0;
        }
        let mut total = 0.0;
        let mut starts = self.piece_starts(a, b).peekable();
        while let Some(s) = starts.next() {
            let e = starts.peek().copied().unwrap_or(b);
            total += self.hazard(s, x) * (e - s);
        }
        total
    }

    /// Log-hazard just before `t_end`, i.e. on the epoch's last piece. This
    /// is the intensity the event at `t_end` is charged against.
    fn log_hazard_at_event(&self, epoch: &Epoch) -> f64 {
        let idx = self
            .time_split_points
            .partition_point(|&p| p < epoch.t_end);
        let last_start = match idx.checked_sub(1).map(|i| self.time_split_points[i]) {
            Some(p) if p > epoch.t_start => p,
            _ => epoch.t_start,
        };
        self.log_hazard(last_start, &epoch.covariates)
    }

    fn epoch_nll(&self, epoch: &Epoch) -> f64 {
        let mut nll = self.integrate(epoch.t_start, epoch.t_end, &epoch.covariates);
        if epoch.delta {
            nll -= self.log_hazard_at_event(epoch);
        }
        nll
    }

    pub fn episode_nll(&self, episode: &Episode) -> f64 {
        episode.epochs.iter().map(|e| self.epoch_nll(e)).sum()
    }

    /// `∫_{monitoring_start}^{t} λ̂(u, X(u)) du` along the episode. Gaps
    /// contribute nothing.
    pub fn cumulative_hazard(&self, episode: &Episode, t: f64) -> Result<f64> {
        let lo = self.schema.monitoring_start;
        let hi = episode.end();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        let mut total = 0.0;
        for epoch in &episode.epochs {
            if epoch.t_start >= t {
                break;
            }
            total += self.integrate(epoch.t_start.max(lo), epoch.t_end.min(t), &epoch.covariates);
        }
        Ok(total)
    }

    /// Piecewise-constant hazard along the episode, split at epoch
    /// boundaries and at the model's time thresholds.
    pub fn hazard_path(&self, episode: &Episode) -> Vec<HazardStep> {
        episode
            .epochs
            .iter()
            .flat_map(|e| self.steps(e.t_start, e.t_end, &e.covariates))
            .collect()
    }
}

/// Counting-process negative log-likelihood
/// `Σ_epochs [∫ λ̂ du − δ · log λ̂(t_end⁻)]`.
pub fn neg_log_likelihood(model: &HazardEnsemble, episodes: &[Episode]) -> f64 {
    let per_episode: Vec<f64> = episodes.par_iter().map(|e| model.episode_nll(e)).collect();
    per_episode.iter().sum()
}

/// `Ŝ(t) = exp(−∫_{monitoring_start}^{t} λ̂(u, X(u)) du)`.
pub fn survival(model: &HazardEnsemble, episode: &Episode, t: f64) -> Result<f64> {
    Ok((-model.cumulative_hazard(episode, t)?).exp())
}

/// Summed split gain per feature (time first, named `t`), normalized by the
/// largest sum. All zeros when the model has no splits.
pub fn variable_importance(model: &HazardEnsemble) -> Vec<FeatureImportance> {
    let mut totals = vec![0.0; model.schema.width() + 1];
    for tree in &model.trees {
        tree.for_each_split(&mut |feature, _, gain| totals[feature] += gain);
    }
    let max = totals.iter().copied().fold(0.0, f64::max);
    let names = std::iter::once("t").chain(model.schema.feature_names.iter().map(String::as_str));
    names
        .zip(totals)
        .map(|(name, total)| FeatureImportance {
            name: name.to_string(),
            importance: if max > 0.0 { total / max } else { 0.0 },
        })
        .collect()
}
