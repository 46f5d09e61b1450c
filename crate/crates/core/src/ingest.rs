//! Turning raw timestamped observations into model-ready episodes.

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSchema, Episode, Epoch, FeatureKind, MISSING};
use crate::error::{Error, Result};

pub const PRIOR_EVENT_COUNT: &str = "prior_event_count";
pub const TIME_SINCE_LAST_EVENT: &str = "time_since_last_event";
pub const DEFAULT_GRID_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Missing,
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    pub timestamp: f64,
    pub feature: String,
    pub value: RawValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawObservationStream {
    pub episode_id: String,
    pub subject_id: String,
    pub entries: Vec<RawObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RawFeature {
    Numeric { name: String },
    Categorical { name: String, categories: Vec<String> },
}

impl RawFeature {
    pub fn name(&self) -> &str {
        match self {
            RawFeature::Numeric { name } | RawFeature::Categorical { name, .. } => name,
        }
    }
}

fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

fn default_monitoring_start() -> f64 {
    crate::data::DEFAULT_MONITORING_START
}

/// Raw feature inventory plus the discretization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestPlan {
    pub features: Vec<RawFeature>,
    #[serde(default = "default_monitoring_start")]
    pub monitoring_start: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

impl IngestPlan {
    pub fn feature(&self, name: &str) -> Option<&RawFeature> {
        self.features.iter().find(|f| f.name() == name)
    }

    /// Schema of the discretized output. Categorical features expand to one
    /// indicator column per category, named `feature=category`.
    pub fn schema(&self) -> DatasetSchema {
        let mut schema = DatasetSchema::new(self.monitoring_start);
        for feature in &self.features {
            match feature {
                RawFeature::Numeric { name } => schema.push(name.clone(), FeatureKind::Numeric),
                RawFeature::Categorical { name, categories } => {
                    for c in categories {
                        schema.push(format!("{name}={c}"), FeatureKind::OneHot);
                    }
                }
            }
        }
        schema
    }
}

/// One indicator per category. Missing input gives all-missing indicators;
/// a category not seen at training time gives all zeros.
pub fn one_hot_expand(value: Option<&str>, categories: &[String]) -> Vec<f64> {
    match value {
        None => vec![MISSING; categories.len()],
        Some(v) => categories
            .iter()
            .map(|c| if c == v { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Discretizes a raw stream onto a regular grid starting at
/// `monitoring_start`, carrying each feature's last observation forward.
///
/// The grid extends until the epoch that contains the last observation.
/// Observations made before `monitoring_start` still seed the first epoch.
pub fn locf_discretize(
    raw: &RawObservationStream,
    plan: &IngestPlan,
    grid: f64,
    monitoring_start: f64,
) -> Result<Episode> {
    if !(grid > 0.0 && grid.is_finite()) {
        return Err(Error::InvalidConfig(format!("grid step must be > 0, got {grid}")));
    }
    let last = match raw.entries.last() {
        Some(entry) => entry.timestamp,
        None => return Err(Error::EmptyStream(raw.episode_id.clone())),
    };
    if raw
        .entries
        .windows(2)
        .any(|w| !(w[0].timestamp <= w[1].timestamp))
    {
        return Err(Error::Unsorted(format!(
            "raw observations for episode {}",
            raw.episode_id
        )));
    }
    let mut feature_index = Vec::with_capacity(raw.entries.len());
    for entry in &raw.entries {
        let idx = plan
            .features
            .iter()
            .position(|f| f.name() == entry.feature)
            .ok_or_else(|| Error::UnknownFeature(entry.feature.clone()))?;
        feature_index.push(idx);
    }

    let n_epochs = if last >= monitoring_start {
        ((last - monitoring_start) / grid + 1e-9).floor() as usize + 1
    } else {
        1
    };

    let mut current: Vec<Option<&RawValue>> = vec![None; plan.features.len()];
    let mut cursor = 0;
    let mut epochs = Vec::with_capacity(n_epochs);
    for k in 0..n_epochs {
        let t_start = monitoring_start + k as f64 * grid;
        let t_end = monitoring_start + (k + 1) as f64 * grid;
        while cursor < raw.entries.len() && raw.entries[cursor].timestamp <= t_start {
            let entry = &raw.entries[cursor];
            if entry.value != RawValue::Missing {
                current[feature_index[cursor]] = Some(&entry.value);
            }
            cursor += 1;
        }
        let mut covariates = Vec::new();
        for (feature, value) in plan.features.iter().zip(&current) {
            match feature {
                RawFeature::Numeric { name } => covariates.push(match value {
                    None => MISSING,
                    Some(RawValue::Number(x)) => *x,
                    Some(other) => {
                        return Err(Error::Parse(format!(
                            "numeric feature `{name}` got {other:?}"
                        )))
                    }
                }),
                RawFeature::Categorical { categories, .. } => {
                    let label = match value {
                        None | Some(RawValue::Missing) => None,
                        Some(RawValue::Label(s)) => Some(s.clone()),
                        Some(RawValue::Number(x)) => Some(x.to_string()),
                    };
                    covariates.extend(one_hot_expand(label.as_deref(), categories));
                }
            }
        }
        epochs.push(Epoch::new(t_start, t_end, covariates, false));
    }
    let mut episode = Episode::new(raw.episode_id.clone(), raw.subject_id.clone(), epochs);
    episode.censored_admin = true;
    Ok(episode)
}

/// Splits every epoch at the interior points of `times` (sorted).
pub(crate) fn split_at_times(epochs: &[Epoch], times: &[f64]) -> Vec<Epoch> {
    let mut out = Vec::with_capacity(epochs.len() + times.len());
    for epoch in epochs {
        let lo = times.partition_point(|&t| t <= epoch.t_start);
        let mut rest = epoch.clone();
        for &t in &times[lo..] {
            if t >= epoch.t_end {
                break;
            }
            if t > rest.t_start {
                let (left, right) = rest.split_at(t);
                out.push(left);
                rest = right;
            }
        }
        out.push(rest);
    }
    out
}

/// Splits epochs at `event_times` and sets `delta` on every epoch that ends
/// at one of them. Events before the episode or inside a gap cannot be
/// attached and are skipped.
pub fn attach_events(episode: &Episode, event_times: &[f64]) -> Episode {
    let mut epochs = split_at_times(&episode.epochs, event_times);
    let mut attached = 0;
    for epoch in &mut epochs {
        if event_times.binary_search_by(|t| t.total_cmp(&epoch.t_end)).is_ok() {
            if !epoch.delta {
                attached += 1;
            }
            epoch.delta = true;
        }
    }
    let inside = event_times
        .iter()
        .filter(|&&t| t > episode.start() && t <= episode.end())
        .count();
    if attached < inside {
        log::warn!(
            "episode {}: {} event(s) fall in monitoring gaps and were not attached",
            episode.episode_id,
            inside - attached
        );
    }
    let mut out = Episode::new(episode.episode_id.clone(), episode.subject_id.clone(), epochs);
    out.censored_admin = episode.censored_admin && !out.epochs.last().is_some_and(|e| e.delta);
    out
}

/// Appends `prior_event_count` and `time_since_last_event`, evaluated at
/// each epoch's start. Epochs are first split at every event time so both
/// features are constant within an epoch. Exposure is unchanged.
pub fn add_recurrence_features(episode: &Episode, event_times: &[f64]) -> Episode {
    let mut epochs = split_at_times(&episode.epochs, event_times);
    for epoch in &mut epochs {
        let count = event_times.partition_point(|&e| e <= epoch.t_start);
        let since = if count == 0 {
            MISSING
        } else {
            epoch.t_start - event_times[count - 1]
        };
        epoch.covariates.push(count as f64);
        epoch.covariates.push(since);
    }
    Episode {
        episode_id: episode.episode_id.clone(),
        subject_id: episode.subject_id.clone(),
        epochs,
        censored_admin: episode.censored_admin,
    }
}

pub fn with_recurrence_features(schema: &DatasetSchema) -> DatasetSchema {
    let mut schema = schema.clone();
    schema.push(PRIOR_EVENT_COUNT, FeatureKind::Recurrence);
    schema.push(TIME_SINCE_LAST_EVENT, FeatureKind::Recurrence);
    schema
}
