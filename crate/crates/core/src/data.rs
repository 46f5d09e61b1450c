//! Long-format recurrent-event data: epochs, episodes and the dataset schema.
//!
//! Times are hours as `f64`. An epoch covers the half-open interval
//! `[t_start, t_end)` with constant covariates; `delta` marks an event at
//! `t_end`. Missing covariate values are stored as `NaN` and are never
//! replaced by a number behind the caller's back.
//!
//! Episodes may contain gaps (`epochs[k].t_end < epochs[k + 1].t_start`).
//! Gap time is unmonitored: it contributes neither exposure nor hazard.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker stored in a covariate slot with no observed value.
pub const MISSING: f64 = f64::NAN;

pub const DEFAULT_MONITORING_START: f64 = 24.0;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub t_start: f64,
    pub t_end: f64,
    pub covariates: Vec<f64>,
    pub delta: bool,
}

impl Epoch {
    pub fn new(t_start: f64, t_end: f64, covariates: Vec<f64>, delta: bool) -> Self {
        Self {
            t_start,
            t_end,
            covariates,
            delta,
        }
    }

    #[inline]
    pub fn exposure(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Splits the epoch at `t` (strictly interior). The event, if any, stays
    /// with the right piece.
    pub fn split_at(&self, t: f64) -> (Epoch, Epoch) {
        debug_assert!(self.t_start < t && t < self.t_end);
        let left = Epoch::new(self.t_start, t, self.covariates.clone(), false);
        let right = Epoch::new(t, self.t_end, self.covariates.clone(), self.delta);
        (left, right)
    }

    /// Same-value comparison that treats two missing slots as equal.
    pub fn same_values(&self, other: &Epoch) -> bool {
        self.t_start.to_bits() == other.t_start.to_bits()
            && self.t_end.to_bits() == other.t_end.to_bits()
            && self.delta == other.delta
            && self.covariates.len() == other.covariates.len()
            && self
                .covariates
                .iter()
                .zip(&other.covariates)
                .all(|(a, b)| (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub subject_id: String,
    pub epochs: Vec<Epoch>,
    /// Monitoring ended for a reason unrelated to the event (discharge,
    /// transfer, a procedure that removes the subject from the risk set).
    pub censored_admin: bool,
}

impl Episode {
    pub fn new(
        episode_id: impl Into<String>,
        subject_id: impl Into<String>,
        epochs: Vec<Epoch>,
    ) -> Self {
        let epochs_end_in_event = epochs.last().is_some_and(|e| e.delta);
        Self {
            episode_id: episode_id.into(),
            subject_id: subject_id.into(),
            epochs,
            censored_admin: !epochs_end_in_event,
        }
    }

    pub fn exposure(&self) -> f64 {
        self.epochs.iter().map(Epoch::exposure).sum()
    }

    pub fn event_count(&self) -> usize {
        self.epochs.iter().filter(|e| e.delta).count()
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .filter(|e| e.delta)
            .map(|e| e.t_end)
            .collect()
    }

    pub fn first_event_time(&self) -> Option<f64> {
        self.epochs.iter().find(|e| e.delta).map(|e| e.t_end)
    }

    pub fn start(&self) -> f64 {
        self.epochs.first().map_or(f64::NAN, |e| e.t_start)
    }

    pub fn end(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.t_end)
    }

    pub fn width(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.covariates.len())
    }

    /// Covariates in effect at time `t`, or `None` when `t` falls in a gap
    /// or outside the episode.
    pub fn covariates_at(&self, t: f64) -> Option<&[f64]> {
        let idx = self.epochs.partition_point(|e| e.t_end <= t);
        self.epochs
            .get(idx)
            .filter(|e| e.t_start <= t)
            .map(|e| e.covariates.as_slice())
    }

    /// Appends `n` missing columns to every epoch.
    pub fn extend_missing(&mut self, n: usize) {
        for epoch in &mut self.epochs {
            epoch.covariates.extend(std::iter::repeat_n(MISSING, n));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    OneHot,
    Embedding,
    Recurrence,
}

fn default_monitoring_start() -> f64 {
    DEFAULT_MONITORING_START
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    #[serde(default = "default_monitoring_start")]
    pub monitoring_start: f64,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        Self {
            feature_names: Vec::new(),
            feature_kinds: Vec::new(),
            monitoring_start: DEFAULT_MONITORING_START,
        }
    }
}

pub fn embedding_name(k: usize) -> String {
    format!("emb{k}")
}

impl DatasetSchema {
    pub fn new(monitoring_start: f64) -> Self {
        Self {
            monitoring_start,
            ..Self::default()
        }
    }

    /// Numeric-only schema with the given feature names.
    pub fn numeric<S: AsRef<str>>(names: &[S], monitoring_start: f64) -> Self {
        let mut schema = Self::new(monitoring_start);
        for name in names {
            schema.push(name.as_ref(), FeatureKind::Numeric);
        }
        schema
    }

    pub fn push(&mut self, name: impl Into<String>, kind: FeatureKind) {
        self.feature_names.push(name.into());
        self.feature_kinds.push(kind);
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Column range of the `emb0..emb{n-1}` block, if the schema has one.
    pub fn embedding_block(&self) -> Option<Range<usize>> {
        let start = self
            .feature_kinds
            .iter()
            .position(|k| *k == FeatureKind::Embedding)?;
        let len = self.feature_kinds[start..]
            .iter()
            .take_while(|k| **k == FeatureKind::Embedding)
            .count();
        Some(start..start + len)
    }

    /// Returns a copy with an `emb0..emb{n-1}` block appended.
    pub fn with_embedding_block(&self, n: usize) -> Self {
        let mut schema = self.clone();
        for k in 0..n {
            schema.push(embedding_name(k), FeatureKind::Embedding);
        }
        schema
    }

    /// Returns a copy without its embedding block.
    pub fn without_embedding_block(&self) -> Self {
        let mut schema = self.clone();
        if let Some(block) = self.embedding_block() {
            schema.feature_names.drain(block.clone());
            schema.feature_kinds.drain(block);
        }
        schema
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_names.len() != self.feature_kinds.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} feature names but {} feature kinds",
                self.feature_names.len(),
                self.feature_kinds.len()
            )));
        }
        if !self.monitoring_start.is_finite() {
            return Err(Error::SchemaMismatch(
                "monitoring_start must be finite".into(),
            ));
        }
        let mut seen = HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate feature name `{name}`"
                )));
            }
        }
        if let Some(block) = self.embedding_block() {
            let total = self
                .feature_kinds
                .iter()
                .filter(|k| **k == FeatureKind::Embedding)
                .count();
            if total != block.len() {
                return Err(Error::SchemaMismatch(
                    "embedding features must form one contiguous block".into(),
                ));
            }
            for (k, idx) in block.enumerate() {
                if self.feature_names[idx] != embedding_name(k) {
                    return Err(Error::SchemaMismatch(format!(
                        "embedding column {} must be named `{}`",
                        idx,
                        embedding_name(k)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoEpochs,
    NonFiniteTime { index: usize },
    EmptyInterval { index: usize },
    Overlap { index: usize },
    BeforeMonitoringStart { index: usize },
    WidthMismatch { index: usize, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoEpochs => write!(f, "episode has no epochs"),
            Violation::NonFiniteTime { index } => write!(f, "epoch {index}: non-finite time"),
            Violation::EmptyInterval { index } => {
                write!(f, "epoch {index}: t_start must be < t_end")
            }
            Violation::Overlap { index } => {
                write!(f, "epoch {index}: overlaps or precedes previous epoch")
            }
            Violation::BeforeMonitoringStart { index } => {
                write!(f, "epoch {index}: starts before monitoring start")
            }
            Violation::WidthMismatch {
                index,
                expected,
                found,
            } => write!(
                f,
                "epoch {index}: {found} covariates, schema expects {expected}"
            ),
        }
    }
}

/// Checks every epoch and episode invariant. An empty result means the
/// episode is well formed; violations are data, not failures.
pub fn validate_episode(episode: &Episode, schema: &DatasetSchema) -> Vec<Violation> {
    let mut violations = Vec::new();
    if episode.epochs.is_empty() {
        violations.push(Violation::NoEpochs);
        return violations;
    }
    let expected = schema.width();
    for (index, epoch) in episode.epochs.iter().enumerate() {
        if !epoch.t_start.is_finite() || !epoch.t_end.is_finite() {
            violations.push(Violation::NonFiniteTime { index });
            continue;
        }
        if epoch.t_start >= epoch.t_end {
            violations.push(Violation::EmptyInterval { index });
        }
        if epoch.t_start < schema.monitoring_start || epoch.t_start < 0.0 {
            violations.push(Violation::BeforeMonitoringStart { index });
        }
        if epoch.covariates.len() != expected {
            violations.push(Violation::WidthMismatch {
                index,
                expected,
                found: epoch.covariates.len(),
            });
        }
        if index > 0 && episode.epochs[index - 1].t_end > epoch.t_start {
            violations.push(Violation::Overlap { index });
        }
    }
    violations
}

/// Validates all episodes, failing on the first one with violations.
pub fn validate_cohort(episodes: &[Episode], schema: &DatasetSchema) -> Result<()> {
    schema.validate()?;
    for episode in episodes {
        let violations = validate_episode(episode, schema);
        if let Some(v) = violations.first() {
            return Err(Error::SchemaMismatch(format!(
                "episode {}: {v}",
                episode.episode_id
            )));
        }
    }
    Ok(())
}

/// Total time at risk in hours, summed over every epoch.
pub fn total_exposure(episodes: &[Episode]) -> f64 {
    episodes.iter().map(Episode::exposure).sum()
}

pub fn event_count(episodes: &[Episode]) -> usize {
    episodes.iter().map(Episode::event_count).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epoch(a: f64, b: f64) -> Epoch {
        Epoch::new(a, b, vec![1.0], false)
    }

    fn schema() -> DatasetSchema {
        DatasetSchema::numeric(&["hr"], 24.0)
    }

    #[test]
    fn well_formed_episode_has_no_violations() {
        let ep = Episode::new("e", "s", vec![epoch(24.0, 26.0), epoch(26.0, 30.0)]);
        assert!(validate_episode(&ep, &schema()).is_empty());
    }

    #[test]
    fn overlap_is_reported_at_second_epoch() {
        let ep = Episode::new("e", "s", vec![epoch(24.0, 26.0), epoch(25.0, 30.0)]);
        assert_eq!(
            validate_episode(&ep, &schema()),
            vec![Violation::Overlap { index: 1 }]
        );
    }

    #[test]
    fn zero_length_interval_is_reported() {
        let ep = Episode::new("e", "s", vec![epoch(26.0, 26.0)]);
        assert_eq!(
            validate_episode(&ep, &schema()),
            vec![Violation::EmptyInterval { index: 0 }]
        );
    }

    #[test]
    fn width_and_monitoring_start_are_checked() {
        let ep = Episode::new(
            "e",
            "s",
            vec![Epoch::new(20.0, 25.0, vec![1.0, 2.0], false)],
        );
        let v = validate_episode(&ep, &schema());
        assert!(v.contains(&Violation::BeforeMonitoringStart { index: 0 }));
        assert!(v.contains(&Violation::WidthMismatch {
            index: 0,
            expected: 1,
            found: 2
        }));
        let empty = Episode::new("e", "s", vec![]);
        assert_eq!(validate_episode(&empty, &schema()), vec![Violation::NoEpochs]);
    }

    #[test]
    fn gaps_are_allowed_and_excluded_from_exposure() {
        let ep = Episode::new("e", "s", vec![epoch(24.0, 26.0), epoch(28.0, 30.0)]);
        assert!(validate_episode(&ep, &schema()).is_empty());
        assert_eq!(ep.exposure(), 4.0);
        assert!(ep.covariates_at(27.0).is_none());
        assert!(ep.covariates_at(28.0).is_some());
    }

    #[test]
    fn exposure_examples() {
        let one = Episode::new("a", "s", vec![epoch(24.0, 30.0)]);
        assert_eq!(total_exposure(std::slice::from_ref(&one)), 6.0);
        let two = Episode::new("b", "s", vec![epoch(24.0, 26.0), epoch(26.0, 30.0)]);
        assert_eq!(total_exposure(&[two]), 6.0);
        let three: Vec<_> = (0..3)
            .map(|i| Episode::new(format!("{i}"), "s", vec![epoch(24.0, 34.0)]))
            .collect();
        assert_eq!(total_exposure(&three), 30.0);
    }

    #[test]
    fn event_count_examples() {
        let none = Episode::new("a", "s", vec![epoch(24.0, 30.0)]);
        assert_eq!(event_count(std::slice::from_ref(&none)), 0);

        let ev = |a, b, d| Epoch::new(a, b, vec![0.0], d);
        let recurrent = Episode::new(
            "b",
            "s",
            vec![ev(24.0, 25.0, true), ev(25.0, 27.0, false), ev(27.0, 28.0, true)],
        );
        assert_eq!(event_count(std::slice::from_ref(&recurrent)), 2);

        // Five-episode fixture, tallied by hand: 0 + 2 + 1 + 0 + 3 = 6.
        let cohort = vec![
            Episode::new("1", "a", vec![ev(24.0, 30.0, false)]),
            recurrent,
            Episode::new("3", "b", vec![ev(24.0, 26.0, false), ev(26.0, 29.0, true)]),
            Episode::new("4", "c", vec![ev(24.0, 25.0, false), ev(25.5, 28.0, false)]),
            Episode::new(
                "5",
                "c",
                vec![ev(24.0, 24.5, true), ev(24.5, 25.0, true), ev(25.0, 40.0, true)],
            ),
        ];
        assert_eq!(event_count(&cohort), 6);
    }

    #[test]
    fn schema_validation_rules() {
        let mut s = DatasetSchema::numeric(&["a", "b"], 24.0).with_embedding_block(2);
        assert!(s.validate().is_ok());
        assert_eq!(s.embedding_block(), Some(2..4));
        assert_eq!(s.without_embedding_block().width(), 2);

        s.feature_names[3] = "emb7".into();
        assert!(s.validate().is_err());

        let dup = DatasetSchema::numeric(&["a", "a"], 24.0);
        assert!(dup.validate().is_err());

        let mut split = DatasetSchema::numeric(&["a"], 24.0).with_embedding_block(1);
        split.push("b", FeatureKind::Numeric);
        split.push("emb1", FeatureKind::Embedding);
        assert!(split.validate().is_err());
    }

    #[test]
    fn split_keeps_event_on_right_piece() {
        let e = Epoch::new(24.0, 30.0, vec![1.0], true);
        let (l, r) = e.split_at(27.0);
        assert!(!l.delta && r.delta);
        assert_eq!(l.exposure() + r.exposure(), e.exposure());
    }
}
