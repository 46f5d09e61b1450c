use serde::{Deserialize, Serialize};

use crate::boost::{HazardEnsemble, HazardStep};
use crate::data::Episode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    TP,
    FP,
    FN,
    TN,
}

/// Hazard trajectory of one monitored episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringTrace {
    pub episode_id: String,
    pub hazard_path: Vec<HazardStep>,
    pub first_event_time: Option<f64>,
    pub monitored_until: f64,
}

impl MonitoringTrace {
    pub fn new(
        episode_id: impl Into<String>,
        hazard_path: Vec<HazardStep>,
        first_event_time: Option<f64>,
    ) -> Result<Self> {
        let episode_id = episode_id.into();
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("trace {episode_id}: {msg}")));
        if hazard_path.is_empty() {
            return bad("empty hazard path");
        }
        if hazard_path
            .iter()
            .any(|s| !(s.start < s.end) || !(s.hazard >= 0.0))
        {
            return bad("steps must have start < end and non-negative hazard");
        }
        if hazard_path.windows(2).any(|w| w[0].end > w[1].start) {
            return bad("steps must be ordered and non-overlapping");
        }
        let start = hazard_path[0].start;
        let monitored_until = hazard_path[hazard_path.len() - 1].end;
        if let Some(t) = first_event_time {
            if !(t > start && t <= monitored_until) {
                return bad("first event outside the monitored range");
            }
        }
        Ok(Self {
            episode_id,
            hazard_path,
            first_event_time,
            monitored_until,
        })
    }

    /// Scores an episode with a fitted model.
    pub fn from_model(model: &HazardEnsemble, episode: &Episode) -> Result<Self> {
        Self::new(
            episode.episode_id.clone(),
            model.hazard_path(episode),
            episode.first_event_time(),
        )
    }

    pub fn start(&self) -> f64 {
        self.hazard_path[0].start
    }

    pub fn label(&self) -> Label {
        if self.first_event_time.is_some() {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Steps during which a flag still counts as made in time.
    pub(crate) fn flaggable_steps(&self) -> impl Iterator<Item = &HazardStep> {
        let cutoff = self.first_event_time.unwrap_or(f64::INFINITY);
        self.hazard_path.iter().take_while(move |s| s.start < cutoff)
    }

    /// First instant the hazard reaches `rho` while a flag still counts.
    pub fn flag_time(&self, rho: f64) -> Option<f64> {
        self.flaggable_steps()
            .find(|s| s.hazard >= rho)
            .map(|s| s.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub score: f64,
    pub label: Label,
}

/// Largest hazard over the flaggable part of the trace. An episode whose
/// event precedes every step can never be flagged in time and scores −∞.
pub fn episode_score(trace: &MonitoringTrace) -> EpisodeScore {
    let score = trace
        .flaggable_steps()
        .map(|s| s.hazard)
        .fold(f64::NEG_INFINITY, f64::max);
    if score == f64::NEG_INFINITY {
        log::warn!(
            "episode {}: event at the first monitored instant, cannot be flagged in time",
            trace.episode_id
        );
    }
    EpisodeScore {
        score,
        label: trace.label(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagOutcome {
    pub episode_id: String,
    pub score: f64,
    pub label: Label,
    pub flag_time: Option<f64>,
    pub outcome: Outcome,
}

fn classify(flagged: bool, label: Label) -> Outcome {
    match (flagged, label) {
        (true, Label::Positive) => Outcome::TP,
        (true, Label::Negative) => Outcome::FP,
        (false, Label::Positive) => Outcome::FN,
        (false, Label::Negative) => Outcome::TN,
    }
}

pub fn flag_outcome(trace: &MonitoringTrace, rho: f64) -> FlagOutcome {
    let EpisodeScore { score, label } = episode_score(trace);
    let flag_time = trace.flag_time(rho);
    debug_assert_eq!(flag_time.is_some(), score >= rho);
    FlagOutcome {
        episode_id: trace.episode_id.clone(),
        score,
        label,
        flag_time,
        outcome: classify(flag_time.is_some(), label),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::TP => self.tp += 1,
            Outcome::FP => self.fp += 1,
            Outcome::FN => self.fn_ += 1,
            Outcome::TN => self.tn += 1,
        }
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Confusion matrix from scores alone: flagged iff `score >= rho`.
pub fn confusion_at(scores: &[EpisodeScore], rho: f64) -> Confusion {
    let mut c = Confusion::default();
    for s in scores {
        c.add(classify(s.score >= rho, s.label));
    }
    c
}
