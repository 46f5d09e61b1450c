//! Realtime scoring of an epoch stream.
//!
//! Each incoming epoch is answered at once with the constant-hazard pieces
//! it covers. Embedding vectors arrive on a side channel and apply from
//! their timestamp onward to every epoch scored after they arrive. When
//! the notes for an interval arrive before its epoch, the output is
//! bit-identical to fusing the whole episode and calling
//! [`HazardEnsemble::hazard_path`].

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::boost::HazardEnsemble;
use crate::data::{DatasetSchema, Episode, Epoch, MISSING};
use crate::error::{Error, Result};
use crate::fusion::{fuse_cohort, EmbeddingEntry, EmbeddingStream};
use crate::io::format_value;

pub const OUTPUT_HEADER: [&str; 5] = ["episode_id", "t_start", "t_end", "hazard", "status"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub episode_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub hazard: f64,
    pub status: RowStatus,
}

impl MonitorRow {
    fn error(episode_id: &str, t_start: f64, t_end: f64, message: String) -> Self {
        Self {
            episode_id: episode_id.to_string(),
            t_start,
            t_end,
            hazard: MISSING,
            status: RowStatus::Error(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    pub fn write_csv<W: Write>(&self, out: &mut csv::Writer<W>) -> Result<()> {
        let status = match &self.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Error(m) => format!("error: {m}"),
        };
        out.write_record([
            self.episode_id.as_str(),
            &format_value(self.t_start),
            &format_value(self.t_end),
            &format_value(self.hazard),
            &status,
        ])?;
        Ok(())
    }
}

/// How input rows map onto the model's covariate vector.
#[derive(Debug, Clone, PartialEq)]
enum Alignment {
    /// Input already has the model's columns.
    Direct,
    /// Input lacks the embedding block; it is filled from the side channel.
    SideChannel(Range<usize>),
}

fn alignment(model: &DatasetSchema, input: &DatasetSchema) -> Result<Alignment> {
    if input.feature_names == model.feature_names {
        return Ok(Alignment::Direct);
    }
    if let Some(block) = model.embedding_block() {
        if input.feature_names == model.without_embedding_block().feature_names {
            return Ok(Alignment::SideChannel(block));
        }
    }
    Err(Error::SchemaMismatch(format!(
        "input columns {:?} match neither the model schema {:?} nor it without embeddings",
        input.feature_names, model.feature_names
    )))
}

#[derive(Default)]
struct EpisodeState {
    notes: Vec<EmbeddingEntry>,
    last_end: Option<f64>,
    halted: Option<String>,
}

pub struct StreamingMonitor<'m> {
    model: &'m HazardEnsemble,
    alignment: Alignment,
    input_width: usize,
    episodes: HashMap<String, EpisodeState>,
}

impl<'m> StreamingMonitor<'m> {
    pub fn new(model: &'m HazardEnsemble, input_schema: &DatasetSchema) -> Result<Self> {
        Ok(Self {
            model,
            alignment: alignment(model.schema(), input_schema)?,
            input_width: input_schema.width(),
            episodes: HashMap::new(),
        })
    }

    /// Registers a note vector. Notes of one episode must arrive in
    /// strictly increasing time order.
    pub fn push_embedding(&mut self, episode_id: &str, entry: EmbeddingEntry) -> Result<()> {
        let Alignment::SideChannel(block) = &self.alignment else {
            return Err(Error::SchemaMismatch(
                "input rows already carry embeddings; no side channel".into(),
            ));
        };
        if entry.vector.len() != block.len() {
            return Err(Error::SchemaMismatch(format!(
                "episode {episode_id}: embedding width {} but model expects {}",
                entry.vector.len(),
                block.len()
            )));
        }
        let state = self.episodes.entry(episode_id.to_string()).or_default();
        if state
            .notes
            .last()
            .is_some_and(|n| !(n.timestamp < entry.timestamp))
        {
            return Err(Error::Unsorted(format!(
                "episode {episode_id}: note at {} is not after the previous note",
                entry.timestamp
            )));
        }
        state.notes.push(entry);
        Ok(())
    }

    pub fn push_stream(&mut self, stream: &EmbeddingStream) -> Result<()> {
        for entry in &stream.entries {
            self.push_embedding(&stream.episode_id, entry.clone())?;
        }
        Ok(())
    }

    /// Reports an input row that could not be parsed. Later rows of the
    /// same episode are answered with errors too.
    pub fn push_error(&mut self, episode_id: Option<&str>, error: &Error) -> MonitorRow {
        let id = episode_id.unwrap_or("");
        let message = format!("{}: {error}", error.kind());
        if let Some(id) = episode_id {
            self.episodes.entry(id.to_string()).or_default().halted = Some(message.clone());
        }
        MonitorRow::error(id, MISSING, MISSING, message)
    }

    /// Scores one epoch, returning its constant-hazard pieces in time order.
    pub fn push_epoch(&mut self, episode_id: &str, epoch: &Epoch) -> Vec<MonitorRow> {
        let state = self.episodes.entry(episode_id.to_string()).or_default();
        let (a, b) = (epoch.t_start, epoch.t_end);
        if let Some(reason) = &state.halted {
            return vec![MonitorRow::error(
                episode_id,
                a,
                b,
                format!("episode halted after earlier error ({reason})"),
            )];
        }
        let problem = if epoch.covariates.len() != self.input_width {
            Some(format!(
                "SchemaMismatch: row has {} covariates, expected {}",
                epoch.covariates.len(),
                self.input_width
            ))
        } else if !(a.is_finite() && b.is_finite() && a < b) {
            Some(format!("InvalidEpoch: interval [{a}, {b}) is empty or not finite"))
        } else if state.last_end.is_some_and(|end| a < end) {
            Some(format!("Unsorted: epoch starts at {a} before the previous one ends"))
        } else {
            None
        };
        if let Some(message) = problem {
            state.halted = Some(message.clone());
            return vec![MonitorRow::error(episode_id, a, b, message)];
        }
        state.last_end = Some(b);

        let mut out = Vec::new();
        let mut emit = |pa: f64, pb: f64, x: &[f64]| {
            for step in self.model.steps(pa, pb, x) {
                out.push(MonitorRow {
                    episode_id: episode_id.to_string(),
                    t_start: step.start,
                    t_end: step.end,
                    hazard: step.hazard,
                    status: RowStatus::Ok,
                });
            }
        };
        match &self.alignment {
            Alignment::Direct => emit(a, b, &epoch.covariates),
            Alignment::SideChannel(block) => {
                let notes = &state.notes;
                let mut cuts = vec![a];
                cuts.extend(
                    notes
                        .iter()
                        .map(|n| n.timestamp)
                        .filter(|&t| t > a && t < b),
                );
                for (k, &pa) in cuts.iter().enumerate() {
                    let pb = cuts.get(k + 1).copied().unwrap_or(b);
                    let latest = notes.partition_point(|n| n.timestamp <= pa);
                    let mut x = Vec::with_capacity(epoch.covariates.len() + block.len());
                    x.extend_from_slice(&epoch.covariates[..block.start]);
                    match latest.checked_sub(1) {
                        Some(i) => x.extend_from_slice(&notes[i].vector),
                        None => x.extend(std::iter::repeat_n(MISSING, block.len())),
                    }
                    x.extend_from_slice(&epoch.covariates[block.start..]);
                    emit(pa, pb, &x);
                }
            }
        }
        out
    }
}

/// Scores one fully fused episode.
pub fn score_episode(model: &HazardEnsemble, episode: &Episode) -> Vec<MonitorRow> {
    model
        .hazard_path(episode)
        .into_iter()
        .map(|s| MonitorRow {
            episode_id: episode.episode_id.clone(),
            t_start: s.start,
            t_end: s.end,
            hazard: s.hazard,
            status: RowStatus::Ok,
        })
        .collect()
}

/// Lines `episodes` (described by `input_schema`) up with the model's
/// columns, fusing `streams` in when the input lacks the embedding block.
pub fn align_to_model(
    model: &HazardEnsemble,
    input_schema: &DatasetSchema,
    episodes: &[Episode],
    streams: &[EmbeddingStream],
) -> Result<Vec<Episode>> {
    match alignment(model.schema(), input_schema)? {
        Alignment::Direct => Ok(episodes.to_vec()),
        Alignment::SideChannel(block) => {
            let (fused, schema) = fuse_cohort(episodes, streams, input_schema, block.len())?;
            if schema.feature_names != model.schema().feature_names {
                return Err(Error::SchemaMismatch(
                    "fused columns do not line up with the model".into(),
                ));
            }
            Ok(fused)
        }
    }
}

/// Batch counterpart of [`StreamingMonitor`]: fuses the embeddings (when
/// the input lacks them) and scores every episode.
pub fn score_batch(
    model: &HazardEnsemble,
    input_schema: &DatasetSchema,
    episodes: &[Episode],
    streams: &[EmbeddingStream],
) -> Result<Vec<MonitorRow>> {
    let fused = align_to_model(model, input_schema, episodes, streams)?;
    Ok(fused.iter().flat_map(|e| score_episode(model, e)).collect())
}
