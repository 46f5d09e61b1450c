//! Carry-forward fusion of timestamped embedding vectors into episodes.
//!
//! Each epoch's embedding block holds the latest vector stamped at or
//! before the epoch start. Epochs are split at every note timestamp so the
//! block stays constant within an epoch. A note never expires; it persists
//! until the next one replaces it.

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSchema, Episode, MISSING};
use crate::error::{Error, Result};
use crate::ingest::split_at_times;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub timestamp: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStream {
    pub episode_id: String,
    pub entries: Vec<EmbeddingEntry>,
}

impl EmbeddingStream {
    /// Builds a stream, checking that timestamps strictly increase and that
    /// every vector has the same non-zero width.
    pub fn new(episode_id: impl Into<String>, entries: Vec<EmbeddingEntry>) -> Result<Self> {
        let stream = Self {
            episode_id: episode_id.into(),
            entries,
        };
        stream.check()?;
        Ok(stream)
    }

    pub fn empty(episode_id: impl Into<String>) -> Self {
        Self {
            episode_id: episode_id.into(),
            entries: Vec::new(),
        }
    }

    fn check(&self) -> Result<()> {
        if self
            .entries
            .windows(2)
            .any(|w| !(w[0].timestamp < w[1].timestamp))
        {
            return Err(Error::Unsorted(format!(
                "embedding timestamps for episode {} must strictly increase",
                self.episode_id
            )));
        }
        if let Some(first) = self.entries.first() {
            let n = first.vector.len();
            if n == 0 || self.entries.iter().any(|e| e.vector.len() != n) {
                return Err(Error::SchemaMismatch(format!(
                    "embedding vectors for episode {} have inconsistent widths",
                    self.episode_id
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> Option<usize> {
        self.entries.first().map(|e| e.vector.len())
    }

    /// Latest vector stamped at or before `t`.
    pub fn latest_at(&self, t: f64) -> Option<&[f64]> {
        let idx = self.entries.partition_point(|e| e.timestamp <= t);
        idx.checked_sub(1).map(|i| self.entries[i].vector.as_slice())
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.timestamp).collect()
    }
}

/// Fills the schema's embedding block of every epoch from `stream`.
///
/// Non-embedding columns and total exposure are preserved exactly.
pub fn fuse_embeddings(
    episode: &Episode,
    stream: &EmbeddingStream,
    schema: &DatasetSchema,
) -> Result<Episode> {
    if stream.episode_id != episode.episode_id {
        return Err(Error::SchemaMismatch(format!(
            "embedding stream for episode {} applied to episode {}",
            stream.episode_id, episode.episode_id
        )));
    }
    let block = schema.embedding_block().ok_or_else(|| {
        Error::SchemaMismatch("schema has no embedding block".into())
    })?;
    if let Some(n) = stream.width() {
        if n != block.len() {
            return Err(Error::SchemaMismatch(format!(
                "embedding width {n} does not match schema block of {}",
                block.len()
            )));
        }
    }
    if let Some(bad) = episode
        .epochs
        .iter()
        .find(|e| e.covariates.len() != schema.width())
    {
        return Err(Error::SchemaMismatch(format!(
            "epoch at {} has {} covariates, schema expects {}",
            bad.t_start,
            bad.covariates.len(),
            schema.width()
        )));
    }

    let mut epochs = split_at_times(&episode.epochs, &stream.timestamps());
    for epoch in &mut epochs {
        let slot = &mut epoch.covariates[block.clone()];
        match stream.latest_at(epoch.t_start) {
            Some(v) => slot.copy_from_slice(v),
            None => slot.fill(MISSING),
        }
    }
    Ok(Episode {
        episode_id: episode.episode_id.clone(),
        subject_id: episode.subject_id.clone(),
        epochs,
        censored_admin: episode.censored_admin,
    })
}

/// Fuses every episode with its stream (if any). Episodes whose width lacks
/// the embedding block get it appended as missing first, so `base` may be
/// either the tabular schema or the fused schema.
pub fn fuse_cohort(
    episodes: &[Episode],
    streams: &[EmbeddingStream],
    base: &DatasetSchema,
    width: usize,
) -> Result<(Vec<Episode>, DatasetSchema)> {
    let needs_block = base.embedding_block().is_none();
    let schema = if needs_block {
        base.with_embedding_block(width)
    } else {
        base.clone()
    };
    let by_id: std::collections::HashMap<&str, &EmbeddingStream> =
        streams.iter().map(|s| (s.episode_id.as_str(), s)).collect();
    let mut fused = Vec::with_capacity(episodes.len());
    for episode in episodes {
        let mut ep = episode.clone();
        if needs_block {
            ep.extend_missing(width);
        }
        let empty = EmbeddingStream::empty(ep.episode_id.clone());
        let stream = by_id.get(ep.episode_id.as_str()).copied().unwrap_or(&empty);
        fused.push(fuse_embeddings(&ep, stream, &schema)?);
    }
    Ok((fused, schema))
}
