//! File formats: long-format epoch CSV, schema JSON sidecar, embedding
//! JSONL and raw observation CSV.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every finite value bit for bit. Missing
//! values are empty fields.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSchema, Episode, Epoch, MISSING};
use crate::error::{Error, Result};
use crate::fusion::{EmbeddingEntry, EmbeddingStream};
use crate::ingest::{IngestPlan, RawFeature, RawObservation, RawObservationStream, RawValue};

pub const LONG_CSV_FIXED: [&str; 5] = ["subject_id", "episode_id", "t_start", "t_end", "delta"];
pub const RAW_CSV_HEADER: [&str; 5] = ["subject_id", "episode_id", "timestamp", "feature", "value"];

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_value(field: &str, what: &str) -> Result<f64> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(MISSING);
    }
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: `{field}` is not a number")))
}

fn parse_time(field: &str, what: &str) -> Result<f64> {
    let v = parse_value(field, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse(format!("{what}: time must be finite, got `{field}`")))
    }
}

fn parse_delta(field: &str) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse(format!("delta must be 0 or 1, got `{other}`"))),
    }
}

pub fn long_csv_header(schema: &DatasetSchema) -> Vec<String> {
    LONG_CSV_FIXED
        .iter()
        .map(|s| s.to_string())
        .chain(schema.feature_names.iter().cloned())
        .collect()
}

fn check_long_header(header: &csv::StringRecord, schema: &DatasetSchema) -> Result<()> {
    let expected = long_csv_header(schema);
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::SchemaMismatch(format!(
            "CSV header {:?} does not match schema columns {:?}",
            header.iter().collect::<Vec<_>>(),
            expected
        )));
    }
    Ok(())
}

/// One parsed data row of a long-format CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub subject_id: String,
    pub episode_id: String,
    pub epoch: Epoch,
}

fn parse_long_record(record: &csv::StringRecord, width: usize) -> Result<LongRow> {
    if record.len() != 5 + width {
        return Err(Error::SchemaMismatch(format!(
            "row has {} fields, expected {}",
            record.len(),
            5 + width
        )));
    }
    let covariates = (0..width)
        .map(|j| parse_value(&record[5 + j], "covariate"))
        .collect::<Result<Vec<f64>>>()?;
    Ok(LongRow {
        subject_id: record[0].to_string(),
        episode_id: record[1].to_string(),
        epoch: Epoch::new(
            parse_time(&record[2], "t_start")?,
            parse_time(&record[3], "t_end")?,
            covariates,
            parse_delta(&record[4])?,
        ),
    })
}

/// Streaming reader over long-format rows. A bad row yields an error and
/// reading continues with the next one.
pub struct LongCsvRows<R: Read> {
    reader: csv::Reader<R>,
    width: usize,
    record: csv::StringRecord,
}

impl<R: Read> LongCsvRows<R> {
    pub fn new(input: R, schema: &DatasetSchema) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(input);
        let header = reader.headers()?.clone();
        check_long_header(&header, schema)?;
        Ok(Self {
            reader,
            width: schema.width(),
            record: csv::StringRecord::new(),
        })
    }

    /// Raw `episode_id` field of the most recently read record, available
    /// even when that record failed to parse.
    pub fn current_episode_id(&self) -> Option<&str> {
        self.record.get(1).filter(|s| !s.is_empty())
    }
}

impl<R: Read> Iterator for LongCsvRows<R> {
    type Item = Result<LongRow>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.reader.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => Some(parse_long_record(&self.record, self.width)),
            Err(e) => Some(Err(e.into())),
        }
    }
}

/// Reads a long-format CSV, grouping rows into episodes by `episode_id` in
/// order of first appearance. An episode is marked administratively
/// censored when its last epoch carries no event.
pub fn read_long_csv<R: Read>(input: R, schema: &DatasetSchema) -> Result<Vec<Episode>> {
    let mut episodes: Vec<Episode> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in LongCsvRows::new(input, schema)? {
        let row = row?;
        match index.get(&row.episode_id) {
            Some(&i) => {
                if episodes[i].subject_id != row.subject_id {
                    return Err(Error::Parse(format!(
                        "episode {} appears under two subjects",
                        row.episode_id
                    )));
                }
                episodes[i].epochs.push(row.epoch);
            }
            None => {
                index.insert(row.episode_id.clone(), episodes.len());
                episodes.push(Episode::new(row.episode_id, row.subject_id, vec![row.epoch]));
            }
        }
    }
    for episode in &mut episodes {
        episode.censored_admin = !episode.epochs.last().is_some_and(|e| e.delta);
    }
    Ok(episodes)
}

pub fn write_long_csv<W: Write>(out: W, schema: &DatasetSchema, episodes: &[Episode]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(long_csv_header(schema))?;
    let mut row: Vec<String> = Vec::with_capacity(5 + schema.width());
    for episode in episodes {
        for epoch in &episode.epochs {
            if epoch.covariates.len() != schema.width() {
                return Err(Error::SchemaMismatch(format!(
                    "episode {} has {} covariates, schema expects {}",
                    episode.episode_id,
                    epoch.covariates.len(),
                    schema.width()
                )));
            }
            row.clear();
            row.push(episode.subject_id.clone());
            row.push(episode.episode_id.clone());
            row.push(format_value(epoch.t_start));
            row.push(format_value(epoch.t_end));
            row.push(if epoch.delta { "1" } else { "0" }.to_string());
            row.extend(epoch.covariates.iter().map(|&v| format_value(v)));
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_schema(path: &Path) -> Result<DatasetSchema> {
    let schema: DatasetSchema = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    schema.validate()?;
    Ok(schema)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// One line of the embedding interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub episode_id: String,
    pub timestamp_hours: f64,
    pub embedding: Vec<f64>,
}

/// Reads embedding JSONL into per-episode streams (first-appearance order),
/// each sorted by timestamp.
pub fn read_embeddings<R: Read>(input: R) -> Result<Vec<EmbeddingStream>> {
    let mut grouped: Vec<(String, Vec<EmbeddingEntry>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("embedding line {}: {e}", lineno + 1)))?;
        if !record.timestamp_hours.is_finite() {
            return Err(Error::Parse(format!(
                "embedding line {}: non-finite timestamp",
                lineno + 1
            )));
        }
        let slot = *index.entry(record.episode_id.clone()).or_insert_with(|| {
            grouped.push((record.episode_id.clone(), Vec::new()));
            grouped.len() - 1
        });
        grouped[slot].1.push(EmbeddingEntry {
            timestamp: record.timestamp_hours,
            vector: record.embedding,
        });
    }
    grouped
        .into_iter()
        .map(|(id, mut entries)| {
            entries.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            EmbeddingStream::new(id, entries)
        })
        .collect()
}

pub fn write_embeddings<W: Write>(mut out: W, streams: &[EmbeddingStream]) -> Result<()> {
    for stream in streams {
        for entry in &stream.entries {
            let record = EmbeddingRecord {
                episode_id: stream.episode_id.clone(),
                timestamp_hours: entry.timestamp,
                embedding: entry.vector.clone(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads raw observations, grouped by episode in order of first appearance
/// and sorted by timestamp within each episode.
pub fn read_raw_observations<R: Read>(input: R, plan: &IngestPlan) -> Result<Vec<RawObservationStream>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(RAW_CSV_HEADER) {
        return Err(Error::SchemaMismatch(format!(
            "raw observation header must be {}",
            RAW_CSV_HEADER.join(",")
        )));
    }
    let mut streams: Vec<RawObservationStream> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let feature = plan
            .feature(&record[3])
            .ok_or_else(|| Error::UnknownFeature(record[3].to_string()))?;
        let text = record[4].trim();
        let value = if text.is_empty() {
            RawValue::Missing
        } else {
            match feature {
                RawFeature::Numeric { .. } => RawValue::Number(parse_value(text, &record[3])?),
                RawFeature::Categorical { .. } => RawValue::Label(text.to_string()),
            }
        };
        let episode_id = record[1].to_string();
        let slot = *index.entry(episode_id.clone()).or_insert_with(|| {
            streams.push(RawObservationStream {
                episode_id,
                subject_id: record[0].to_string(),
                entries: Vec::new(),
            });
            streams.len() - 1
        });
        streams[slot].entries.push(RawObservation {
            timestamp: parse_time(&record[2], "timestamp")?,
            feature: record[3].to_string(),
            value,
        });
    }
    for stream in &mut streams {
        stream
            .entries
            .sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    Ok(streams)
}

/// Reads an `episode_id,time` event list into per-episode sorted times.
pub fn read_event_times<R: Read>(input: R) -> Result<HashMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut events: HashMap<String, Vec<f64>> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse("event rows must be `episode_id,time`".into()));
        }
        events
            .entry(record[0].to_string())
            .or_default()
            .push(parse_time(&record[1], "event time")?);
    }
    for times in events.values_mut() {
        times.sort_by(f64::total_cmp);
    }
    Ok(events)
}
