use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::Args;
use hazardforge_core::ingest::{
    add_recurrence_features, attach_events, locf_discretize, with_recurrence_features, IngestPlan,
};
use hazardforge_core::io::{read_event_times, read_raw_observations, write_json, write_long_csv};
use hazardforge_core::{DatasetSchema, Episode};
use serde::Serialize;

use crate::failure::{CliError, CliResult};
use crate::inputs::{fuse_for_training, load_embeddings, load_episodes, load_schema, out_dir};
use crate::manifest::Run;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw observations: subject_id,episode_id,timestamp,feature,value.
    #[arg(long)]
    pub data: PathBuf,
    /// Ingest plan JSON listing the raw features.
    #[arg(long)]
    pub schema: PathBuf,
    /// Optional episode_id,time event list.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn write_dataset(run: &mut Run, dir: &Path, schema: &DatasetSchema, episodes: &[Episode]) -> CliResult<()> {
    let data = dir.join("data.csv");
    write_long_csv(BufWriter::new(File::create(&data)?), schema, episodes)?;
    let schema_path = dir.join("schema.json");
    write_json(&schema_path, schema)?;
    run.output("data", data);
    run.output("schema", schema_path);
    Ok(())
}

pub fn ingest(args: IngestArgs) -> CliResult<()> {
    let mut run = Run::start("ingest");
    if !args.schema.is_file() {
        return Err(CliError::missing("SchemaMissing", &args.schema));
    }
    run.input("schema", &args.schema)?;
    let mut plan: IngestPlan = serde_json::from_reader(BufReader::new(File::open(&args.schema)?))?;
    if let Some(step) = args.grid_step {
        plan.grid_step = step;
    }
    if !args.data.is_file() {
        return Err(CliError::missing("DataMissing", &args.data));
    }
    run.input("data", &args.data)?;
    let raw = read_raw_observations(BufReader::new(File::open(&args.data)?), &plan)?;
    let events = match &args.events {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::missing("EventsMissing", path));
            }
            run.input("events", path)?;
            Some(read_event_times(BufReader::new(File::open(path)?))?)
        }
        None => None,
    };

    let mut schema = plan.schema();
    let mut episodes = Vec::with_capacity(raw.len());
    for stream in &raw {
        let episode = locf_discretize(stream, &plan, plan.grid_step, plan.monitoring_start)?;
        episodes.push(match &events {
            Some(events) => {
                let times = events.get(&stream.episode_id).map(Vec::as_slice).unwrap_or(&[]);
                add_recurrence_features(&attach_events(&episode, times), times)
            }
            None => episode,
        });
    }
    if events.is_some() {
        schema = with_recurrence_features(&schema);
    }

    let dir = out_dir(&args.out)?;
    write_dataset(&mut run, &dir, &schema, &episodes)?;
    run.finish(&dir, &plan, None)?;
    Ok(())
}

#[derive(Serialize)]
struct FuseConfig {
    embedding_width: usize,
}

pub fn fuse(args: FuseArgs) -> CliResult<()> {
    let mut run = Run::start("fuse");
    let schema = load_schema(&mut run, &args.schema)?;
    let episodes = load_episodes(&mut run, &args.data, &schema)?;
    let streams = load_embeddings(&mut run, &args.embeddings)?;
    let (fused, fused_schema) = fuse_for_training(episodes, schema, &streams)?;
    let dir = out_dir(&args.out)?;
    write_dataset(&mut run, &dir, &fused_schema, &fused)?;
    let embedding_width = fused_schema.embedding_block().map_or(0, |b| b.len());
    run.finish(&dir, &FuseConfig { embedding_width }, None)?;
    Ok(())
}
