use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use hazardforge_core::io::{format_value, write_embeddings, write_json, write_long_csv};
use hazardforge_core::synth::{simulate, ScenarioSpec};
use hazardforge_core::{event_count, total_exposure};
use serde::Serialize;

use crate::failure::CliResult;
use crate::inputs::{load_json, out_dir};
use crate::manifest::Run;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON; overrides the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// One of constant, baseline, two-group, step, note-signal.
    #[arg(long, default_value = "constant")]
    pub preset: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Truth<'a> {
    scenario: &'a ScenarioSpec,
    lambda_max: f64,
    seed: u64,
    n_events: usize,
    exposure_hours: f64,
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let mut run = Run::start("simulate");
    let mut spec: ScenarioSpec = match &args.config {
        Some(path) => load_json(&mut run, "config", path, "ConfigMissing")?,
        None => ScenarioSpec::preset(&args.preset, 0)?,
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.episodes {
        spec.n_episodes = n;
    }
    let cohort = simulate(&spec)?;

    let dir = out_dir(&args.out)?;
    let data = dir.join("data.csv");
    write_long_csv(BufWriter::new(File::create(&data)?), &cohort.schema, &cohort.episodes)?;
    let schema = dir.join("schema.json");
    write_json(&schema, &cohort.schema)?;
    let embeddings = dir.join("embeddings.jsonl");
    write_embeddings(BufWriter::new(File::create(&embeddings)?), &cohort.embeddings)?;
    let truth = dir.join("truth.json");
    write_json(
        &truth,
        &Truth {
            scenario: &spec,
            lambda_max: spec.lambda_max,
            seed: spec.seed,
            n_events: event_count(&cohort.episodes),
            exposure_hours: total_exposure(&cohort.episodes),
        },
    )?;
    let paths = dir.join("truth_paths.csv");
    let mut w = csv::Writer::from_path(&paths)?;
    w.write_record(["episode_id", "t_start", "t_end", "hazard"])?;
    for (ep, path) in cohort.episodes.iter().zip(&cohort.truth) {
        for s in path {
            w.write_record([
                ep.episode_id.clone(),
                format_value(s.start),
                format_value(s.end),
                format_value(s.hazard),
            ])?;
        }
    }
    w.flush()?;

    for (role, path) in [
        ("data", data),
        ("schema", schema),
        ("embeddings", embeddings),
        ("truth", truth),
        ("truth_paths", paths),
    ] {
        run.output(role, path);
    }
    run.finish(&dir, &spec, Some(spec.seed))?;
    Ok(())
}
