use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use hazardforge_core::cv::{cross_validate, CvGrid};
use hazardforge_core::io::{format_value, write_json};
use hazardforge_core::{train_with_report, variable_importance, DatasetSchema, Episode, Error, TrainConfig};
use serde::Serialize;

use crate::failure::CliResult;
use crate::inputs::{fuse_for_training, load_embeddings, load_episodes, load_json, load_model, load_schema, out_dir};
use crate::manifest::Run;

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Note embeddings fused into the data before fitting.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Training configuration JSON, e.g. the `selected.json` written by cv.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Base training configuration; depth and trees come from the grid.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Comma list, or start:stop:step.
    #[arg(long)]
    pub grid_depths: Option<String>,
    /// Comma list, or start:stop:step.
    #[arg(long)]
    pub grid_trees: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for importance.csv; JSON goes to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `1,2,3` or the inclusive range `25:500:25`.
pub fn parse_grid(text: &str) -> hazardforge_core::Result<Vec<usize>> {
    let bad = || Error::Parse(format!("bad grid `{text}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(bad());
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0 || a > b {
            return Err(bad());
        }
        Ok((a..=b).step_by(step).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn base_config(run: &mut Run, path: &Option<PathBuf>) -> CliResult<TrainConfig> {
    match path {
        Some(p) => load_json(run, "config", p, "ConfigMissing"),
        None => Ok(TrainConfig::default()),
    }
}

fn load_training_set(run: &mut Run, args: &DataArgs) -> CliResult<(Vec<Episode>, DatasetSchema)> {
    let schema = load_schema(run, &args.schema)?;
    let episodes = load_episodes(run, &args.data, &schema)?;
    match &args.embeddings {
        Some(path) => {
            let streams = load_embeddings(run, path)?;
            fuse_for_training(episodes, schema, &streams)
        }
        None => Ok((episodes, schema)),
    }
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let mut run = Run::start("train");
    let mut config = base_config(&mut run, &args.config)?;
    if let Some(d) = args.depth {
        config.max_depth = d;
    }
    if let Some(m) = args.trees {
        config.num_trees = m;
    }
    if let Some(nu) = args.nu {
        config.nu = nu;
    }
    config.validate()?;
    let (episodes, schema) = load_training_set(&mut run, &args.input)?;
    let (model, report) = train_with_report(&episodes, &schema, &config)?;
    log::info!(
        "trained {} trees, NLL {} -> {}",
        model.n_trees(),
        report.round_nll[0],
        report.round_nll.last().copied().unwrap_or(f64::NAN)
    );

    let dir = out_dir(&args.out)?;
    let model_path = dir.join("model.json");
    std::fs::write(&model_path, model.to_json())?;
    let log_path = dir.join("training_log.csv");
    let mut w = csv::Writer::from_path(&log_path)?;
    w.write_record(["round", "nll"])?;
    for (round, nll) in report.round_nll.iter().enumerate() {
        w.write_record([round.to_string(), format_value(*nll)])?;
    }
    w.flush()?;
    run.output("model", model_path);
    run.output("training_log", log_path);
    run.finish(&dir, &config, None)?;
    Ok(())
}

#[derive(Serialize)]
struct CvSettings<'a> {
    folds: usize,
    grid: &'a CvGrid,
    base: &'a TrainConfig,
}

pub fn cv(args: CvArgs) -> CliResult<()> {
    let mut run = Run::start("cv");
    let mut base = base_config(&mut run, &args.config)?;
    if let Some(nu) = args.nu {
        base.nu = nu;
    }
    let mut grid = CvGrid::default();
    if let Some(text) = &args.grid_depths {
        grid.depths = parse_grid(text)?;
    }
    if let Some(text) = &args.grid_trees {
        grid.tree_counts = parse_grid(text)?;
    }
    grid.validate()?;
    let (episodes, schema) = load_training_set(&mut run, &args.input)?;
    let result = cross_validate(&episodes, &schema, &grid, args.folds, args.seed, &base)?;

    let dir = out_dir(&args.out)?;
    let grid_path = dir.join("cv_grid.csv");
    let mut w = csv::Writer::from_path(&grid_path)?;
    w.write_record(["depth", "trees", "mean_nll", "se"])?;
    for cell in &result.cells {
        w.write_record([
            cell.depth.to_string(),
            cell.trees.to_string(),
            format_value(cell.mean_nll),
            format_value(cell.se),
        ])?;
    }
    w.flush()?;
    let (depth, trees) = result.selected;
    let selected = TrainConfig {
        max_depth: depth,
        num_trees: trees,
        ..base.clone()
    };
    let selected_path = dir.join("selected.json");
    write_json(&selected_path, &selected)?;
    run.output("cv_grid", grid_path);
    run.output("selected", selected_path);
    let settings = CvSettings {
        folds: args.folds,
        grid: &grid,
        base: &base,
    };
    run.finish(&dir, &settings, Some(args.seed))?;
    Ok(())
}

pub fn importance(args: ImportanceArgs) -> CliResult<()> {
    let mut run = Run::start("importance");
    let model = load_model(&mut run, &args.model)?;
    let mut ranked = variable_importance(&model);
    ranked.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &ranked)?;
    writeln!(stdout)?;
    if let Some(out) = &args.out {
        let dir = out_dir(out)?;
        let path = dir.join("importance.csv");
        write_importance(&path, &ranked)?;
        run.output("importance", path);
        run.finish(&dir, &serde_json::json!({}), None)?;
    }
    Ok(())
}

fn write_importance(path: &Path, ranked: &[hazardforge_core::boost::FeatureImportance]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["feature", "importance"])?;
    for f in ranked {
        w.write_record([f.name.clone(), format_value(f.importance)])?;
    }
    w.flush()?;
    Ok(())
}
