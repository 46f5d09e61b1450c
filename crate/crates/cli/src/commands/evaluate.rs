use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args};
use hazardforge_core::boost::HazardStep;
use hazardforge_core::eval::{
    auct, auct_with, confusion_at, default_bins, episode_score, f1_optimal_threshold, flag_outcome,
    lead_times, parse_bins, roc_pr_curves, AuctBin, Confusion, HistogramBucket, Label,
    MonitoringTrace, Outcome, SurvivalSubject,
};
use hazardforge_core::io::{format_value, write_json};
use hazardforge_core::monitor::align_to_model;
use hazardforge_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::failure::{CliError, CliResult};
use crate::inputs::{load_embeddings, load_episodes, load_model, load_schema, out_dir};
use crate::manifest::Run;

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("scorer").required(true).args(["model", "truth"])))]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// True hazard paths (truth_paths.csv from simulate) in place of a model.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Flag threshold for outcomes and lead times; F1-optimal when absent.
    #[arg(long)]
    pub rho: Option<f64>,
    /// AUCt bin edges in hours since monitoring start, e.g. 0,24,48,72,inf.
    #[arg(long)]
    pub bins: Option<String>,
    /// Lead-time histogram edges in hours.
    #[arg(long, default_value = "0,6,12,24,48,inf")]
    pub lead_bins: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub auroc: f64,
    pub auc_pr: f64,
    pub auct_bins: Vec<AuctBin>,
    pub rho_star: f64,
    pub f1_star: f64,
    /// Threshold used for outcomes and lead times.
    pub rho: f64,
    pub confusion: Confusion,
    pub lead_time_histogram: Vec<HistogramBucket>,
    pub n_episodes: usize,
    pub n_positive: usize,
}

#[derive(Serialize)]
struct EvaluateConfig<'a> {
    scorer: &'a str,
    rho: Option<f64>,
    bins: &'a [(f64, f64)],
    lead_bins: &'a [(f64, f64)],
}

fn read_truth_paths(path: &Path) -> Result<HashMap<String, Vec<HazardStep>>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut paths: HashMap<String, Vec<HazardStep>> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad truth path row {record:?}")))
        };
        paths.entry(record[0].to_string()).or_default().push(HazardStep {
            start: num(1)?,
            end: num(2)?,
            hazard: num(3)?,
        });
    }
    Ok(paths)
}

fn cumulative(path: &[HazardStep], t: f64) -> f64 {
    path.iter()
        .take_while(|s| s.start < t)
        .map(|s| s.hazard * (s.end.min(t) - s.start))
        .sum()
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let mut run = Run::start("evaluate");
    let bins = match &args.bins {
        Some(text) => parse_bins(text)?,
        None => default_bins(),
    };
    let lead_bins = parse_bins(&args.lead_bins)?;
    let schema = load_schema(&mut run, &args.schema)?;
    let episodes = load_episodes(&mut run, &args.data, &schema)?;
    let streams = match &args.embeddings {
        Some(path) => load_embeddings(&mut run, path)?,
        None => Vec::new(),
    };

    let (traces, auct_report) = if let Some(model_path) = &args.model {
        let model = load_model(&mut run, model_path)?;
        let episodes = align_to_model(&model, &schema, &episodes, &streams)?;
        let traces = episodes
            .par_iter()
            .map(|e| MonitoringTrace::from_model(&model, e))
            .collect::<Result<Vec<_>>>()?;
        (traces, auct(&episodes, &model, &bins)?)
    } else {
        let truth_path = args.truth.as_ref().expect("clap requires model or truth");
        if !truth_path.is_file() {
            return Err(CliError::missing("TruthMissing", truth_path));
        }
        run.input("truth", truth_path)?;
        let mut by_id = read_truth_paths(truth_path)?;
        let paths = episodes
            .iter()
            .map(|e| {
                by_id.remove(&e.episode_id).ok_or_else(|| {
                    Error::SchemaMismatch(format!("no truth path for episode {}", e.episode_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let traces = episodes
            .iter()
            .zip(&paths)
            .map(|(e, p)| MonitoringTrace::new(e.episode_id.clone(), p.clone(), e.first_event_time()))
            .collect::<Result<Vec<_>>>()?;
        let subjects: Vec<SurvivalSubject> = episodes.iter().map(SurvivalSubject::of).collect();
        let report = auct_with(
            &subjects,
            |i, t| (-cumulative(&paths[i], t)).exp(),
            &bins,
            schema.monitoring_start,
        );
        (traces, report)
    };

    let scores: Vec<_> = traces.iter().map(episode_score).collect();
    let curves = roc_pr_curves(&scores)?;
    let (rho_star, f1_star) = f1_optimal_threshold(&scores)?;
    let rho = args.rho.unwrap_or(rho_star);
    let outcomes: Vec<_> = traces.iter().map(|t| flag_outcome(t, rho)).collect();
    let leads = lead_times(&traces, rho, &lead_bins);
    let metrics = Metrics {
        auroc: curves.auroc,
        auc_pr: curves.auc_pr,
        auct_bins: auct_report.bins.clone(),
        rho_star,
        f1_star,
        rho,
        confusion: confusion_at(&scores, rho),
        lead_time_histogram: leads.histogram,
        n_episodes: scores.len(),
        n_positive: scores.iter().filter(|s| s.label.is_positive()).count(),
    };

    let dir = out_dir(&args.out)?;
    let metrics_path = dir.join("metrics.json");
    write_json(&metrics_path, &metrics)?;

    let roc_path = dir.join("roc.csv");
    let mut w = csv::Writer::from_path(&roc_path)?;
    w.write_record(["threshold", "fpr", "tpr"])?;
    let thresholds = std::iter::once(f64::INFINITY).chain(curves.thresholds.iter().copied());
    for (threshold, &(fpr, tpr)) in thresholds.zip(&curves.roc) {
        w.write_record([format_value(threshold), format_value(fpr), format_value(tpr)])?;
    }
    w.flush()?;

    let pr_path = dir.join("pr.csv");
    let mut w = csv::Writer::from_path(&pr_path)?;
    w.write_record(["threshold", "recall", "precision"])?;
    for (&threshold, &(recall, precision)) in curves.thresholds.iter().zip(&curves.pr) {
        w.write_record([format_value(threshold), format_value(recall), format_value(precision)])?;
    }
    w.flush()?;

    let auct_path = dir.join("auct.csv");
    let mut w = csv::Writer::from_path(&auct_path)?;
    w.write_record(["lo", "hi", "n_times", "mean", "ci_lo", "ci_hi"])?;
    let opt = |v: Option<f64>| v.map(format_value).unwrap_or_default();
    for b in &auct_report.bins {
        w.write_record([
            format_value(b.lo),
            format_value(b.hi),
            b.n_times.to_string(),
            opt(b.mean),
            opt(b.ci_lo),
            opt(b.ci_hi),
        ])?;
    }
    w.flush()?;

    let outcomes_path = dir.join("outcomes.csv");
    let mut w = csv::Writer::from_path(&outcomes_path)?;
    w.write_record(["episode_id", "label", "score", "flag_time", "outcome", "lead_hours"])?;
    let lead_by_id: HashMap<&str, f64> =
        leads.leads.iter().map(|l| (l.episode_id.as_str(), l.hours)).collect();
    for o in &outcomes {
        let label = match o.label {
            Label::Positive => "1",
            Label::Negative => "0",
        };
        let outcome = match o.outcome {
            Outcome::TP => "TP",
            Outcome::FP => "FP",
            Outcome::FN => "FN",
            Outcome::TN => "TN",
        };
        w.write_record([
            o.episode_id.clone(),
            label.to_string(),
            format_value(o.score),
            opt(o.flag_time),
            outcome.to_string(),
            opt(lead_by_id.get(o.episode_id.as_str()).copied()),
        ])?;
    }
    w.flush()?;

    for (role, path) in [
        ("metrics", metrics_path),
        ("roc", roc_path),
        ("pr", pr_path),
        ("auct", auct_path),
        ("outcomes", outcomes_path),
    ] {
        run.output(role, path);
    }
    let config = EvaluateConfig {
        scorer: if args.model.is_some() { "model" } else { "truth" },
        rho: args.rho,
        bins: &bins,
        lead_bins: &lead_bins,
    };
    run.finish(&dir, &config, None)?;
    Ok(())
}
