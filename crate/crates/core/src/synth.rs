//! Synthetic cohorts with a known hazard.
//!
//! Covariates change on a Poisson clock and are resampled i.i.d. at each
//! change. Events come from thinning a homogeneous process of rate
//! `lambda_max`. An optional latent binary "note signal" per episode is
//! visible only through sparse noisy embedding vectors, so a model can use
//! it only after fusing the embedding stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::HazardStep;
use crate::data::{DatasetSchema, Episode, Epoch, DEFAULT_MONITORING_START};
use crate::error::{Error, Result};
use crate::eval::{
    auct_with, default_bins, episode_score, roc_pr_curves, AuctBin, MonitoringTrace,
    SurvivalSubject,
};
use crate::fusion::{fuse_cohort, EmbeddingEntry, EmbeddingStream};
use crate::ingest::{add_recurrence_features, with_recurrence_features};

/// Name under which hazard definitions refer to the latent note signal.
pub const NOTE_SIGNAL: &str = "note_signal";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HazardSpec {
    Constant {
        rate: f64,
    },
    /// `below` while the feature is `< threshold`, else `above`.
    StepFeature {
        feature: String,
        threshold: f64,
        below: f64,
        above: f64,
    },
    /// `rates[k]` on the k-th interval cut by `breaks` (absolute hours).
    StepTime {
        breaks: Vec<f64>,
        rates: Vec<f64>,
    },
    Product {
        factors: Vec<HazardSpec>,
    },
}

impl HazardSpec {
    fn validate(&self, names: &[String]) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let ok_rate = |r: f64| r.is_finite() && r >= 0.0;
        match self {
            HazardSpec::Constant { rate } if !ok_rate(*rate) => bad(format!("bad rate {rate}")),
            HazardSpec::StepFeature {
                feature,
                threshold,
                below,
                above,
            } => {
                if !names.iter().any(|n| n == feature) && feature != NOTE_SIGNAL {
                    return bad(format!("hazard refers to unknown feature `{feature}`"));
                }
                if !threshold.is_finite() || !ok_rate(*below) || !ok_rate(*above) {
                    return bad(format!("bad step on `{feature}`"));
                }
                Ok(())
            }
            HazardSpec::StepTime { breaks, rates } => {
                if rates.len() != breaks.len() + 1
                    || rates.iter().any(|&r| !ok_rate(r))
                    || breaks.iter().any(|b| !b.is_finite())
                    || breaks.windows(2).any(|w| w[0] >= w[1])
                {
                    return bad("step_time needs ascending breaks and one more rate".into());
                }
                Ok(())
            }
            HazardSpec::Product { factors } => {
                factors.iter().try_for_each(|f| f.validate(names))
            }
            HazardSpec::Constant { .. } => Ok(()),
        }
    }

    /// `λ*(t, x)`; `value(name)` gives the current covariate or latent value.
    pub fn rate(&self, t: f64, value: &dyn Fn(&str) -> f64) -> f64 {
        match self {
            HazardSpec::Constant { rate } => *rate,
            HazardSpec::StepFeature {
                feature,
                threshold,
                below,
                above,
            } => {
                if value(feature) < *threshold {
                    *below
                } else {
                    *above
                }
            }
            HazardSpec::StepTime { breaks, rates } => rates[breaks.partition_point(|&b| b <= t)],
            HazardSpec::Product { factors } => factors.iter().map(|f| f.rate(t, value)).product(),
        }
    }

    /// Times at which the hazard can jump regardless of covariates.
    fn time_breaks(&self, out: &mut Vec<f64>) {
        match self {
            HazardSpec::StepTime { breaks, .. } => out.extend_from_slice(breaks),
            HazardSpec::Product { factors } => factors.iter().for_each(|f| f.time_breaks(out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDist {
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl ValueDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ValueDist::Bernoulli { p } => (0.0..=1.0).contains(&p),
            ValueDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ValueDist::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad distribution {self:?}")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ValueDist::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < p)),
            ValueDist::Uniform { lo, hi } => rng.random_range(lo..hi),
            ValueDist::Normal { mean, sd } => mean + sd * standard_normal(rng),
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    /// Changes per hour; zero keeps the initial value for the whole episode.
    pub change_rate: f64,
    pub dist: ValueDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteSignalSpec {
    /// Embedding width.
    pub dim: usize,
    /// Probability that an episode carries the signal.
    pub prevalence: f64,
    /// Notes per hour after the first, which arrives at monitoring start.
    pub note_rate: f64,
    /// Every component of a note vector is `separation · signal + N(0, noise_sd²)`.
    pub separation: f64,
    pub noise_sd: f64,
}

fn default_monitoring_start() -> f64 {
    DEFAULT_MONITORING_START
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub true_hazard: HazardSpec,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub note_signal: Option<NoteSignalSpec>,
    pub n_episodes: usize,
    /// Hours of monitoring after `monitoring_start`.
    pub max_follow_up: f64,
    /// Rate of early administrative censoring per hour.
    #[serde(default)]
    pub censor_rate: f64,
    #[serde(default = "default_monitoring_start")]
    pub monitoring_start: f64,
    pub lambda_max: f64,
    #[serde(default = "default_true")]
    pub recurrence_features: bool,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn constant(rate: f64, n_episodes: usize, max_follow_up: f64, seed: u64) -> Self {
        Self {
            true_hazard: HazardSpec::Constant { rate },
            covariates: Vec::new(),
            note_signal: None,
            n_episodes,
            max_follow_up,
            censor_rate: 0.0,
            monitoring_start: DEFAULT_MONITORING_START,
            lambda_max: rate.max(f64::MIN_POSITIVE),
            recurrence_features: true,
            seed,
        }
    }

    /// Names accepted by [`ScenarioSpec::preset`].
    pub const PRESETS: [&'static str; 5] = ["constant", "baseline", "two-group", "step", "note-signal"];

    /// Built-in scenarios used by the command line and the acceptance suite.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let numeric = |name: &str, change_rate: f64, dist: ValueDist| CovariateSpec {
            name: name.into(),
            change_rate,
            dist,
        };
        let noise = |k: usize| numeric(&format!("noise{k}"), 0.1, ValueDist::Normal { mean: 0.0, sd: 1.0 });
        let spec = match name {
            "constant" => Self::constant(0.1, 2000, 50.0, seed),
            // About 7% of 50-hour episodes see an event.
            "baseline" => Self::constant(-(0.93f64.ln()) / 50.0, 2000, 50.0, seed),
            "two-group" => Self {
                true_hazard: HazardSpec::StepFeature {
                    feature: "group".into(),
                    threshold: 0.5,
                    below: 0.02,
                    above: 0.2,
                },
                covariates: vec![
                    numeric("group", 0.0, ValueDist::Bernoulli { p: 0.5 }),
                    noise(1),
                    noise(2),
                ],
                note_signal: None,
                n_episodes: 2000,
                max_follow_up: 48.0,
                censor_rate: 0.01,
                monitoring_start: DEFAULT_MONITORING_START,
                lambda_max: 0.2,
                recurrence_features: true,
                seed,
            },
            "step" => Self {
                true_hazard: HazardSpec::StepFeature {
                    feature: "x0".into(),
                    threshold: 0.5,
                    below: 0.02,
                    above: 0.3,
                },
                covariates: vec![
                    numeric("x0", 0.05, ValueDist::Uniform { lo: 0.0, hi: 1.0 }),
                    noise(1),
                ],
                note_signal: None,
                n_episodes: 2000,
                max_follow_up: 48.0,
                censor_rate: 0.01,
                monitoring_start: DEFAULT_MONITORING_START,
                lambda_max: 0.3,
                recurrence_features: true,
                seed,
            },
            "note-signal" => Self {
                true_hazard: HazardSpec::StepFeature {
                    feature: NOTE_SIGNAL.into(),
                    threshold: 0.5,
                    below: 0.005,
                    above: 0.05,
                },
                covariates: vec![noise(1), noise(2)],
                note_signal: Some(NoteSignalSpec {
                    dim: 4,
                    prevalence: 0.3,
                    note_rate: 0.1,
                    separation: 1.0,
                    noise_sd: 0.7,
                }),
                n_episodes: 2000,
                max_follow_up: 48.0,
                censor_rate: 0.01,
                monitoring_start: DEFAULT_MONITORING_START,
                lambda_max: 0.05,
                recurrence_features: true,
                seed,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset `{other}`, expected one of {:?}",
                    Self::PRESETS
                )))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let names: Vec<String> = self.covariates.iter().map(|c| c.name.clone()).collect();
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            return bad("lambda_max must be positive and finite");
        }
        if !(self.max_follow_up > 0.0 && self.max_follow_up.is_finite()) {
            return bad("max_follow_up must be positive and finite");
        }
        if !(self.censor_rate >= 0.0 && self.censor_rate.is_finite()) {
            return bad("censor_rate must be non-negative");
        }
        if !self.monitoring_start.is_finite() {
            return bad("monitoring_start must be finite");
        }
        for c in &self.covariates {
            if !(c.change_rate >= 0.0 && c.change_rate.is_finite()) {
                return bad("covariate change_rate must be non-negative");
            }
            c.dist.validate()?;
        }
        if let Some(n) = &self.note_signal {
            if n.dim == 0
                || !(0.0..=1.0).contains(&n.prevalence)
                || !(n.note_rate >= 0.0 && n.note_rate.is_finite())
                || !(n.noise_sd >= 0.0)
                || !n.separation.is_finite()
            {
                return bad("bad note_signal settings");
            }
        }
        self.schema().validate()?;
        self.true_hazard.validate(&names)
    }

    /// Tabular schema of the simulated long CSV (no embedding block).
    pub fn schema(&self) -> DatasetSchema {
        let names: Vec<&str> = self.covariates.iter().map(|c| c.name.as_str()).collect();
        let schema = DatasetSchema::numeric(&names, self.monitoring_start);
        if self.recurrence_features {
            with_recurrence_features(&schema)
        } else {
            schema
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCohort {
    pub schema: DatasetSchema,
    pub episodes: Vec<Episode>,
    /// One per episode, empty without a note signal.
    pub embeddings: Vec<EmbeddingStream>,
    /// True hazard along each episode from monitoring start to its end.
    pub truth: Vec<Vec<HazardStep>>,
    pub latent: Vec<bool>,
}

impl SimulatedCohort {
    /// Episodes and schema with the embedding block fused in.
    pub fn fused(&self, dim: usize) -> Result<(Vec<Episode>, DatasetSchema)> {
        fuse_cohort(&self.episodes, &self.embeddings, &self.schema, dim)
    }

    pub fn true_cumulative(&self, i: usize, t: f64) -> f64 {
        cumulative(&self.truth[i], t)
    }

    /// NLL of the true hazard, the floor any fitted model is compared to.
    pub fn true_nll(&self) -> f64 {
        self.episodes
            .iter()
            .zip(&self.truth)
            .map(|(ep, path)| truth_nll(ep, path))
            .sum()
    }

    pub fn traces(&self) -> Result<Vec<MonitoringTrace>> {
        self.episodes
            .iter()
            .zip(&self.truth)
            .map(|(ep, path)| {
                MonitoringTrace::new(ep.episode_id.clone(), path.clone(), ep.first_event_time())
            })
            .collect()
    }
}

fn cumulative(path: &[HazardStep], t: f64) -> f64 {
    path.iter()
        .take_while(|s| s.start < t)
        .map(|s| s.hazard * (s.end.min(t) - s.start))
        .sum()
}

/// True-hazard NLL of one episode: `∫ λ* − Σ log λ*(t_event⁻)`.
pub fn truth_nll(episode: &Episode, path: &[HazardStep]) -> f64 {
    let integral: f64 = path.iter().map(|s| s.hazard * (s.end - s.start)).sum();
    let log_terms: f64 = episode
        .event_times()
        .iter()
        .map(|&t| {
            let step = path
                .iter()
                .rev()
                .find(|s| s.start < t)
                .expect("event inside the path");
            step.hazard.ln()
        })
        .sum();
    integral - log_terms
}

/// Piecewise-constant covariate trajectory: `values[k]` holds on
/// `[times[k], times[k+1])`.
struct Trajectory {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Trajectory {
    fn at(&self, t: f64) -> &[f64] {
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        &self.values[k]
    }
}

fn poisson_times<R: Rng>(rng: &mut R, rate: f64, from: f64, to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = from;
    loop {
        t += gap.sample(rng);
        if t >= to {
            return out;
        }
        out.push(t);
    }
}

fn covariate_path<R: Rng>(rng: &mut R, spec: &ScenarioSpec, start: f64, end: f64) -> Trajectory {
    let mut current: Vec<f64> = spec.covariates.iter().map(|c| c.dist.sample(rng)).collect();
    let mut changes: Vec<(f64, usize)> = spec
        .covariates
        .iter()
        .enumerate()
        .flat_map(|(k, c)| {
            poisson_times(rng, c.change_rate, start, end)
                .into_iter()
                .map(move |t| (t, k))
        })
        .collect();
    changes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut times = vec![start];
    let mut values = vec![current.clone()];
    for (t, k) in changes {
        current[k] = spec.covariates[k].dist.sample(rng);
        if *times.last().expect("non-empty") == t {
            *values.last_mut().expect("non-empty") = current.clone();
        } else {
            times.push(t);
            values.push(current.clone());
        }
    }
    Trajectory { times, values }
}

struct SimulatedEpisode {
    episode: Episode,
    stream: EmbeddingStream,
    truth: Vec<HazardStep>,
    latent: bool,
}

fn simulate_episode(spec: &ScenarioSpec, index: usize) -> Result<SimulatedEpisode> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let start = spec.monitoring_start;
    let mut end = start + spec.max_follow_up;
    if spec.censor_rate > 0.0 {
        let c = start + Exp::new(spec.censor_rate).expect("positive rate").sample(&mut rng);
        end = end.min(c);
    }
    let path = covariate_path(&mut rng, spec, start, end);

    let (latent, stream) = match &spec.note_signal {
        Some(n) => {
            let latent = rng.random::<f64>() < n.prevalence;
            let mut times = vec![start];
            times.extend(poisson_times(&mut rng, n.note_rate, start, end));
            let signal = if latent { n.separation } else { 0.0 };
            let entries = times
                .into_iter()
                .map(|timestamp| EmbeddingEntry {
                    timestamp,
                    vector: (0..n.dim)
                        .map(|_| signal + n.noise_sd * standard_normal(&mut rng))
                        .collect(),
                })
                .collect();
            (latent, entries)
        }
        None => (false, Vec::new()),
    };
    let episode_id = format!("ep{index:06}");
    let stream = EmbeddingStream::new(episode_id.clone(), stream)?;

    let names: Vec<&str> = spec.covariates.iter().map(|c| c.name.as_str()).collect();
    let rate_at = |t: f64| {
        let x = path.at(t);
        spec.true_hazard.rate(t, &|name: &str| {
            if name == NOTE_SIGNAL {
                f64::from(u8::from(latent))
            } else {
                x[names.iter().position(|n| *n == name).expect("validated name")]
            }
        })
    };

    // Pieces of constant true hazard: covariate changes plus time breaks.
    let mut cuts = path.times.clone();
    spec.true_hazard.time_breaks(&mut cuts);
    cuts.retain(|&c| c >= start && c < end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut truth = Vec::with_capacity(cuts.len());
    for (k, &a) in cuts.iter().enumerate() {
        let b = cuts.get(k + 1).copied().unwrap_or(end);
        let hazard = rate_at(a);
        if hazard > spec.lambda_max {
            return Err(Error::RateBoundViolated {
                rate: hazard,
                bound: spec.lambda_max,
                t: a,
            });
        }
        truth.push(HazardStep { start: a, end: b, hazard });
    }

    let proposal = Exp::new(spec.lambda_max).expect("validated bound");
    let mut events = Vec::new();
    let mut t = start;
    loop {
        t += proposal.sample(&mut rng);
        if t >= end {
            break;
        }
        let k = truth.partition_point(|s| s.start <= t) - 1;
        if rng.random::<f64>() * spec.lambda_max < truth[k].hazard {
            events.push(t);
        }
    }

    let mut bounds: Vec<f64> = path.times.iter().copied().chain(events.iter().copied()).collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    let epochs = bounds
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let b = bounds.get(k + 1).copied().unwrap_or(end);
            let delta = events.binary_search_by(|e| e.total_cmp(&b)).is_ok();
            Epoch::new(a, b, path.at(a).to_vec(), delta)
        })
        .collect();
    let mut episode = Episode::new(episode_id, format!("subj{index:06}"), epochs);
    if spec.recurrence_features {
        episode = add_recurrence_features(&episode, &events);
    }
    Ok(SimulatedEpisode {
        episode,
        stream,
        truth,
        latent,
    })
}

/// Simulates the cohort. Each episode draws from its own stream of the
/// seeded generator, so output does not depend on thread count.
pub fn simulate(spec: &ScenarioSpec) -> Result<SimulatedCohort> {
    spec.validate()?;
    let sims: Vec<SimulatedEpisode> = (0..spec.n_episodes)
        .into_par_iter()
        .map(|i| simulate_episode(spec, i))
        .collect::<Result<_>>()?;
    let mut cohort = SimulatedCohort {
        schema: spec.schema(),
        episodes: Vec::with_capacity(sims.len()),
        embeddings: Vec::with_capacity(sims.len()),
        truth: Vec::with_capacity(sims.len()),
        latent: Vec::with_capacity(sims.len()),
    };
    for s in sims {
        cohort.episodes.push(s.episode);
        cohort.embeddings.push(s.stream);
        cohort.truth.push(s.truth);
        cohort.latent.push(s.latent);
    }
    Ok(cohort)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMetrics {
    pub auroc: f64,
    pub auc_pr: f64,
    pub auct_bins: Vec<AuctBin>,
}

/// The evaluation battery run on the true hazard instead of an estimate.
pub fn oracle_metrics(cohort: &SimulatedCohort, bins: Option<&[(f64, f64)]>) -> Result<OracleMetrics> {
    let traces = cohort.traces()?;
    let scores: Vec<_> = traces.iter().map(episode_score).collect();
    let curves = roc_pr_curves(&scores)?;
    let subjects: Vec<SurvivalSubject> = cohort.episodes.iter().map(SurvivalSubject::of).collect();
    let default = default_bins();
    let report = auct_with(
        &subjects,
        |i, t| (-cohort.true_cumulative(i, t)).exp(),
        bins.unwrap_or(&default),
        cohort.schema.monitoring_start,
    );
    Ok(OracleMetrics {
        auroc: curves.auroc,
        auc_pr: curves.auc_pr,
        auct_bins: report.bins,
    })
}
