use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{survival, HazardEnsemble};
use crate::data::Episode;
use crate::error::Result;

/// First-event time `T`, whether it is an observed event (`Δ = 1`) or the
/// end of monitoring, and when monitoring ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSubject {
    pub time: f64,
    pub observed: bool,
    pub end: f64,
}

impl SurvivalSubject {
    pub fn of(episode: &Episode) -> Self {
        let end = episode.end();
        match episode.first_event_time() {
            Some(time) => Self {
                time,
                observed: true,
                end,
            },
            None => Self {
                time: end,
                observed: false,
                end,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctBin {
    /// Hours since monitoring start.
    pub lo: f64,
    pub hi: f64,
    /// Event times in the bin that had at least one comparable pair.
    pub n_times: usize,
    pub mean: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctReport {
    /// `(t, AUCt(t))` at each distinct observed first-event time with
    /// comparable pairs, in absolute hours.
    pub per_time: Vec<(f64, f64)>,
    pub bins: Vec<AuctBin>,
}

const Z_95: f64 = 1.959963984540054;

/// Empirical `AUCt(t) = P(Ŝ_i(t) < Ŝ_j(t) | Δ_i = 1, T_i < t ≤ T_j)` at
/// every distinct observed event time, averaged within bins of hours since
/// `origin`. `survival(i, t)` must return `Ŝ_i(t)`; it is only queried at
/// times within subject `i`'s monitored range.
pub fn auct_with<F>(
    subjects: &[SurvivalSubject],
    survival: F,
    bins: &[(f64, f64)],
    origin: f64,
) -> AuctReport
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    let mut times: Vec<f64> = subjects
        .iter()
        .filter(|s| s.observed)
        .map(|s| s.time)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let per_time: Vec<Option<(f64, f64)>> = times
        .par_iter()
        .map(|&t| {
            let (mut cases, mut controls) = (Vec::new(), Vec::new());
            for (i, s) in subjects.iter().enumerate() {
                if s.observed && s.time < t {
                    // A case's curve stops where its monitoring ended.
                    cases.push(survival(i, t.min(s.end)));
                } else if s.time >= t {
                    controls.push(survival(i, t));
                }
            }
            if cases.is_empty() || controls.is_empty() {
                return None;
            }
            let mut score = 0.0;
            for &si in &cases {
                for &sj in &controls {
                    if si < sj {
                        score += 1.0;
                    } else if si == sj {
                        score += 0.5;
                    }
                }
            }
            Some((t, score / (cases.len() * controls.len()) as f64))
        })
        .collect();
    let per_time: Vec<(f64, f64)> = per_time.into_iter().flatten().collect();

    let bins = bins
        .iter()
        .map(|&(lo, hi)| {
            let values: Vec<f64> = per_time
                .iter()
                .filter(|(t, _)| t - origin >= lo && t - origin < hi)
                .map(|&(_, v)| v)
                .collect();
            summarize(lo, hi, &values)
        })
        .collect();
    AuctReport { per_time, bins }
}

fn summarize(lo: f64, hi: f64, values: &[f64]) -> AuctBin {
    let n = values.len();
    if n == 0 {
        return AuctBin {
            lo,
            hi,
            n_times: 0,
            mean: None,
            ci_lo: None,
            ci_hi: None,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let half = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Z_95 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    AuctBin {
        lo,
        hi,
        n_times: n,
        mean: Some(mean),
        ci_lo: Some(mean - half),
        ci_hi: Some(mean + half),
    }
}

/// AUCt of a fitted model, with the first event of each episode as `T`.
/// Episodes with an event before the monitoring start of their trajectory
/// cannot occur here because validated episodes begin at or after it.
pub fn auct(
    episodes: &[Episode],
    model: &HazardEnsemble,
    bins: &[(f64, f64)],
) -> Result<AuctReport> {
    let subjects: Vec<SurvivalSubject> = episodes.iter().map(SurvivalSubject::of).collect();
    // Surface range errors up front; inside the sweep every query is valid.
    for e in episodes {
        survival(model, e, e.end())?;
    }
    let origin = model.schema().monitoring_start;
    Ok(auct_with(
        &subjects,
        |i, t| survival(model, &episodes[i], t).expect("checked range"),
        bins,
        origin,
    ))
}
