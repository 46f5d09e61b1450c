//! Independent reference implementations shared by the oracle tests and
//! the acceptance suite.

use hazardforge_core::boost::HazardStep;
use hazardforge_core::data::{DatasetSchema, Episode, Epoch, MISSING};
use hazardforge_core::eval::{EpisodeScore, Label, MonitoringTrace, Outcome};
use hazardforge_core::{HazardEnsemble, TreeNode};
use rand::Rng;

use super::{quad, rng, MS};

pub const QUAD_EPS: f64 = 1e-13;

pub fn label(positive: bool) -> Label {
    if positive {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn quad_episode_nll(model: &HazardEnsemble, ep: &Episode) -> f64 {
    ep.epochs
        .iter()
        .map(|e| {
            let x = &e.covariates;
            let integral = quad(|u| model.hazard(u, x), e.t_start, e.t_end, QUAD_EPS);
            let event = if e.delta {
                model.hazard(e.t_end.next_down(), x).ln()
            } else {
                0.0
            };
            integral - event
        })
        .sum()
}

pub fn quad_survival(model: &HazardEnsemble, ep: &Episode, t: f64) -> f64 {
    let h: f64 = ep
        .epochs
        .iter()
        .filter(|e| e.t_start < t)
        .map(|e| quad(|u| model.hazard(u, &e.covariates), e.t_start, e.t_end.min(t), QUAD_EPS))
        .sum();
    (-h).exp()
}

/// Exhaustive root split on first-round gradients, computed straight from
/// epochs without fragments or histograms.
#[derive(Debug, Clone, Copy)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub missing_left: bool,
    pub gain: f64,
}

pub fn exhaustive_root_split(eps: &[Episode], width: usize, f0: f64) -> Vec<OracleSplit> {
    let epochs: Vec<&Epoch> = eps.iter().flat_map(|e| &e.epochs).collect();
    let w = f0.exp();
    let gh = |parts: &[(f64, f64)]| -> (f64, f64) {
        // (exposure, events) pairs → (G, H)
        parts
            .iter()
            .fold((0.0, 0.0), |(g, h), &(dt, d)| (g + w * dt - d, h + w * dt))
    };
    let all: Vec<(f64, f64)> = epochs
        .iter()
        .map(|e| (e.exposure(), f64::from(u8::from(e.delta))))
        .collect();
    let (gp, hp) = gh(&all);
    let mut out = Vec::new();
    let mut consider = |feature, threshold, missing_left, l: Vec<(f64, f64)>, r: Vec<(f64, f64)>| {
        if l.is_empty() || r.is_empty() {
            return;
        }
        let (gl, hl) = gh(&l);
        let (gr, hr) = gh(&r);
        if hl < 1e-6 || hr < 1e-6 {
            return;
        }
        out.push(OracleSplit {
            feature,
            threshold,
            missing_left,
            gain: gl * gl / hl + gr * gr / hr - gp * gp / hp,
        });
    };

    let mut bounds: Vec<f64> = epochs.iter().flat_map(|e| [e.t_start, e.t_end]).collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    for &tau in &bounds[1..bounds.len() - 1] {
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for e in &epochs {
            let d = f64::from(u8::from(e.delta));
            if e.t_end <= tau {
                l.push((e.exposure(), d));
            } else if e.t_start >= tau {
                r.push((e.exposure(), d));
            } else {
                l.push((tau - e.t_start, 0.0));
                r.push((e.t_end - tau, d));
            }
        }
        consider(0, tau, true, l, r);
    }
    for j in 0..width {
        let mut values: Vec<f64> = epochs
            .iter()
            .map(|e| e.covariates[j])
            .filter(|v| !v.is_nan())
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in values.iter().skip(1) {
            for missing_left in [true, false] {
                let (mut l, mut r) = (Vec::new(), Vec::new());
                for e in &epochs {
                    let x = e.covariates[j];
                    let go_left = if x.is_nan() { missing_left } else { x < v };
                    let part = (e.exposure(), f64::from(u8::from(e.delta)));
                    if go_left {
                        l.push(part);
                    } else {
                        r.push(part);
                    }
                }
                consider(j + 1, v, missing_left, l, r);
            }
        }
    }
    out
}

/// Up to five episodes on at most three time bins, two features with at
/// most three distinct values each plus missing.
pub fn small_split_dataset(seed: u64) -> Vec<Episode> {
    let mut r = rng(seed);
    let pick = |r: &mut rand_chacha::ChaCha8Rng, pool: &[f64], lo: usize| -> Vec<f64> {
        loop {
            let kept: Vec<f64> = pool.iter().copied().filter(|_| r.random::<bool>()).collect();
            if kept.len() >= lo && kept.len() <= 3 {
                return kept;
            }
        }
    };
    let mut grid = vec![24.0];
    grid.extend(pick(&mut r, &[25.5, 27.0, 31.0], 1));
    let pool = pick(&mut r, &[-1.0, 0.0, 0.5, 2.0], 1);
    let n = r.random_range(1..6);
    (0..n)
        .map(|i| {
            let first = r.random_range(0..grid.len() - 1);
            let last = r.random_range(first + 1..grid.len());
            let epochs = (first..last)
                .map(|k| {
                    let x = (0..2)
                        .map(|_| {
                            if r.random::<f64>() < 0.15 {
                                MISSING
                            } else {
                                pool[r.random_range(0..pool.len())]
                            }
                        })
                        .collect();
                    Epoch::new(grid[k], grid[k + 1], x, r.random::<f64>() < 0.4)
                })
                .collect();
            Episode::new(format!("e{i}"), format!("s{i}"), epochs)
        })
        .collect()
}

/// Brute-force Mann–Whitney probability with ties counted half.
pub fn mann_whitney(scores: &[EpisodeScore]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for p in scores.iter().filter(|s| s.label.is_positive()) {
        for n in scores.iter().filter(|s| !s.label.is_positive()) {
            pairs += 1;
            twice += if p.score > n.score {
                2
            } else if p.score == n.score {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Best F1 over every distinct score, and the smallest score attaining it.
pub fn exhaustive_f1(scores: &[EpisodeScore]) -> (f64, f64) {
    let mut candidates: Vec<f64> = scores.iter().map(|s| s.score).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let f1_at = |r: f64| {
        let tp = scores.iter().filter(|s| s.label.is_positive() && s.score >= r).count() as f64;
        let flagged = scores.iter().filter(|s| s.score >= r).count() as f64;
        let positives = scores.iter().filter(|s| s.label.is_positive()).count() as f64;
        let (precision, recall) = (tp / flagged, tp / positives);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    let best = candidates.iter().map(|&r| f1_at(r)).fold(f64::NEG_INFINITY, f64::max);
    let smallest = candidates.iter().copied().find(|&r| f1_at(r) >= best - 1e-12).unwrap();
    (smallest, best)
}

/// Few distinct values so ties are common.
pub fn random_scores<R: Rng>(r: &mut R, n: usize) -> Vec<EpisodeScore> {
    (0..n)
        .map(|_| EpisodeScore {
            score: f64::from(r.random_range(0u8..8)) / 8.0,
            label: label(r.random::<bool>()),
        })
        .collect()
}

pub fn random_trace<R: Rng>(r: &mut R, id: usize) -> MonitoringTrace {
    let n = r.random_range(1..6);
    let mut t = MS;
    let mut steps = Vec::new();
    for _ in 0..n {
        if r.random::<f64>() < 0.2 {
            t += 1.0;
        }
        let len = r.random_range(1..6) as f64;
        steps.push(HazardStep {
            start: t,
            end: t + len,
            hazard: r.random_range(1..6) as f64 / 10.0,
        });
        t += len;
    }
    let event = if r.random::<bool>() {
        // On a boundary or inside a step, possibly at the very end.
        let k = r.random_range(0..steps.len());
        let s = steps[k];
        Some(if r.random::<bool>() { s.end } else { (s.start + s.end) / 2.0 })
    } else {
        None
    };
    MonitoringTrace::new(format!("e{id}"), steps, event).unwrap()
}

/// Walks the trace forward in time: flag as soon as the hazard reaches ρ,
/// then stop; reaching the event unflagged is a miss.
pub fn protocol(trace: &MonitoringTrace, rho: f64) -> (Outcome, Option<f64>) {
    let event = trace.first_event_time;
    for step in &trace.hazard_path {
        if event.is_some_and(|t| step.start >= t) {
            return (Outcome::FN, None);
        }
        if step.hazard >= rho {
            let outcome = if event.is_some() { Outcome::TP } else { Outcome::FP };
            return (outcome, Some(step.start));
        }
    }
    (if event.is_some() { Outcome::FN } else { Outcome::TN }, None)
}

/// Six episodes with constant hazards 0.5, 0.3, 0.2, 0.1, 0.35 and 0.4,
/// selected by a covariate.
pub fn auct_fixture() -> (HazardEnsemble, Vec<Episode>) {
    let rates = [0.5f64, 0.3, 0.2, 0.1, 0.35, 0.4];
    let mut tree = TreeNode::leaf(rates[5].ln());
    for k in (0..5).rev() {
        tree = TreeNode::split(1, k as f64 + 0.5, true, 1.0, TreeNode::leaf(rates[k].ln()), tree);
    }
    let schema = DatasetSchema::numeric(&["group"], MS);
    let model = HazardEnsemble::new(0.0, 1.0, vec![tree], schema).unwrap();
    let ep = |k: usize, event: Option<f64>, end: f64| {
        let x = vec![k as f64];
        let epochs = match event {
            Some(t) if t < end => vec![
                Epoch::new(MS, t, x.clone(), true),
                Epoch::new(t, end, x, false),
            ],
            Some(t) => vec![Epoch::new(MS, t, x, true)],
            None => vec![Epoch::new(MS, end, x, false)],
        };
        Episode::new(format!("{}", (b'A' + k as u8) as char), format!("s{k}"), epochs)
    };
    let episodes = vec![
        ep(0, Some(30.0), 55.0), // A
        ep(1, Some(40.0), 58.0), // B
        ep(2, None, 35.0),       // C
        ep(3, None, 60.0),       // D
        ep(4, Some(50.0), 52.0), // E
        ep(5, None, 45.0),       // F
    ];
    (model, episodes)
}
