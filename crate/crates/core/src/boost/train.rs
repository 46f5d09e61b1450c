//! Gradient tree boosting of the log-hazard.
//!
//! Every epoch is cut into fragments at the candidate time thresholds, so a
//! fragment lies in exactly one cell of any tree. For a fragment with
//! exposure `Δt`, event indicator `δ` and current log-hazard `F`, the
//! negative log-likelihood contribution is `exp(F)·Δt − δ·F`; its first and
//! second derivatives in `F` are `g = exp(F)·Δt − δ` and `h = exp(F)·Δt`.
//! Splits maximize `G_L²/H_L + G_R²/H_R − G²/H`; a leaf takes the exact
//! minimizer `log(Σδ / Σ exp(F)·Δt)`, clamped, and is applied scaled by `nu`.
//! Because the clamped, shrunk step moves each leaf toward the minimizer of
//! a convex function, the training loss never increases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::HazardEnsemble;
use super::tree::{TreeNode, TIME_FEATURE};
use crate::data::{event_count, total_exposure, DatasetSchema, Episode, Epoch};
use crate::error::{Error, Result};

const MISSING_BIN: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub num_trees: usize,
    pub nu: f64,
    pub max_quantile_bins: usize,
    pub min_hessian_per_leaf: f64,
    pub leaf_value_clamp: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            num_trees: 100,
            nu: 0.1,
            max_quantile_bins: 256,
            min_hessian_per_leaf: 1e-6,
            leaf_value_clamp: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn new(max_depth: usize, num_trees: usize) -> Self {
        Self {
            max_depth,
            num_trees,
            ..Self::default()
        }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1".into());
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu must be in (0, 1], got {}", self.nu));
        }
        if self.max_quantile_bins < 2 || self.max_quantile_bins >= MISSING_BIN as usize {
            return bad(format!(
                "max_quantile_bins must be in [2, {}), got {}",
                MISSING_BIN, self.max_quantile_bins
            ));
        }
        if !(self.min_hessian_per_leaf > 0.0) {
            return bad("min_hessian_per_leaf must be > 0".into());
        }
        if !(self.leaf_value_clamp > 0.0 && self.leaf_value_clamp.is_finite()) {
            return bad("leaf_value_clamp must be a positive finite number".into());
        }
        Ok(())
    }
}

/// Training NLL before any tree (`round_nll[0]`) and after each round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub round_nll: Vec<f64>,
}

/// Maximum-likelihood constant log-hazard: `log(events / exposure)`.
pub fn fit_f0(episodes: &[Episode]) -> Result<f64> {
    let events = event_count(episodes);
    let exposure = total_exposure(episodes);
    if events == 0 {
        return Err(Error::DegenerateData("no events in training data".into()));
    }
    if !(exposure > 0.0) {
        return Err(Error::DegenerateData("zero exposure in training data".into()));
    }
    Ok((events as f64 / exposure).ln())
}

/// Candidate time thresholds. With few distinct epoch boundaries every
/// interior boundary is a candidate; otherwise the exposure-weighted
/// quantiles of time.
fn time_thresholds(epochs: &[&Epoch], max_bins: usize) -> Vec<f64> {
    let mut bounds: Vec<f64> = epochs.iter().flat_map(|e| [e.t_start, e.t_end]).collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    if bounds.len() < 3 {
        return Vec::new();
    }
    let (lo, hi) = (bounds[0], bounds[bounds.len() - 1]);
    if bounds.len() <= max_bins {
        return bounds[1..bounds.len() - 1].to_vec();
    }

    let mut events: Vec<(f64, i64)> = epochs
        .iter()
        .flat_map(|e| [(e.t_start, 1), (e.t_end, -1)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = epochs.iter().map(|e| e.exposure()).sum();

    let mut out = Vec::with_capacity(max_bins);
    let mut active = 0i64;
    let mut cum = 0.0;
    let mut prev = lo;
    let mut k = 1;
    for &(t, d) in &events {
        if active > 0 && t > prev {
            let slope = active as f64;
            let next = cum + slope * (t - prev);
            while k < max_bins {
                let target = total * k as f64 / max_bins as f64;
                if target > next {
                    break;
                }
                out.push(prev + (target - cum) / slope);
                k += 1;
            }
            cum = next;
        }
        active += d;
        prev = t;
    }
    out.retain(|&tau| tau > lo && tau < hi);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Candidate thresholds for one covariate from `(value, exposure)` pairs.
/// A threshold `v` sends values `< v` left.
fn value_thresholds(mut pairs: Vec<(f64, f64)>, max_bins: usize) -> Vec<f64> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for (v, w) in pairs {
        match groups.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => groups.push((v, w)),
        }
    }
    if groups.len() <= max_bins {
        return groups.iter().skip(1).map(|g| g.0).collect();
    }
    let total: f64 = groups.iter().map(|g| g.1).sum();
    let mut out = Vec::with_capacity(max_bins);
    let mut cum = 0.0;
    let mut k = 1;
    for (i, &(_, w)) in groups.iter().enumerate() {
        cum += w;
        while k < max_bins && cum >= total * k as f64 / max_bins as f64 {
            if let Some(next) = groups.get(i + 1) {
                out.push(next.0);
            }
            k += 1;
        }
    }
    out.dedup();
    out
}

/// Candidate thresholds per split feature (index 0 is time).
pub fn candidate_thresholds(
    episodes: &[Episode],
    width: usize,
    max_bins: usize,
) -> Vec<Vec<f64>> {
    let epochs: Vec<&Epoch> = episodes.iter().flat_map(|e| &e.epochs).collect();
    let mut out = Vec::with_capacity(width + 1);
    out.push(time_thresholds(&epochs, max_bins));
    for j in 0..width {
        let pairs: Vec<(f64, f64)> = epochs
            .iter()
            .filter(|e| !e.covariates[j].is_nan())
            .map(|e| (e.covariates[j], e.exposure()))
            .collect();
        out.push(value_thresholds(pairs, max_bins));
    }
    out
}

#[inline]
fn bin_of(thresholds: &[f64], v: f64) -> u16 {
    if v.is_nan() {
        MISSING_BIN
    } else {
        thresholds.partition_point(|&t| t <= v) as u16
    }
}

/// Epochs cut at every candidate time threshold, stored column-wise.
struct Fragments {
    exposure: Vec<f64>,
    delta: Vec<f64>,
    /// `bins[feature][fragment]`.
    bins: Vec<Vec<u16>>,
}

impl Fragments {
    fn build(episodes: &[Episode], thresholds: &[Vec<f64>]) -> Self {
        let n_features = thresholds.len();
        let time = &thresholds[TIME_FEATURE];
        let mut exposure = Vec::new();
        let mut delta = Vec::new();
        let mut bins: Vec<Vec<u16>> = vec![Vec::new(); n_features];
        for epoch in episodes.iter().flat_map(|e| &e.epochs) {
            let covariate_bins: Vec<u16> = (1..n_features)
                .map(|f| bin_of(&thresholds[f], epoch.covariates[f - 1]))
                .collect();
            let lo = time.partition_point(|&p| p <= epoch.t_start);
            let hi = time.partition_point(|&p| p < epoch.t_end);
            let cuts = &time[lo..hi];
            let mut start = epoch.t_start;
            for (i, &end) in cuts.iter().chain(std::iter::once(&epoch.t_end)).enumerate() {
                let last = i == cuts.len();
                exposure.push(end - start);
                delta.push(if last && epoch.delta { 1.0 } else { 0.0 });
                bins[TIME_FEATURE].push(bin_of(time, start));
                for (f, &b) in covariate_bins.iter().enumerate() {
                    bins[f + 1].push(b);
                }
                start = end;
            }
        }
        Self {
            exposure,
            delta,
            bins,
        }
    }

    fn len(&self) -> usize {
        self.exposure.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    bin: usize,
    missing_left: bool,
    gain: f64,
}

struct Grower<'a> {
    frags: &'a Fragments,
    thresholds: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a TrainConfig,
    /// Leaf value assigned to each fragment by the tree being grown.
    leaf_of: Vec<f64>,
}

impl Grower<'_> {
    fn best_for_feature(&self, feature: usize, idx: &[u32], gp: f64, hp: f64) -> Option<SplitChoice> {
        let thr = &self.thresholds[feature];
        if thr.is_empty() {
            return None;
        }
        let bins = &self.frags.bins[feature];
        let mut g_hist = vec![0.0; thr.len() + 1];
        let mut h_hist = vec![0.0; thr.len() + 1];
        let mut n_hist = vec![0usize; thr.len() + 1];
        let (mut g_miss, mut h_miss, mut n_miss) = (0.0, 0.0, 0usize);
        for &i in idx {
            let i = i as usize;
            let b = bins[i];
            if b == MISSING_BIN {
                g_miss += self.grad[i];
                h_miss += self.hess[i];
                n_miss += 1;
            } else {
                let b = b as usize;
                g_hist[b] += self.grad[i];
                h_hist[b] += self.hess[i];
                n_hist[b] += 1;
            }
        }
        let n = idx.len();
        let min_h = self.config.min_hessian_per_leaf;
        let parent = gp * gp / hp;
        let (mut g_left, mut h_left, mut n_left) = (0.0, 0.0, 0usize);
        let mut best: Option<SplitChoice> = None;
        for k in 0..thr.len() {
            g_left += g_hist[k];
            h_left += h_hist[k];
            n_left += n_hist[k];
            for missing_left in [true, false] {
                let (gl, hl, nl) = if missing_left {
                    (g_left + g_miss, h_left + h_miss, n_left + n_miss)
                } else {
                    (g_left, h_left, n_left)
                };
                if nl == 0 || nl == n {
                    continue;
                }
                let (gr, hr) = (gp - gl, hp - hl);
                if hl < min_h || hr < min_h {
                    continue;
                }
                let gain = gl * gl / hl + gr * gr / hr - parent;
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice {
                        feature,
                        bin: k,
                        missing_left,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn best_split(&self, idx: &[u32], gp: f64, hp: f64) -> Option<SplitChoice> {
        let per_feature: Vec<Option<SplitChoice>> = (0..self.thresholds.len())
            .into_par_iter()
            .map(|f| self.best_for_feature(f, idx, gp, hp))
            .collect();
        // Ascending feature order with strict improvement: ties keep the
        // lowest feature, and within a feature the lowest threshold.
        let mut best: Option<SplitChoice> = None;
        for cand in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| cand.gain > b.gain) {
                best = Some(cand);
            }
        }
        best
    }

    fn leaf_value(&self, idx: &[u32], hp: f64) -> f64 {
        let clamp = self.config.leaf_value_clamp;
        if hp < self.config.min_hessian_per_leaf {
            return 0.0;
        }
        let events: f64 = idx.iter().map(|&i| self.frags.delta[i as usize]).sum();
        if events <= 0.0 {
            return -clamp;
        }
        (events / hp).ln().clamp(-clamp, clamp)
    }

    fn grow(&mut self, idx: Vec<u32>, depth: usize) -> TreeNode {
        let mut gp = 0.0;
        let mut hp = 0.0;
        for &i in &idx {
            gp += self.grad[i as usize];
            hp += self.hess[i as usize];
        }
        if depth < self.config.max_depth && idx.len() >= 2 && hp >= self.config.min_hessian_per_leaf {
            if let Some(choice) = self.best_split(&idx, gp, hp).filter(|c| c.gain > 0.0) {
                let bins = &self.frags.bins[choice.feature];
                let (left, right): (Vec<u32>, Vec<u32>) = idx.iter().partition(|&&i| {
                    let b = bins[i as usize];
                    if b == MISSING_BIN {
                        choice.missing_left
                    } else {
                        (b as usize) <= choice.bin
                    }
                });
                let left_node = self.grow(left, depth + 1);
                let right_node = self.grow(right, depth + 1);
                return TreeNode::split(
                    choice.feature,
                    self.thresholds[choice.feature][choice.bin],
                    choice.missing_left,
                    choice.gain,
                    left_node,
                    right_node,
                );
            }
        }
        let value = self.leaf_value(&idx, hp);
        for &i in &idx {
            self.leaf_of[i as usize] = value;
        }
        TreeNode::leaf(value)
    }
}

fn check_inputs(episodes: &[Episode], schema: &DatasetSchema, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    schema.validate()?;
    let width = schema.width();
    for episode in episodes {
        if let Some(e) = episode.epochs.iter().find(|e| e.covariates.len() != width) {
            return Err(Error::SchemaMismatch(format!(
                "episode {} epoch at {} has {} covariates, schema expects {width}",
                episode.episode_id,
                e.t_start,
                e.covariates.len()
            )));
        }
        if let Some(e) = episode.epochs.iter().find(|e| !(e.t_start < e.t_end)) {
            return Err(Error::SchemaMismatch(format!(
                "episode {} has an empty epoch at {}",
                episode.episode_id, e.t_start
            )));
        }
    }
    Ok(())
}

pub fn train(episodes: &[Episode], schema: &DatasetSchema, config: &TrainConfig) -> Result<HazardEnsemble> {
    train_with_report(episodes, schema, config).map(|(model, _)| model)
}

pub fn train_with_report(
    episodes: &[Episode],
    schema: &DatasetSchema,
    config: &TrainConfig,
) -> Result<(HazardEnsemble, TrainReport)> {
    check_inputs(episodes, schema, config)?;
    let f0 = fit_f0(episodes)?;
    let nu = config.nu;

    let thresholds = candidate_thresholds(episodes, schema.width(), config.max_quantile_bins);
    let frags = Fragments::build(episodes, &thresholds);
    let n = frags.len();

    // Running Σ of leaf values per fragment, accumulated tree by tree in the
    // same order the ensemble sums them at scoring time.
    let mut score = vec![0.0; n];
    let loss = |score: &[f64]| -> f64 {
        let terms: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let f = f0 + nu * score[i];
                f.exp() * frags.exposure[i] - frags.delta[i] * f
            })
            .collect();
        terms.iter().sum()
    };

    let mut report = TrainReport {
        round_nll: vec![loss(&score)],
    };
    let mut trees = Vec::with_capacity(config.num_trees);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..config.num_trees {
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .enumerate()
            .for_each(|(i, (g, h))| {
                let w = (f0 + nu * score[i]).exp() * frags.exposure[i];
                *g = w - frags.delta[i];
                *h = w;
            });
        let mut grower = Grower {
            frags: &frags,
            thresholds: &thresholds,
            grad: &grad,
            hess: &hess,
            config,
            leaf_of: vec![0.0; n],
        };
        let tree = grower.grow((0..n as u32).collect(), 0);
        for (s, v) in score.iter_mut().zip(&grower.leaf_of) {
            *s += *v;
        }
        trees.push(tree);
        report.round_nll.push(loss(&score));
    }

    let model = HazardEnsemble::new(f0, nu, trees, schema.clone())?;
    Ok((model, report))
}
