//! Subject-grouped K-fold cross-validation over (max depth, number of
//! trees) with one-standard-error selection.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{neg_log_likelihood, train, TrainConfig};
use crate::data::{total_exposure, DatasetSchema, Episode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub depths: Vec<usize>,
    pub tree_counts: Vec<usize>,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            depths: vec![1, 2, 3, 4],
            tree_counts: (1..=20).map(|i| i * 25).collect(),
        }
    }
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("depths", &self.depths), ("tree_counts", &self.tree_counts)] {
            if axis.is_empty() || axis[0] == 0 || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "grid {name} must be non-empty, positive and strictly ascending"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub depth: usize,
    pub trees: usize,
    /// Mean over folds of held-out NLL per exposure hour.
    pub mean_nll: f64,
    /// Sample standard deviation of the fold values over √K.
    pub se: f64,
    pub fold_nll: Vec<f64>,
}

impl CvCell {
    pub fn from_folds(depth: usize, trees: usize, fold_nll: Vec<f64>) -> Self {
        let k = fold_nll.len() as f64;
        let mean = fold_nll.iter().sum::<f64>() / k;
        let var = if fold_nll.len() > 1 {
            fold_nll.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Self {
            depth,
            trees,
            mean_nll: mean,
            se: var.sqrt() / k.sqrt(),
            fold_nll,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub cells: Vec<CvCell>,
    pub selected: (usize, usize),
}

/// Partitions episode indices into `k` folds so that every subject lands
/// in exactly one fold. Subjects are shuffled with `seed` and dealt
/// round-robin, so fold sizes differ by at most one subject.
pub fn kfold_split(episodes: &[Episode], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need k >= 2 folds, got {k}")));
    }
    let mut subjects: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, episode) in episodes.iter().enumerate() {
        let id = episode.subject_id.as_str();
        members
            .entry(id)
            .or_insert_with(|| {
                subjects.push(id);
                Vec::new()
            })
            .push(i);
    }
    if subjects.len() < k {
        return Err(Error::TooFewGroups {
            needed: k,
            found: subjects.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (p, subject) in subjects.iter().enumerate() {
        folds[p % k].extend_from_slice(&members[subject]);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// One-standard-error rule: among cells whose mean is within one standard
/// error of the best cell, pick the simplest (fewest trees, then shallowest).
pub fn select_one_se(cells: &[CvCell]) -> Option<(usize, usize)> {
    let simpler = |a: &CvCell, b: &CvCell| (a.trees, a.depth) < (b.trees, b.depth);
    let best = cells
        .iter()
        .filter(|c| !c.mean_nll.is_nan())
        .reduce(|a, b| {
            if b.mean_nll < a.mean_nll || (b.mean_nll == a.mean_nll && simpler(b, a)) {
                b
            } else {
                a
            }
        })?;
    let limit = best.mean_nll + best.se;
    cells
        .iter()
        .filter(|c| c.mean_nll <= limit)
        .reduce(|a, b| if simpler(b, a) { b } else { a })
        .map(|c| (c.depth, c.trees))
}

fn subset(episodes: &[Episode], idx: &[usize]) -> Vec<Episode> {
    idx.iter().map(|&i| episodes[i].clone()).collect()
}

/// Runs the grid. For each depth and fold a single model is trained to the
/// largest tree count; every smaller count is scored on a prefix of it.
pub fn cross_validate(
    episodes: &[Episode],
    schema: &DatasetSchema,
    grid: &CvGrid,
    k: usize,
    seed: u64,
    base: &TrainConfig,
) -> Result<CvResult> {
    grid.validate()?;
    let folds = kfold_split(episodes, k, seed)?;
    let max_trees = *grid.tree_counts.last().expect("validated grid");

    let jobs: Vec<(usize, usize)> = grid
        .depths
        .iter()
        .flat_map(|&d| (0..k).map(move |f| (d, f)))
        .collect();
    let scored: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(depth, fold)| {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != fold)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let train_set = subset(episodes, &train_idx);
            let held_out = subset(episodes, &folds[fold]);
            let config = TrainConfig {
                max_depth: depth,
                num_trees: max_trees,
                ..base.clone()
            };
            let model = train(&train_set, schema, &config)?;
            let exposure = total_exposure(&held_out);
            Ok(grid
                .tree_counts
                .iter()
                .map(|&m| neg_log_likelihood(&model.truncated(m), &held_out) / exposure)
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(grid.depths.len() * grid.tree_counts.len());
    for (d_pos, &depth) in grid.depths.iter().enumerate() {
        for (t_pos, &trees) in grid.tree_counts.iter().enumerate() {
            let fold_nll = (0..k).map(|f| scored[d_pos * k + f][t_pos]).collect();
            cells.push(CvCell::from_folds(depth, trees, fold_nll));
        }
    }
    let selected = select_one_se(&cells)
        .ok_or_else(|| Error::DegenerateData("no finite cross-validation scores".into()))?;
    Ok(CvResult { cells, selected })
}
