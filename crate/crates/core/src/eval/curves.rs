use serde::{Deserialize, Serialize};

use super::flagging::{Confusion, EpisodeScore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    /// Distinct scores, descending; point `k` of each curve flags every
    /// episode scoring at least `thresholds[k]`.
    pub thresholds: Vec<f64>,
    /// `(fpr, tpr)`, starting at `(0, 0)`.
    pub roc: Vec<(f64, f64)>,
    /// `(recall, precision)` per threshold.
    pub pr: Vec<(f64, f64)>,
    pub auroc: f64,
    pub auc_pr: f64,
}

fn check_scores(outcomes: &[EpisodeScore]) -> Result<(usize, usize)> {
    if outcomes.iter().any(|o| o.score.is_nan()) {
        return Err(Error::InvalidConfig("scores must not be NaN".into()));
    }
    let pos = outcomes.iter().filter(|o| o.label.is_positive()).count();
    Ok((pos, outcomes.len() - pos))
}

/// Cumulative `(threshold, tp, fp)` at each distinct score, descending.
fn sweep(outcomes: &[EpisodeScore]) -> Vec<(f64, usize, usize)> {
    let mut sorted: Vec<&EpisodeScore> = outcomes.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (i, o) in sorted.iter().enumerate() {
        if o.label.is_positive() {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = sorted.get(i + 1).is_none_or(|n| n.score != o.score);
        if last_of_group {
            out.push((o.score, tp, fp));
        }
    }
    out
}

/// ROC and precision-recall curves from varying the flag threshold over
/// every distinct score. Tied scores are flagged together.
pub fn roc_pr_curves(outcomes: &[EpisodeScore]) -> Result<Curves> {
    let (pos, neg) = check_scores(outcomes)?;
    if pos == 0 {
        return Err(Error::SingleClass("negatives"));
    }
    if neg == 0 {
        return Err(Error::SingleClass("positives"));
    }
    let (p, n) = (pos as f64, neg as f64);
    let points = sweep(outcomes);
    let mut curves = Curves {
        thresholds: Vec::with_capacity(points.len()),
        roc: vec![(0.0, 0.0)],
        pr: Vec::with_capacity(points.len()),
        auroc: 0.0,
        auc_pr: 0.0,
    };
    // Trapezoids in integer counts: Σ Δfp·(tp + tp_prev) / 2PN, so the
    // area equals the Mann–Whitney statistic exactly.
    let mut twice_area: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    for (threshold, tp, fp) in points {
        let (tpr, fpr) = (tp as f64 / p, fp as f64 / n);
        let precision = tp as f64 / (tp + fp) as f64;
        curves.thresholds.push(threshold);
        curves.roc.push((fpr, tpr));
        curves.pr.push((tpr, precision));
        twice_area += ((fp - prev_fp) * (tp + prev_tp)) as u128;
        curves.auc_pr += (tpr - prev_recall) * precision;
        (prev_tp, prev_fp) = (tp, fp);
        prev_recall = tpr;
    }
    curves.auroc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(curves)
}

/// Threshold among the distinct scores with the highest F1; ties go to the
/// smallest threshold (earliest flagging). Returns `(rho, f1)`.
pub fn f1_optimal_threshold(outcomes: &[EpisodeScore]) -> Result<(f64, f64)> {
    let (pos, neg) = check_scores(outcomes)?;
    if pos == 0 {
        return Err(Error::SingleClass("negatives"));
    }
    let mut best: Option<(f64, f64)> = None;
    // Ascending thresholds with strict improvement keeps the smallest ρ.
    for (threshold, tp, fp) in sweep(outcomes).into_iter().rev() {
        let c = Confusion {
            tp,
            fp,
            fn_: pos - tp,
            tn: neg - fp,
        };
        let f1 = c.f1();
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((threshold, f1));
        }
    }
    Ok(best.expect("at least one outcome"))
}
