//! Evaluation of realtime risk monitoring.
//!
//! An episode is flagged the first time its hazard reaches the threshold
//! `ρ`, after which monitoring stops. A flag followed by an event is a true
//! positive however long the wait; a flag with no event is a false
//! positive; an event with no earlier flag is a false negative; no flag
//! and no event is a true negative.
//!
//! Sweeping `ρ` therefore only needs one number per episode: the largest
//! hazard seen while a flag could still count, i.e. before the first event
//! for positive episodes and over the whole monitored period otherwise.
//! A hazard spike after the event never counts as a timely flag.

mod auct;
mod curves;
mod flagging;
mod lead_time;

pub use auct::{auct, auct_with, AuctBin, AuctReport, SurvivalSubject};
pub use curves::{f1_optimal_threshold, roc_pr_curves, Curves};
pub use flagging::{
    confusion_at, episode_score, flag_outcome, Confusion, EpisodeScore, FlagOutcome, Label,
    MonitoringTrace, Outcome,
};
pub use lead_time::{lead_times, HistogramBucket, LeadTime, LeadTimeReport};

/// Default time buckets (hours since monitoring start) for AUCt and
/// lead-time histograms.
pub fn default_bins() -> Vec<(f64, f64)> {
    vec![(0.0, 24.0), (24.0, 48.0), (48.0, 72.0), (72.0, f64::INFINITY)]
}

/// Parses bucket edges such as `0,24,48,72,inf` into consecutive bins.
pub fn parse_bins(text: &str) -> crate::Result<Vec<(f64, f64)>> {
    let edges = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            if s.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                s.parse::<f64>()
                    .map_err(|_| crate::Error::Parse(format!("bad bin edge `{s}`")))
            }
        })
        .collect::<crate::Result<Vec<f64>>>()?;
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(crate::Error::InvalidConfig(
            "bin edges must be at least two strictly increasing values".into(),
        ));
    }
    Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_parse() {
        assert_eq!(parse_bins("0,24,48,72,inf").unwrap(), default_bins());
        assert!(parse_bins("0,24,12").is_err());
        assert!(parse_bins("5").is_err());
    }
}
