use serde::{Deserialize, Serialize};

use super::flagging::MonitoringTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadTime {
    pub episode_id: String,
    pub flag_time: f64,
    pub event_time: f64,
    pub hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadTimeReport {
    pub leads: Vec<LeadTime>,
    pub histogram: Vec<HistogramBucket>,
}

/// Hours from the first flag to the first event, for every true positive at
/// `rho`. Leads outside all buckets are listed but not counted.
pub fn lead_times(traces: &[MonitoringTrace], rho: f64, buckets: &[(f64, f64)]) -> LeadTimeReport {
    let leads: Vec<LeadTime> = traces
        .iter()
        .filter_map(|trace| {
            let event_time = trace.first_event_time?;
            let flag_time = trace.flag_time(rho)?;
            Some(LeadTime {
                episode_id: trace.episode_id.clone(),
                flag_time,
                event_time,
                hours: event_time - flag_time,
            })
        })
        .collect();
    let histogram = buckets
        .iter()
        .map(|&(lo, hi)| HistogramBucket {
            lo,
            hi,
            count: leads.iter().filter(|l| l.hours >= lo && l.hours < hi).count(),
        })
        .collect();
    LeadTimeReport { leads, histogram }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::HazardStep;
    use crate::eval::default_bins;

    fn step(start: f64, end: f64, hazard: f64) -> HazardStep {
        HazardStep { start, end, hazard }
    }

    #[test]
    fn crossing_thirty_hours_before_event() {
        let trace = MonitoringTrace::new(
            "a",
            vec![step(24.0, 40.0, 0.05), step(40.0, 80.0, 0.4)],
            Some(70.0),
        )
        .unwrap();
        let report = lead_times(&[trace], 0.3, &default_bins());
        assert_eq!(report.leads[0].hours, 30.0);
        let counts: Vec<usize> = report.histogram.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![0, 1, 0, 0]);
    }

    #[test]
    fn crossing_just_before_event_gives_near_zero() {
        let t = 50.0f64;
        let flag = t.next_down();
        let trace = MonitoringTrace::new(
            "a",
            vec![step(24.0, flag, 0.01), step(flag, 60.0, 0.9)],
            Some(t),
        )
        .unwrap();
        let report = lead_times(&[trace], 0.5, &default_bins());
        assert!(report.leads[0].hours >= 0.0 && report.leads[0].hours < 1e-12);
    }

    #[test]
    fn negatives_and_misses_are_skipped() {
        let neg = MonitoringTrace::new("n", vec![step(24.0, 48.0, 0.9)], None).unwrap();
        let miss = MonitoringTrace::new("m", vec![step(24.0, 48.0, 0.1)], Some(30.0)).unwrap();
        assert!(lead_times(&[neg, miss], 0.5, &default_bins()).leads.is_empty());
    }
}
