mod common;

use common::*;
use hazardforge_core::eval::{
    auct, auct_with, confusion_at, default_bins, episode_score, f1_optimal_threshold,
    flag_outcome, lead_times, roc_pr_curves, Confusion, EpisodeScore, MonitoringTrace,
    SurvivalSubject,
};
use proptest::prelude::*;
use rand::Rng;

fn scored() -> impl Strategy<Value = Vec<EpisodeScore>> {
    (any::<u64>(), 2usize..=50).prop_map(|(seed, n)| random_scores(&mut rng(seed), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn auroc_equals_mann_whitney(scores in scored()) {
        let pos = scores.iter().filter(|s| s.label.is_positive()).count();
        prop_assume!(pos > 0 && pos < scores.len());
        let curves = roc_pr_curves(&scores).unwrap();
        prop_assert_eq!(curves.auroc, mann_whitney(&scores));
    }

    #[test]
    fn f1_optimum_matches_exhaustive_sweep(scores in scored()) {
        prop_assume!(scores.iter().any(|s| s.label.is_positive()));
        let (rho, f1) = f1_optimal_threshold(&scores).unwrap();
        let (smallest, best) = exhaustive_f1(&scores);
        prop_assert!((f1 - best).abs() < 1e-12);
        prop_assert_eq!(rho, smallest);
    }
}

#[test]
fn ten_outcome_f1_auct_fixture() {
    // (score, positive)
    let raw = [
        (0.95, true),
        (0.9, false),
        (0.8, true),
        (0.7, true),
        (0.6, false),
        (0.55, false),
        (0.5, true),
        (0.3, false),
        (0.2, false),
        (0.1, true),
    ];
    let scores: Vec<EpisodeScore> = raw
        .iter()
        .map(|&(score, p)| EpisodeScore {
            score,
            label: label(p),
        })
        .collect();
    // Hand sweep (tp, fp, fn): ρ=.95 (1,0,4) 1/3; .9 (1,1,4) 2/7; .8 (2,1,3) 1/2;
    // .7 (3,1,2) 2/3; .6 (3,2,2) 3/5; .55 (3,3,2) 6/11; .5 (4,3,1) 2/3;
    // .3 (4,4,1) 8/13; .2 (4,5,1) 4/7; .1 (5,5,0) 2/3.
    let (rho, f1) = f1_optimal_threshold(&scores).unwrap();
    assert_eq!(rho, 0.1);
    assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sweep_reproduces_protocol_at_every_rho(seed in any::<u64>(), n in 1usize..30) {
        let mut r = rng(seed);
        let traces: Vec<MonitoringTrace> = (0..n).map(|i| random_trace(&mut r, i)).collect();
        let scores: Vec<EpisodeScore> = traces.iter().map(episode_score).collect();
        let mut rhos: Vec<f64> = (0..=7).map(|k| k as f64 / 10.0).collect();
        rhos.extend(scores.iter().map(|s| s.score));
        rhos.push(f64::INFINITY);
        for rho in rhos {
            let mut sim = Confusion::default();
            for trace in &traces {
                let (outcome, flag_time) = protocol(trace, rho);
                sim.add(outcome);
                let fo = flag_outcome(trace, rho);
                prop_assert_eq!((fo.outcome, fo.flag_time), (outcome, flag_time));
            }
            prop_assert_eq!(confusion_at(&scores, rho), sim);
        }
    }

    #[test]
    fn lead_times_match_step_scan(seed in any::<u64>(), n in 1usize..30, rho_k in 1u8..6) {
        let mut r = rng(seed);
        let rho = f64::from(rho_k) / 10.0;
        let traces: Vec<MonitoringTrace> = (0..n).map(|i| random_trace(&mut r, i)).collect();
        let report = lead_times(&traces, rho, &default_bins());
        let mut expected = Vec::new();
        for trace in &traces {
            let Some(t_event) = trace.first_event_time else { continue };
            if let Some(step) = trace
                .hazard_path
                .iter()
                .take_while(|s| s.start < t_event)
                .find(|s| s.hazard >= rho)
            {
                expected.push((trace.episode_id.clone(), t_event - step.start));
            }
        }
        let got: Vec<(String, f64)> = report.leads.iter().map(|l| (l.episode_id.clone(), l.hours)).collect();
        prop_assert_eq!(&got, &expected);
        prop_assert!(report.leads.iter().all(|l| l.hours >= 0.0));
        let counted: usize = report.histogram.iter().map(|b| b.count).sum();
        prop_assert_eq!(counted, expected.len());
    }

    #[test]
    fn auct_invariant_under_monotone_transform(seed in any::<u64>(), n in 2usize..25) {
        let mut r = rng(seed);
        let subjects: Vec<SurvivalSubject> = (0..n)
            .map(|_| {
                let time = MS + r.random_range(1..40) as f64;
                SurvivalSubject {
                    time,
                    observed: r.random::<bool>(),
                    end: time + r.random_range(0..10) as f64,
                }
            })
            .collect();
        // Dyadic rates keep products exact, so ties are exact ties.
        let rates: Vec<f64> = (0..n).map(|_| r.random_range(1..5) as f64 / 16.0).collect();
        let s = |i: usize, t: f64| (-rates[i] * (t - MS)).exp();
        let a = auct_with(&subjects, s, &default_bins(), MS);
        // Transforms that stay injective in floating point.
        let b = auct_with(&subjects, |i, t| s(i, t).ln(), &default_bins(), MS);
        let c = auct_with(&subjects, |i, t| s(i, t).sqrt(), &default_bins(), MS);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
    }
}

#[test]
fn auct_six_episode_hand_table() {
    // t = 30: no earlier event, no pairs.
    // t = 40: case A; controls B, D, E, F (C left at 35).
    //   Ŝ(40) = exp(-16λ): A e^-8 below B e^-4.8, D e^-1.6, E e^-5.6, F e^-6.4 → 4/4.
    // t = 50: cases A, B; controls D, E (F left at 45).
    //   Ŝ(50) = exp(-26λ): A e^-13, B e^-7.8, D e^-2.6, E e^-9.1.
    //   A<D, A<E, B<D concordant; B>E discordant → 3/4.
    let (model, episodes) = auct_fixture();
    let report = auct(&episodes, &model, &default_bins()).unwrap();
    assert_eq!(report.per_time, vec![(40.0, 1.0), (50.0, 0.75)]);
    let means: Vec<Option<f64>> = report.bins.iter().map(|b| b.mean).collect();
    assert_eq!(means, vec![Some(1.0), Some(0.75), None, None]);
    assert_eq!(report.bins[0].n_times, 1);
}

#[test]
fn auct_tied_survival_counts_half() {
    // Same subjects; E given B's survival so the B–E pair at t = 50 ties.
    let (model, episodes) = auct_fixture();
    let subjects: Vec<SurvivalSubject> = episodes.iter().map(SurvivalSubject::of).collect();
    let rates = [0.5, 0.3, 0.2, 0.1, 0.3, 0.4];
    let _ = model;
    let report = auct_with(&subjects, |i, t| (-rates[i] * (t - MS)).exp(), &default_bins(), MS);
    assert_eq!(report.per_time, vec![(40.0, 1.0), (50.0, 0.875)]);
}
