//! The monthly scan uses prefix sums over the full trial. These tests rebuild
//! every month's dataset from explicitly truncated trajectories and check
//! that the answers agree.

use cwta_core::cwta::{weighted_logrank_test, EventFilter, WeightedEventTable};
use cwta_core::harness::{scan_trial, Method};
use cwta_core::km::{derive_endpoints, logrank_test, Endpoint};
use cwta_core::sim::{simulate_trial, Profile, ResponseEffect, SimulatedTrial, TrialConfig};
use proptest::prelude::*;

fn trial(ss: usize, hr: f64, seed: u64) -> SimulatedTrial {
    let model = Profile::builtin("moderate").unwrap().model;
    let cfg = TrialConfig::new(ss, hr, model, seed).with_response_effect(ResponseEffect::InverseHazard);
    simulate_trial(&cfg).unwrap()
}

fn explicit_p(trial: &SimulatedTrial, month: u32) -> [Option<f64>; 3] {
    let t = trial.truncated(month);
    let table = WeightedEventTable::from_trajectories(&t.subjects, EventFilter::Bidirectional);
    let pfs = derive_endpoints(&t.subjects, Endpoint::Pfs);
    let os = derive_endpoints(&t.subjects, Endpoint::Os);
    [
        weighted_logrank_test(&table).ok().map(|r| r.p_value),
        logrank_test(&pfs).ok().map(|r| r.p_value),
        logrank_test(&os).ok().map(|r| r.p_value),
    ]
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-300,
        (None, None) => true,
        _ => false,
    }
}

#[test]
fn prefix_scan_matches_explicit_truncation() {
    for (ss, hr, seed) in [(20, 0.5, 1), (60, 0.7, 2), (150, 0.7, 3), (100, 1.0, 4)] {
        let t = trial(ss, hr, seed);
        let scan = scan_trial(&t, 60);
        for m in 1..=60 {
            let explicit = explicit_p(&t, m);
            for method in Method::ALL {
                let i = method.index();
                let prefix = scan.p_values[i][m as usize - 1];
                assert!(same(prefix, explicit[i]), "{method} month {m}: {prefix:?} vs {:?}", explicit[i]);
            }
        }
    }
}

#[test]
fn no_significance_before_the_first_event() {
    for seed in 0..20 {
        let t = trial(40, 0.6, seed);
        let scan = scan_trial(&t, 60);
        for (method, kind) in [(Method::Pfs, Endpoint::Pfs), (Method::Os, Endpoint::Os)] {
            let first_event = derive_endpoints(&t.subjects, kind)
                .iter()
                .filter(|r| r.event)
                .map(|r| r.time)
                .min();
            if let Some(m) = scan.first_significant_month(method, 0.05) {
                assert!(first_event.is_some_and(|e| e <= m), "{method}: {m} before {first_event:?}");
                assert!(scan.p_values[method.index()][m as usize - 1].unwrap() < 0.05);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn truncation_is_idempotent(seed in any::<u64>(), a in 0u32..=60, b in 0u32..=60) {
        let t = trial(20, 0.7, seed);
        let (hi, lo) = (a.max(b), a.min(b));
        prop_assert_eq!(t.truncated(hi).truncated(lo), t.truncated(lo));
    }
}
