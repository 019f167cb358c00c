use cwta_core::km::{derive_endpoint, Endpoint};
use cwta_core::rng;
use cwta_core::sim::{
    apply_hazard_ratio, hazard_transform, simulate_subject, simulate_trial, Arm, HealthState, Profile,
    ResponseEffect, TransitionModel, TrialConfig,
};
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = TransitionModel> {
    (
        0.0..0.5f64,
        0.0..0.5f64,
        prop::array::uniform4(0.0..0.5f64),
        0.5..=1.0f64,
        0.0..0.5f64,
    )
        .prop_map(|(a1, a2, b, rho, dropout)| TransitionModel {
            improve_prob: [0.0, a1, a2, 0.0, 0.0],
            worsen_prob: [b[0], b[1], b[2], b[3], 0.0],
            improve_decay: rho,
            horizon_months: 60,
            dropout_rate: dropout,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_respect_the_ladder(model in model_strategy(), seed in any::<u64>(), hr in 0.2..2.0f64) {
        for effect in [ResponseEffect::Unchanged, ResponseEffect::InverseHazard] {
            let cfg = TrialConfig::new(40, hr, model.clone(), seed).with_response_effect(effect);
            let trial = simulate_trial(&cfg).unwrap();
            for s in &trial.subjects {
                prop_assert_eq!(s.states[0], HealthState::SD);
                prop_assert!(s.validate().is_ok());
                let obs = s.observed();
                for w in obs.windows(2) {
                    prop_assert!(w[0].value().abs_diff(w[1].value()) <= 1);
                    if w[0] >= HealthState::PD {
                        prop_assert!(w[1] >= w[0]);
                    }
                    if w[0] == HealthState::DEATH {
                        prop_assert_eq!(w[1], HealthState::DEATH);
                    }
                }
                let pfs = derive_endpoint(s, Endpoint::Pfs);
                let os = derive_endpoint(s, Endpoint::Os);
                prop_assert!(pfs.time <= os.time);
                if os.event {
                    prop_assert!(pfs.event);
                }
            }
        }
    }

    #[test]
    fn hazard_transform_is_monotone(b in 0.0..1.0f64, h1 in 0.05..3.0f64, h2 in 0.05..3.0f64) {
        let (lo, hi) = (h1.min(h2), h1.max(h2));
        prop_assert!(hazard_transform(b, lo) <= hazard_transform(b, hi) + 1e-15);
        prop_assert!((hazard_transform(b, 1.0) - b).abs() < 1e-15);
    }

    #[test]
    fn hazard_ratio_one_is_the_identity(model in model_strategy()) {
        let m = apply_hazard_ratio(&model, 1.0).unwrap();
        for s in 0..5 {
            prop_assert!((m.worsen_prob[s] - model.worsen_prob[s]).abs() < 1e-15);
            prop_assert_eq!(m.improve_prob[s], model.improve_prob[s]);
        }
    }
}

#[test]
fn same_seed_same_trial() {
    let model = Profile::builtin("moderate").unwrap().model;
    let cfg = TrialConfig::new(50, 0.7, model, 99);
    assert_eq!(simulate_trial(&cfg).unwrap(), simulate_trial(&cfg).unwrap());
    let other = TrialConfig { seed: 100, ..cfg.clone() };
    assert_ne!(simulate_trial(&cfg).unwrap().subjects, simulate_trial(&other).unwrap().subjects);
}

#[test]
fn subject_streams_are_independent_of_trial_size() {
    // Subject i draws from mix(seed, i), so a larger trial reproduces the
    // control subjects of a smaller one.
    let model = Profile::builtin("moderate").unwrap().model;
    let small = simulate_trial(&TrialConfig::new(20, 0.7, model.clone(), 5)).unwrap();
    let large = simulate_trial(&TrialConfig::new(40, 0.7, model.clone(), 5)).unwrap();
    assert_eq!(small.subjects[..10], large.subjects[..10]);

    let mut r = rng::stream(rng::mix(5, 3));
    let s = simulate_subject(&model, Arm::Control, 0.7, &mut r).unwrap();
    assert_eq!(s, small.subjects[3]);
}

#[test]
fn null_model_stays_at_baseline() {
    let model = TransitionModel {
        improve_prob: [0.0; 5],
        worsen_prob: [0.0; 5],
        improve_decay: 1.0,
        horizon_months: 60,
        dropout_rate: 0.0,
    };
    let trial = simulate_trial(&TrialConfig::new(10, 0.5, model, 1)).unwrap();
    for s in &trial.subjects {
        assert_eq!(s.states.len(), 61);
        assert!(s.states.iter().all(|&x| x == HealthState::SD));
    }
}
