//! Fixtures and oracles shared by the integration tests.
#![allow(dead_code)]

use cwta_core::km::{logrank_test, TimeToEventRecord};
use cwta_core::sim::{Arm, HealthState, SubjectTrajectory};

pub fn rec(time: u32, event: bool, arm: Arm) -> TimeToEventRecord {
    TimeToEventRecord { time, event, arm }
}

pub fn traj(states: &[u8], dropout: Option<u32>, arm: Arm) -> SubjectTrajectory {
    let states = states.iter().map(|&s| HealthState::new(s).unwrap()).collect();
    SubjectTrajectory::new(states, dropout, arm).unwrap()
}

fn abs_z(records: &[TimeToEventRecord]) -> f64 {
    logrank_test(records).map_or(0.0, |r| r.z.abs())
}

/// Exact two-sided permutation p-value of the logrank statistic: the share
/// of all relabellings with the observed arm sizes whose |z| is at least
/// the observed one. Degenerate relabellings count as z = 0.
pub fn permutation_p(records: &[TimeToEventRecord]) -> f64 {
    let n = records.len();
    assert!(n <= 16, "enumeration is exponential");
    let n_control = records.iter().filter(|r| r.arm == Arm::Control).count() as u32;
    let observed = abs_z(records);
    let (mut hits, mut total) = (0u64, 0u64);
    let mut relabelled = records.to_vec();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != n_control {
            continue;
        }
        for (i, r) in relabelled.iter_mut().enumerate() {
            r.arm = if mask >> i & 1 == 1 { Arm::Control } else { Arm::Experimental };
        }
        total += 1;
        if abs_z(&relabelled) >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

const C: Arm = Arm::Control;
const E: Arm = Arm::Experimental;

/// Product-limit fixtures with hand-computed `S(t)` values.
pub fn km_fixtures() -> Vec<(Vec<TimeToEventRecord>, Vec<(u32, f64)>)> {
    vec![
        (vec![rec(1, true, C), rec(2, true, C)], vec![(0, 1.0), (1, 0.5), (2, 0.0)]),
        (
            vec![rec(1, true, C), rec(2, false, C), rec(3, true, C)],
            vec![(1, 2.0 / 3.0), (2, 2.0 / 3.0), (3, 0.0)],
        ),
        // Tied events with a censoring in the same month.
        (
            vec![rec(2, true, C), rec(2, true, C), rec(2, false, C), rec(3, true, C), rec(5, false, C)],
            vec![(1, 1.0), (2, 0.6), (3, 0.3), (5, 0.3), (60, 0.3)],
        ),
        (vec![rec(4, false, C), rec(9, false, C)], vec![(0, 1.0), (9, 1.0)]),
        (
            vec![rec(1, false, C), rec(1, true, C), rec(1, true, C), rec(4, true, C), rec(4, false, C), rec(6, true, C)],
            vec![(1, 4.0 / 6.0), (3, 4.0 / 6.0), (4, 4.0 / 9.0), (5, 4.0 / 9.0), (6, 0.0)],
        ),
        (vec![rec(3, true, E)], vec![(2, 1.0), (3, 0.0)]),
    ]
}

/// Two-arm fixtures with hand-tabulated `(O1, E1, V)`.
pub fn logrank_fixtures() -> Vec<(Vec<TimeToEventRecord>, [f64; 3])> {
    vec![
        (
            vec![
                rec(1, true, C),
                rec(3, true, C),
                rec(4, false, C),
                rec(6, true, C),
                rec(2, true, E),
                rec(5, false, E),
                rec(7, true, E),
                rec(8, false, E),
            ],
            [3.0, 37.0 / 21.0, 853.0 / 882.0],
        ),
        // Three tied events at month 2.
        (
            vec![
                rec(2, true, C),
                rec(2, true, C),
                rec(4, false, C),
                rec(2, true, E),
                rec(3, true, E),
                rec(5, false, E),
            ],
            [2.0, 11.0 / 6.0, 121.0 / 180.0],
        ),
        (
            vec![rec(1, true, C), rec(1, false, E)],
            [1.0, 0.5, 0.25],
        ),
    ]
}

/// Up to twelve subjects each, for the permutation oracle.
pub fn permutation_fixtures() -> Vec<Vec<TimeToEventRecord>> {
    vec![
        logrank_fixtures().swap_remove(0).0,
        vec![
            rec(1, true, C),
            rec(2, true, C),
            rec(2, true, C),
            rec(3, true, C),
            rec(4, false, C),
            rec(6, true, C),
            rec(3, true, E),
            rec(5, true, E),
            rec(7, false, E),
            rec(8, true, E),
            rec(9, false, E),
            rec(10, true, E),
        ],
        vec![
            rec(2, true, C),
            rec(4, true, C),
            rec(5, true, C),
            rec(7, false, C),
            rec(9, true, C),
            rec(10, false, C),
            rec(1, true, E),
            rec(3, false, E),
            rec(6, true, E),
            rec(8, true, E),
            rec(11, true, E),
            rec(12, false, E),
        ],
    ]
}
