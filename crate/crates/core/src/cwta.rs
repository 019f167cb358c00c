//! Weighted trajectory analysis over ordinal, bidirectional health states.
//!
//! Every observed state change is an event weighted by `Δstate / K`
//! (`K = 4`): worsening is positive, improvement negative. Subjects stay at
//! risk after non-fatal transitions and leave the risk set only on death or
//! censoring.
//!
//! The weighted logrank statistic compares, month by month, the control
//! arm's weighted event sum with its expectation under random arm labels:
//!
//! ```text
//! O1j = Σ control weights      Wj = Σ weights      Qj = Σ weights²
//! pj  = n1j / nj               E1j = Wj · pj
//! Vj  = pj (1 − pj) (nj Qj − Wj²) / (nj − 1)
//! z   = Σ (O1j − E1j) / sqrt(Σ Vj)
//! ```
//!
//! `Vj` is the without-replacement variance of the control arm's share of
//! the month's weights. With unit weights `nj Qj − Wj² = dj (nj − dj)` and
//! the statistic is the ordinary logrank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::km::TimeToEventRecord;
use crate::sim::{Arm, SimulatedTrial, SubjectTrajectory, MAX_STATE};
use crate::stats::TestResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEvent {
    pub month: u32,
    pub subject: usize,
    pub arm: Arm,
    pub weight: f64,
}

/// Which transitions enter the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EventFilter {
    #[default]
    Bidirectional,
    /// Drop improvements; sensitivity analysis only.
    WorseningOnly,
}

/// Aggregates of one month's events.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonthSums {
    pub month: u32,
    /// Weight sums per arm.
    pub weight: [f64; 2],
    /// Sum of squared weights over both arms.
    pub weight_sq: f64,
    pub at_risk: [usize; 2],
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEventTable {
    /// Sorted by `(month, subject)`.
    pub events: Vec<WeightedEvent>,
    /// `at_risk[m - 1]` holds the per-arm counts for month `m`.
    pub at_risk: Vec<[usize; 2]>,
}

impl WeightedEventTable {
    /// Builds a table from arbitrary events and risk sets, checking the
    /// structural invariants.
    pub fn new(mut events: Vec<WeightedEvent>, at_risk: Vec<[usize; 2]>) -> Result<Self> {
        events.sort_by_key(|e| (e.month, e.subject));
        for w in events.windows(2) {
            if w[0].month == w[1].month && w[0].subject == w[1].subject {
                return Err(Error::InvalidInput(format!(
                    "subject {} has two events in month {}",
                    w[0].subject, w[0].month
                )));
            }
        }
        for e in &events {
            if e.month == 0 || e.month as usize > at_risk.len() {
                return Err(Error::InvalidInput(format!("event month {} has no risk set", e.month)));
            }
            if !(e.weight != 0.0 && e.weight.abs() <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "event weight {} must be nonzero with magnitude <= 1",
                    e.weight
                )));
            }
        }
        for w in at_risk.windows(2) {
            if w[1][0] > w[0][0] || w[1][1] > w[0][1] {
                return Err(Error::InvalidInput("at-risk counts must not increase".into()));
            }
        }
        Ok(WeightedEventTable { events, at_risk })
    }

    pub fn from_trajectories(subjects: &[SubjectTrajectory], filter: EventFilter) -> Self {
        let horizon = subjects
            .iter()
            .map(|s| s.last_observed_month())
            .max()
            .unwrap_or(0) as usize;
        let mut at_risk = vec![[0usize; 2]; horizon];
        let mut events = Vec::new();
        for (idx, subj) in subjects.iter().enumerate() {
            let obs = subj.observed();
            let arm = subj.arm.index();
            for m in 1..obs.len() {
                let (before, after) = (obs[m - 1].value(), obs[m].value());
                if before == MAX_STATE {
                    break;
                }
                at_risk[m - 1][arm] += 1;
                if before != after {
                    let delta = after as f64 - before as f64;
                    if filter == EventFilter::WorseningOnly && delta < 0.0 {
                        continue;
                    }
                    events.push(WeightedEvent {
                        month: m as u32,
                        subject: idx,
                        arm: subj.arm,
                        weight: delta / MAX_STATE as f64,
                    });
                }
            }
        }
        events.sort_by_key(|e| (e.month, e.subject));
        WeightedEventTable { events, at_risk }
    }

    /// Unit-weight table of terminal events: the logrank data re-expressed
    /// as a weighted table.
    pub fn from_time_to_event(records: &[TimeToEventRecord]) -> Self {
        let horizon = records.iter().map(|r| r.time).max().unwrap_or(0) as usize;
        let mut at_risk = vec![[0usize; 2]; horizon];
        let mut events = Vec::new();
        for (idx, r) in records.iter().enumerate() {
            for slot in at_risk.iter_mut().take(r.time as usize) {
                slot[r.arm.index()] += 1;
            }
            if r.event {
                events.push(WeightedEvent {
                    month: r.time,
                    subject: idx,
                    arm: r.arm,
                    weight: 1.0,
                });
            }
        }
        events.sort_by_key(|e| (e.month, e.subject));
        WeightedEventTable { events, at_risk }
    }

    pub fn horizon(&self) -> u32 {
        self.at_risk.len() as u32
    }

    /// One entry per month `1..=horizon`, including months without events.
    pub fn month_sums(&self) -> Vec<MonthSums> {
        let mut sums: Vec<MonthSums> = self
            .at_risk
            .iter()
            .enumerate()
            .map(|(i, &n)| MonthSums {
                month: i as u32 + 1,
                at_risk: n,
                ..Default::default()
            })
            .collect();
        for e in &self.events {
            let s = &mut sums[e.month as usize - 1];
            s.weight[e.arm.index()] += e.weight;
            s.weight_sq += e.weight * e.weight;
            s.events += 1;
        }
        sums
    }

    /// Restricts the table to months `1..=month`.
    pub fn truncated(&self, month: u32) -> Self {
        let keep = (month as usize).min(self.at_risk.len());
        WeightedEventTable {
            events: self.events.iter().filter(|e| e.month <= month).copied().collect(),
            at_risk: self.at_risk[..keep].to_vec(),
        }
    }
}

pub fn extract_weighted_events(trial: &SimulatedTrial) -> WeightedEventTable {
    WeightedEventTable::from_trajectories(&trial.subjects, EventFilter::Bidirectional)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveStep {
    pub month: u32,
    pub value: f64,
    pub at_risk: [usize; 2],
}

/// Product-limit analog of the survival curve for one arm. Starts at 1,
/// falls with net worsening and rises with net improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCurve {
    pub arm: Arm,
    pub steps: Vec<CurveStep>,
}

pub fn cwta_curve(table: &WeightedEventTable, arm: Arm) -> Result<TrajectoryCurve> {
    let a = arm.index();
    let initial = table.at_risk.first().copied().unwrap_or([0, 0]);
    if initial[a] == 0 {
        return Err(Error::InvalidInput(format!("arm `{}` has no subjects", arm.as_str())));
    }
    let mut value = 1.0;
    let mut steps = vec![CurveStep {
        month: 0,
        value,
        at_risk: initial,
    }];
    for s in table.month_sums() {
        let w = s.weight[a];
        if w != 0.0 {
            let n = s.at_risk[a];
            if n == 0 {
                return Err(Error::Internal(format!("month {}: events with an empty risk set", s.month)));
            }
            value *= 1.0 - w / n as f64;
        }
        steps.push(CurveStep {
            month: s.month,
            value,
            at_risk: s.at_risk,
        });
    }
    Ok(TrajectoryCurve { arm, steps })
}

/// Per-month `(O1 - E1, V)` contributions; zero for months without events.
pub fn weighted_logrank_terms(table: &WeightedEventTable) -> Vec<(u32, f64, f64)> {
    table
        .month_sums()
        .into_iter()
        .map(|s| {
            if s.events == 0 {
                return (s.month, 0.0, 0.0);
            }
            let n = s.at_risk[0] + s.at_risk[1];
            let total = s.weight[0] + s.weight[1];
            if n == 0 {
                return (s.month, 0.0, 0.0);
            }
            let (nf, p) = (n as f64, s.at_risk[0] as f64 / n as f64);
            let o_e = s.weight[0] - total * p;
            let v = if n > 1 {
                // Clamp rounding noise: n Q - W² >= 0 by Cauchy-Schwarz.
                p * (1.0 - p) * (nf * s.weight_sq - total * total).max(0.0) / (nf - 1.0)
            } else {
                0.0
            };
            (s.month, o_e, v)
        })
        .collect()
}

pub fn weighted_logrank_test(table: &WeightedEventTable) -> Result<TestResult> {
    let first = table.at_risk.first().copied().unwrap_or([0, 0]);
    if first[0] == 0 || first[1] == 0 {
        return Err(Error::InvalidInput("weighted logrank test needs both arms".into()));
    }
    if table.events.is_empty() {
        return Err(Error::DegenerateTest("no events"));
    }
    let (o_e, v) = weighted_logrank_terms(table)
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (_, o, v)| (a + o, b + v));
    TestResult::from_sums(o_e, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::HealthState;

    fn traj(v: &[u8], arm: Arm) -> SubjectTrajectory {
        let states = v.iter().map(|&x| HealthState::new(x).unwrap()).collect();
        SubjectTrajectory::new(states, None, arm).unwrap()
    }

    #[test]
    fn extraction_examples() {
        let t = WeightedEventTable::from_trajectories(&[traj(&[2, 2, 2], Arm::Control)], EventFilter::Bidirectional);
        assert!(t.events.is_empty());
        assert_eq!(t.at_risk, vec![[1, 0], [1, 0]]);

        let t = WeightedEventTable::from_trajectories(
            &[traj(&[2, 3, 4, 4, 4], Arm::Control)],
            EventFilter::Bidirectional,
        );
        let ev: Vec<_> = t.events.iter().map(|e| (e.month, e.weight)).collect();
        assert_eq!(ev, vec![(1, 0.25), (2, 0.25)]);
        assert_eq!(t.at_risk, vec![[1, 0], [1, 0], [0, 0], [0, 0]]);

        let t = WeightedEventTable::from_trajectories(&[traj(&[2, 1, 0, 1], Arm::Control)], EventFilter::Bidirectional);
        let ev: Vec<_> = t.events.iter().map(|e| (e.month, e.weight)).collect();
        assert_eq!(ev, vec![(1, -0.25), (2, -0.25), (3, 0.25)]);

        let t = WeightedEventTable::from_trajectories(&[traj(&[2, 1, 0, 1], Arm::Control)], EventFilter::WorseningOnly);
        assert_eq!(t.events.len(), 1);
    }

    #[test]
    fn dropout_leaves_risk_set() {
        let states = [2u8, 2, 2, 3, 4].iter().map(|&x| HealthState::new(x).unwrap()).collect();
        let s = SubjectTrajectory::new(states, Some(2), Arm::Experimental).unwrap();
        let t = WeightedEventTable::from_trajectories(&[s], EventFilter::Bidirectional);
        assert!(t.events.is_empty());
        assert_eq!(t.at_risk, vec![[0, 1], [0, 1]]);
    }

    fn four_subject_table(events: Vec<WeightedEvent>, months: usize) -> WeightedEventTable {
        WeightedEventTable::new(events, vec![[4, 0]; months]).unwrap()
    }

    #[test]
    fn curve_examples() {
        let t = four_subject_table(vec![], 3);
        let c = cwta_curve(&t, Arm::Control).unwrap();
        assert!(c.steps.iter().all(|s| s.value == 1.0));

        let ev = |month, weight| WeightedEvent {
            month,
            subject: 0,
            arm: Arm::Control,
            weight,
        };
        let t = four_subject_table(vec![ev(1, 0.25)], 1);
        let c = cwta_curve(&t, Arm::Control).unwrap();
        assert_eq!(c.steps[1].value, 0.9375);

        let t = four_subject_table(vec![ev(1, 0.25), ev(2, -0.25)], 2);
        let c = cwta_curve(&t, Arm::Control).unwrap();
        assert!((c.steps[2].value - 0.9375 * 1.0625).abs() < 1e-15);
        assert!((c.steps[2].value - 0.99609).abs() < 5e-6);
        assert!(c.steps[2].value > c.steps[1].value);

        assert!(cwta_curve(&t, Arm::Experimental).is_err());
    }

    #[test]
    fn weighted_single_event() {
        let t = WeightedEventTable::new(
            vec![WeightedEvent {
                month: 1,
                subject: 0,
                arm: Arm::Control,
                weight: 0.25,
            }],
            vec![[2, 2]],
        )
        .unwrap();
        let r = weighted_logrank_test(&t).unwrap();
        assert_eq!(r.observed_minus_expected, 0.125);
        assert!((r.variance - 0.015625).abs() < 1e-17);
        assert!((r.z - 1.0).abs() < 1e-12);
        assert!((r.p_value - 0.3173).abs() < 5e-5);
    }

    #[test]
    fn table_validation() {
        let ev = |month, subject| WeightedEvent {
            month,
            subject,
            arm: Arm::Control,
            weight: 0.5,
        };
        assert!(WeightedEventTable::new(vec![ev(1, 0), ev(1, 0)], vec![[2, 2]]).is_err());
        assert!(WeightedEventTable::new(vec![ev(2, 0)], vec![[2, 2]]).is_err());
        assert!(WeightedEventTable::new(vec![], vec![[1, 1], [2, 1]]).is_err());
        let mut bad = ev(1, 0);
        bad.weight = 0.0;
        assert!(WeightedEventTable::new(vec![bad], vec![[1, 1]]).is_err());
    }

    #[test]
    fn no_events_is_degenerate() {
        let t = WeightedEventTable::new(vec![], vec![[2, 2]]).unwrap();
        assert!(matches!(weighted_logrank_test(&t), Err(Error::DegenerateTest(_))));
    }
}
