//! PFS/OS endpoints, the Kaplan-Meier product-limit estimator and the
//! two-sample logrank test.
//!
//! Times are integer months. When an event and a censoring share a month,
//! the censored subject still counts as at risk for that month's events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Arm, HealthState, SubjectTrajectory};
use crate::stats::TestResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    /// Progression-free survival: first month in PD or worse.
    Pfs,
    /// Overall survival: first month dead.
    Os,
}

impl Endpoint {
    fn threshold(self) -> HealthState {
        match self {
            Endpoint::Pfs => HealthState::PD,
            Endpoint::Os => HealthState::DEATH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeToEventRecord {
    pub time: u32,
    pub event: bool,
    pub arm: Arm,
}

impl TimeToEventRecord {
    /// Administrative censoring at `month`.
    pub fn truncated(self, month: u32) -> Self {
        if self.time > month {
            TimeToEventRecord {
                time: month,
                event: false,
                arm: self.arm,
            }
        } else {
            self
        }
    }
}

pub fn derive_endpoint(traj: &SubjectTrajectory, kind: Endpoint) -> TimeToEventRecord {
    let threshold = kind.threshold();
    let observed = traj.observed();
    let first = observed
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &s)| s >= threshold)
        .map(|(m, _)| m as u32);
    match first {
        Some(m) => TimeToEventRecord {
            time: m,
            event: true,
            arm: traj.arm,
        },
        None => TimeToEventRecord {
            time: traj.last_observed_month().max(1),
            event: false,
            arm: traj.arm,
        },
    }
}

pub fn derive_endpoints(subjects: &[SubjectTrajectory], kind: Endpoint) -> Vec<TimeToEventRecord> {
    subjects.iter().map(|s| derive_endpoint(s, kind)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: u32,
    pub survival: f64,
    pub at_risk: usize,
    pub events: usize,
}

/// Product-limit curve; one step per distinct event time. Survival is 1
/// before the first step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
}

impl KmCurve {
    /// Right-continuous survival at `t`.
    pub fn survival_at(&self, t: u32) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.time <= t)
            .last()
            .map_or(1.0, |s| s.survival)
    }
}

/// `(time, events, at_risk)` for every distinct event time, ascending.
fn event_table<'a>(records: impl Iterator<Item = &'a TimeToEventRecord>) -> Vec<(u32, usize, usize)> {
    let mut sorted: Vec<(u32, bool)> = records.map(|r| (r.time, r.event)).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let t = sorted[i].0;
        let at_risk = n - i;
        let mut events = 0;
        while i < n && sorted[i].0 == t {
            events += sorted[i].1 as usize;
            i += 1;
        }
        if events > 0 {
            out.push((t, events, at_risk));
        }
    }
    out
}

pub fn km_estimate(records: &[TimeToEventRecord]) -> Result<KmCurve> {
    if records.is_empty() {
        return Err(Error::InvalidInput("Kaplan-Meier needs at least one record".into()));
    }
    let mut survival = 1.0;
    let steps = event_table(records.iter())
        .into_iter()
        .map(|(time, events, at_risk)| {
            survival *= 1.0 - events as f64 / at_risk as f64;
            KmStep {
                time,
                survival,
                at_risk,
                events,
            }
        })
        .collect();
    Ok(KmCurve { steps })
}

pub fn km_estimate_arm(records: &[TimeToEventRecord], arm: Arm) -> Result<KmCurve> {
    let subset: Vec<_> = records.iter().filter(|r| r.arm == arm).copied().collect();
    km_estimate(&subset)
}

/// Per-event-time contribution to the logrank sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogrankTerm {
    pub time: u32,
    pub observed: f64,
    pub expected: f64,
    pub variance: f64,
}

/// Logrank contributions at each distinct event time, with arm 1 = control.
pub fn logrank_terms(records: &[TimeToEventRecord]) -> Result<Vec<LogrankTerm>> {
    let mut per_arm = [0usize; 2];
    for r in records {
        per_arm[r.arm.index()] += 1;
    }
    if per_arm[0] == 0 || per_arm[1] == 0 {
        return Err(Error::InvalidInput("logrank test needs both arms".into()));
    }
    // Counts per month: (events arm1, events total, leaving arm1, leaving total).
    let max_t = records.iter().map(|r| r.time).max().unwrap_or(0) as usize;
    let mut d1 = vec![0usize; max_t + 1];
    let mut d = vec![0usize; max_t + 1];
    let mut out1 = vec![0usize; max_t + 1];
    let mut out = vec![0usize; max_t + 1];
    for r in records {
        let t = r.time as usize;
        let control = r.arm == Arm::Control;
        if r.event {
            d[t] += 1;
            d1[t] += control as usize;
        }
        out[t] += 1;
        out1[t] += control as usize;
    }
    let (mut n1, mut n) = (per_arm[0], records.len());
    let mut terms = Vec::new();
    for t in 0..=max_t {
        if d[t] > 0 {
            let (nf, df) = (n as f64, d[t] as f64);
            let p = n1 as f64 / nf;
            let variance = if n > 1 {
                df * p * (1.0 - p) * (nf - df) / (nf - 1.0)
            } else {
                0.0
            };
            terms.push(LogrankTerm {
                time: t as u32,
                observed: d1[t] as f64,
                expected: df * p,
                variance,
            });
        }
        n1 -= out1[t];
        n -= out[t];
    }
    Ok(terms)
}

pub fn logrank_test(records: &[TimeToEventRecord]) -> Result<TestResult> {
    let terms = logrank_terms(records)?;
    if terms.is_empty() {
        return Err(Error::DegenerateTest("no events"));
    }
    let o_e: f64 = terms.iter().map(|t| t.observed - t.expected).sum();
    let v: f64 = terms.iter().map(|t| t.variance).sum();
    TestResult::from_sums(o_e, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(time: u32, event: bool, arm: Arm) -> TimeToEventRecord {
        TimeToEventRecord { time, event, arm }
    }

    fn traj(v: &[u8], dropout: Option<u32>) -> SubjectTrajectory {
        let states = v.iter().map(|&x| HealthState::new(x).unwrap()).collect();
        SubjectTrajectory::new(states, dropout, Arm::Experimental).unwrap()
    }

    #[test]
    fn endpoint_examples() {
        let t = traj(&[2, 2, 3, 4], None);
        assert_eq!(derive_endpoint(&t, Endpoint::Pfs), rec(2, true, Arm::Experimental));
        assert_eq!(derive_endpoint(&t, Endpoint::Os), rec(3, true, Arm::Experimental));

        let mut v = vec![2, 1];
        v.extend(std::iter::repeat_n(0, 59));
        let t = traj(&v, None);
        assert_eq!(derive_endpoint(&t, Endpoint::Pfs), rec(60, false, Arm::Experimental));
        assert_eq!(derive_endpoint(&t, Endpoint::Os), rec(60, false, Arm::Experimental));

        let t = traj(&[2; 61], Some(5));
        assert_eq!(derive_endpoint(&t, Endpoint::Pfs), rec(5, false, Arm::Experimental));

        // Progression after dropout is not seen.
        let t = traj(&[2, 2, 2, 3], Some(2));
        assert_eq!(derive_endpoint(&t, Endpoint::Pfs), rec(2, false, Arm::Experimental));
    }

    #[test]
    fn km_examples() {
        let c = km_estimate(&[rec(1, true, Arm::Control), rec(2, true, Arm::Control)]).unwrap();
        assert_eq!(c.survival_at(0), 1.0);
        assert_eq!(c.survival_at(1), 0.5);
        assert_eq!(c.survival_at(2), 0.0);

        let c = km_estimate(&[
            rec(1, true, Arm::Control),
            rec(2, false, Arm::Control),
            rec(3, true, Arm::Control),
        ])
        .unwrap();
        assert!((c.survival_at(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.survival_at(2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.survival_at(3), 0.0);

        let c = km_estimate(&[rec(4, false, Arm::Control), rec(9, false, Arm::Control)]).unwrap();
        assert!(c.steps.is_empty());
        assert_eq!(c.survival_at(60), 1.0);

        assert!(km_estimate(&[]).is_err());
    }

    #[test]
    fn censored_at_event_time_stays_at_risk() {
        let c = km_estimate(&[rec(2, true, Arm::Control), rec(2, false, Arm::Control)]).unwrap();
        assert_eq!(c.steps[0].at_risk, 2);
        assert_eq!(c.steps[0].survival, 0.5);
    }

    #[test]
    fn logrank_single_event() {
        let r = logrank_test(&[rec(1, true, Arm::Control), rec(1, false, Arm::Experimental)]).unwrap();
        assert_eq!(r.observed_minus_expected, 0.5);
        assert_eq!(r.variance, 0.25);
        assert_eq!(r.z, 1.0);
        assert!((r.p_value - 0.3173).abs() < 5e-5);
    }

    #[test]
    fn logrank_mirrored_arms() {
        let mut rs = Vec::new();
        for (t, e) in [(3, true), (5, false), (7, true), (7, true)] {
            rs.push(rec(t, e, Arm::Control));
            rs.push(rec(t, e, Arm::Experimental));
        }
        let r = logrank_test(&rs).unwrap();
        assert!(r.observed_minus_expected.abs() < 1e-15);
        assert!(r.statistic < 1e-30);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logrank_degenerate_and_invalid() {
        let none = [rec(5, false, Arm::Control), rec(5, false, Arm::Experimental)];
        assert!(matches!(logrank_test(&none), Err(Error::DegenerateTest(_))));
        let one_arm = [rec(5, true, Arm::Control)];
        assert!(matches!(logrank_test(&one_arm), Err(Error::InvalidInput(_))));
        // Last subject standing dies alone: n = 1 contributes no variance.
        let lone = [rec(1, false, Arm::Control), rec(4, true, Arm::Experimental)];
        assert!(matches!(logrank_test(&lone), Err(Error::DegenerateTest(_))));
    }
}
