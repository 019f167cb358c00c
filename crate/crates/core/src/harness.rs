//! Monte Carlo experiment grids: power, 80%-power sample size and
//! time-to-first-significance.
//!
//! A replicate is one simulated trial analysed at every month `m` as if the
//! study were stopped there (subjects still under observation are censored
//! at `m`). Truncation leaves every risk set and event at months `<= m`
//! untouched, so the month-`m` statistic is the prefix sum of the per-month
//! contributions of the full trial; the scan is linear in the horizon.
//! `tests/truncation.rs` checks this against explicit re-truncation.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cwta::{cwta_curve, weighted_logrank_terms, weighted_logrank_test, EventFilter, TrajectoryCurve, WeightedEventTable};
use crate::error::{Error, Result};
use crate::km::{derive_endpoints, km_estimate_arm, logrank_terms, logrank_test, Endpoint, KmCurve, TimeToEventRecord};
use crate::rng;
use crate::sim::{simulate_trial, Arm, ResponseEffect, SubjectTrajectory, SimulatedTrial, TransitionModel, TrialConfig};
use crate::stats::{self, welch_t_test, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Cwta,
    Pfs,
    Os,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cwta, Method::Pfs, Method::Os];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cwta => "CWTA",
            Method::Pfs => "PFS",
            Method::Os => "OS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CWTA" => Ok(Method::Cwta),
            "PFS" => Ok(Method::Pfs),
            "OS" => Ok(Method::Os),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// Cumulative per-month p-values for the three methods. `None` marks a
/// month where the test is degenerate (no events yet, or zero variance).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScan {
    pub p_values: [Vec<Option<f64>>; 3],
}

impl TrialScan {
    pub fn first_significant_month(&self, method: Method, alpha: f64) -> Option<u32> {
        self.p_values[method.index()]
            .iter()
            .position(|p| p.is_some_and(|p| p < alpha))
            .map(|i| i as u32 + 1)
    }

    pub fn final_p(&self, method: Method) -> Option<f64> {
        self.p_values[method.index()].last().copied().flatten()
    }
}

fn prefix_p_values(horizon: usize, terms: impl Iterator<Item = (u32, f64, f64)>) -> Vec<Option<f64>> {
    let mut by_month = vec![(0.0, 0.0); horizon];
    for (m, o, v) in terms {
        if (1..=horizon).contains(&(m as usize)) {
            by_month[m as usize - 1].0 += o;
            by_month[m as usize - 1].1 += v;
        }
    }
    let (mut o, mut v) = (0.0, 0.0);
    by_month
        .into_iter()
        .map(|(dm, dv)| {
            o += dm;
            v += dv;
            TestResult::from_sums(o, v).ok().map(|r| r.p_value)
        })
        .collect()
}

fn logrank_series(records: &[TimeToEventRecord], horizon: usize) -> Vec<Option<f64>> {
    match logrank_terms(records) {
        Ok(terms) => prefix_p_values(
            horizon,
            terms
                .into_iter()
                .map(|t| (t.time, t.observed - t.expected, t.variance)),
        ),
        Err(_) => vec![None; horizon],
    }
}

/// Monthly significance scan of one trial over months `1..=horizon`.
pub fn scan_trial(trial: &SimulatedTrial, horizon: u32) -> TrialScan {
    let h = horizon as usize;
    let pfs = derive_endpoints(&trial.subjects, Endpoint::Pfs);
    let os = derive_endpoints(&trial.subjects, Endpoint::Os);
    let table = WeightedEventTable::from_trajectories(&trial.subjects, EventFilter::Bidirectional);
    let both_arms = table.at_risk.first().is_some_and(|n| n[0] > 0 && n[1] > 0);
    let cwta = if both_arms {
        prefix_p_values(h, weighted_logrank_terms(&table).into_iter())
    } else {
        vec![None; h]
    };
    TrialScan {
        p_values: [cwta, logrank_series(&pfs, h), logrank_series(&os, h)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    /// p-value at the final month; `None` when degenerate.
    pub final_p: Option<f64>,
    pub first_significant_month: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub hazard_ratio: f64,
    pub sample_size: usize,
    /// Indexed by [`Method::index`].
    pub outcomes: [MethodOutcome; 3],
}

impl ReplicateResult {
    pub fn outcome(&self, method: Method) -> &MethodOutcome {
        &self.outcomes[method.index()]
    }
}

/// Fan-out policy for replicate execution. Results never depend on it.
#[derive(Clone)]
pub struct Executor {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.pool {
            None => write!(f, "Executor(sequential)"),
            Some(p) => write!(f, "Executor({} workers)", p.current_num_threads()),
        }
    }
}

impl Executor {
    pub fn sequential() -> Self {
        Executor { pool: None }
    }

    /// `workers == 0` uses one thread per core; `1` runs inline.
    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::param("workers", e.to_string()))?;
        Ok(Executor {
            pool: Some(Arc::new(pool)),
        })
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

/// One grid point's worth of replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateRun {
    pub hazard_ratio: f64,
    pub sample_size: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub response_effect: ResponseEffect,
}

impl ReplicateRun {
    /// Seed of replicate `r`: `mix(mix(mix(master, hr bits), ss), r)`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        rng::mix_all(
            self.master_seed,
            &[self.hazard_ratio.to_bits(), self.sample_size as u64, r as u64],
        )
    }

    pub fn trial_config(&self, model: &TransitionModel, r: usize) -> TrialConfig {
        TrialConfig::new(self.sample_size, self.hazard_ratio, model.clone(), self.replicate_seed(r))
            .with_response_effect(self.response_effect)
    }
}

pub fn run_replicate(run: &ReplicateRun, model: &TransitionModel, r: usize) -> Result<ReplicateResult> {
    let trial = simulate_trial(&run.trial_config(model, r))?;
    let scan = scan_trial(&trial, model.horizon_months);
    let outcomes = Method::ALL.map(|m| MethodOutcome {
        final_p: scan.final_p(m),
        first_significant_month: scan.first_significant_month(m, run.alpha),
    });
    Ok(ReplicateResult {
        replicate: r,
        hazard_ratio: run.hazard_ratio,
        sample_size: run.sample_size,
        outcomes,
    })
}

pub fn run_replicates(run: &ReplicateRun, model: &TransitionModel, exec: &Executor) -> Result<Vec<ReplicateResult>> {
    if run.replicates == 0 {
        return Err(Error::param("replicates", "must be at least 1"));
    }
    if !(run.alpha > 0.0 && run.alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0,1)"));
    }
    // Surface config errors once rather than per replicate.
    run.trial_config(model, 0).validate()?;
    exec.map(run.replicates, |r| run_replicate(run, model, r))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub method: Method,
    pub hazard_ratio: f64,
    pub sample_size: usize,
    pub power: f64,
    pub replicates: usize,
}

/// Fraction of replicates whose final p-value is below `alpha`. Degenerate
/// replicates count as non-significant.
pub fn estimate_power(results: &[ReplicateResult], method: Method, alpha: f64) -> Result<PowerEstimate> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidInput("no replicate results".into()))?;
    let hits = results
        .iter()
        .filter(|r| r.outcome(method).final_p.is_some_and(|p| p < alpha))
        .count();
    Ok(PowerEstimate {
        method,
        hazard_ratio: first.hazard_ratio,
        sample_size: first.sample_size,
        power: hits as f64 / results.len() as f64,
        replicates: results.len(),
    })
}

/// Sample size at which the power curve first reaches `target`.
///
/// Points are sorted by sample size, smoothed with pool-adjacent-violators
/// into a non-decreasing curve, and interpolated linearly between the two
/// grid points bracketing the target. If the smallest sample size already
/// meets the target it is returned as is.
pub fn interpolate_sample_size(points: &[(f64, f64)], target: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no power points".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let powers: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let smooth = stats::isotonic_non_decreasing(&powers);
    let Some(hi) = smooth.iter().position(|&p| p >= target) else {
        return Err(Error::OutOfRange {
            target,
            max_power: smooth.last().copied().unwrap_or(0.0),
        });
    };
    if hi == 0 {
        return Ok(pts[0].0);
    }
    let (x0, y0) = (pts[hi - 1].0, smooth[hi - 1]);
    let (x1, y1) = (pts[hi].0, smooth[hi]);
    Ok(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TteSummary {
    pub method: Method,
    pub hazard_ratio: f64,
    pub sample_size: usize,
    /// Absent when no replicate reached significance.
    pub mean_months: Option<f64>,
    /// Absent with fewer than two included replicates.
    pub sd_months: Option<f64>,
    pub n_included: usize,
    pub n_omitted: usize,
}

pub fn first_significant_months(results: &[ReplicateResult], method: Method) -> Vec<f64> {
    results
        .iter()
        .filter_map(|r| r.outcome(method).first_significant_month)
        .map(f64::from)
        .collect()
}

/// Mean and sample SD of the first significant month over replicates that
/// reached significance; the rest are counted as omitted.
pub fn summarize_tte(results: &[ReplicateResult], method: Method) -> Result<TteSummary> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidInput("no replicate results".into()))?;
    let months = first_significant_months(results, method);
    Ok(TteSummary {
        method,
        hazard_ratio: first.hazard_ratio,
        sample_size: first.sample_size,
        mean_months: stats::mean(&months),
        sd_months: stats::sample_variance(&months).map(f64::sqrt),
        n_included: months.len(),
        n_omitted: results.len() - months.len(),
    })
}

/// CWTA (sample A) against a comparator (sample B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TteComparison {
    /// `(mean_B - mean_A) / mean_B`; positive when A signals sooner.
    pub pct_delta: f64,
    pub t_statistic: Option<f64>,
    pub df: Option<f64>,
    /// Welch two-sided p; absent when either sample has one observation.
    pub p_value: Option<f64>,
    pub zero_variance: bool,
}

pub fn compare_tte(a: &[f64], b: &[f64]) -> Result<TteComparison> {
    let (Some(ma), Some(mb)) = (stats::mean(a), stats::mean(b)) else {
        return Err(Error::InvalidInput("both samples must be nonempty".into()));
    };
    let welch = welch_t_test(a, b);
    Ok(TteComparison {
        pct_delta: (mb - ma) / mb,
        t_statistic: welch.map(|w| w.t),
        df: welch.map(|w| w.df),
        p_value: welch.map(|w| w.p_value),
        zero_variance: welch.is_some_and(|w| w.zero_variance),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateOverride {
    pub hazard_ratio: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub hazard_ratios: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub replicate_overrides: Vec<ReplicateOverride>,
    pub alpha: f64,
    pub profile: String,
    pub master_seed: u64,
    #[serde(default)]
    pub response_effect: ResponseEffect,
}

pub const STUDY_HAZARD_RATIOS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];

pub fn default_power_sample_sizes() -> Vec<usize> {
    let mut v: Vec<usize> = (20..=100).step_by(10).collect();
    v.extend((120..=200).step_by(20));
    v.extend((240..=400).step_by(40));
    v.extend([450, 500]);
    v
}

pub fn default_tte_sample_sizes() -> Vec<usize> {
    let mut v: Vec<usize> = (30..=300).step_by(30).collect();
    v.extend([350, 400, 500]);
    v
}

impl ExperimentGrid {
    pub fn replicates_for(&self, hr: f64) -> usize {
        self.replicate_overrides
            .iter()
            .find(|o| o.hazard_ratio == hr)
            .map_or(self.replicates, |o| o.replicates)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", format!("{} is outside (0,1)", self.alpha)));
        }
        if self.replicates == 0 || self.replicate_overrides.iter().any(|o| o.replicates == 0) {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.hazard_ratios.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::config("hazard_ratios", "grid must be nonempty"));
        }
        if let Some(hr) = self.hazard_ratios.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::config("hazard_ratios", format!("{hr} is not a positive hazard ratio")));
        }
        if let Some(ss) = self.sample_sizes.iter().find(|s| **s < 2 || **s % 2 != 0) {
            return Err(Error::config(
                "sample_sizes",
                format!("{ss} cannot be allocated 1:1 between arms (need an even number >= 2)"),
            ));
        }
        Ok(())
    }
}

/// All replicates of one `(hr, ss)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPointResults {
    pub hazard_ratio: f64,
    pub sample_size: usize,
    pub results: Vec<ReplicateResult>,
}

/// Runs every grid point in `(hr, ss)` order. Parallelism is within a grid
/// point, across replicates.
pub fn run_grid(grid: &ExperimentGrid, model: &TransitionModel, exec: &Executor) -> Result<Vec<GridPointResults>> {
    grid.validate()?;
    let mut out = Vec::new();
    for &hr in &grid.hazard_ratios {
        for &ss in &grid.sample_sizes {
            let run = ReplicateRun {
                hazard_ratio: hr,
                sample_size: ss,
                replicates: grid.replicates_for(hr),
                master_seed: grid.master_seed,
                alpha: grid.alpha,
                response_effect: grid.response_effect,
            };
            out.push(GridPointResults {
                hazard_ratio: hr,
                sample_size: ss,
                results: run_replicates(&run, model, exec)?,
            });
        }
    }
    Ok(out)
}

pub fn power_table(points: &[GridPointResults], alpha: f64) -> Result<Vec<PowerEstimate>> {
    let mut out = Vec::new();
    for p in points {
        for m in Method::ALL {
            out.push(estimate_power(&p.results, m, alpha)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeRow {
    pub hazard_ratio: f64,
    pub method: Method,
    /// Absent when the target power is never reached on the grid.
    pub sample_size: Option<f64>,
    pub max_power: f64,
}

/// Interpolated sample size per `(hr, method)`, in first-seen HR order.
pub fn sample_size_table(powers: &[PowerEstimate], target: f64) -> Vec<SampleSizeRow> {
    let mut hrs: Vec<f64> = Vec::new();
    for p in powers {
        if !hrs.contains(&p.hazard_ratio) {
            hrs.push(p.hazard_ratio);
        }
    }
    let mut rows = Vec::new();
    for hr in hrs {
        for m in Method::ALL {
            let pts: Vec<(f64, f64)> = powers
                .iter()
                .filter(|p| p.hazard_ratio == hr && p.method == m)
                .map(|p| (p.sample_size as f64, p.power))
                .collect();
            let max_power = pts.iter().map(|p| p.1).fold(0.0, f64::max);
            rows.push(SampleSizeRow {
                hazard_ratio: hr,
                method: m,
                sample_size: interpolate_sample_size(&pts, target).ok(),
                max_power,
            });
        }
    }
    rows
}

/// Fractional reduction `(ss_ref - ss_cwta) / ss_ref` at one HR.
pub fn sample_size_reduction(rows: &[SampleSizeRow], hr: f64, reference: Method) -> Option<f64> {
    let get = |m: Method| {
        rows.iter()
            .find(|r| r.hazard_ratio == hr && r.method == m)
            .and_then(|r| r.sample_size)
    };
    let (cwta, other) = (get(Method::Cwta)?, get(reference)?);
    Some((other - cwta) / other)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TteRow {
    pub summary: TteSummary,
    /// CWTA against this row's method; absent on CWTA rows.
    pub versus_cwta: Option<TteComparison>,
}

pub fn tte_table(points: &[GridPointResults]) -> Result<Vec<TteRow>> {
    let mut rows = Vec::new();
    for p in points {
        let cwta = first_significant_months(&p.results, Method::Cwta);
        for m in Method::ALL {
            let summary = summarize_tte(&p.results, m)?;
            let versus_cwta = if m == Method::Cwta {
                None
            } else {
                let other = first_significant_months(&p.results, m);
                compare_tte(&cwta, &other).ok()
            };
            rows.push(TteRow { summary, versus_cwta });
        }
    }
    Ok(rows)
}

/// KM-PFS, KM-OS and CWTA applied to one trial, indexed by [`Method`] and
/// by [`Arm::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAnalysis {
    /// `None` where the test is degenerate.
    pub tests: [Option<TestResult>; 3],
    pub pfs: [KmCurve; 2],
    pub os: [KmCurve; 2],
    pub cwta: [TrajectoryCurve; 2],
}

pub fn analyze_subjects(subjects: &[SubjectTrajectory]) -> Result<TrialAnalysis> {
    for arm in [Arm::Control, Arm::Experimental] {
        if !subjects.iter().any(|s| s.arm == arm) {
            return Err(Error::InvalidInput(format!("no subjects in the {} arm", arm.as_str())));
        }
    }
    for s in subjects {
        s.validate()?;
    }
    let pfs = derive_endpoints(subjects, Endpoint::Pfs);
    let os = derive_endpoints(subjects, Endpoint::Os);
    let table = WeightedEventTable::from_trajectories(subjects, EventFilter::Bidirectional);
    let km = |records: &[TimeToEventRecord]| -> Result<[KmCurve; 2]> {
        Ok([
            km_estimate_arm(records, Arm::Control)?,
            km_estimate_arm(records, Arm::Experimental)?,
        ])
    };
    Ok(TrialAnalysis {
        tests: [
            weighted_logrank_test(&table).ok(),
            logrank_test(&pfs).ok(),
            logrank_test(&os).ok(),
        ],
        pfs: km(&pfs)?,
        os: km(&os)?,
        cwta: [
            cwta_curve(&table, Arm::Control)?,
            cwta_curve(&table, Arm::Experimental)?,
        ],
    })
}
