//! CSV readers and writers.
//!
//! Numbers are written with fixed formats (Rust formatting never consults
//! the locale), so identical inputs give identical bytes. Absent values are
//! empty fields.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::cwta::TrajectoryCurve;
use crate::error::{Error, Result};
use crate::harness::{Method, PowerEstimate, SampleSizeRow, TrialAnalysis, TteRow};
use crate::km::KmCurve;
use crate::sim::{Arm, HealthState, SubjectTrajectory};

fn fixed(x: f64, digits: usize) -> String {
    format!("{x:.digits$}")
}

/// p-values span many decades, so they get a mantissa/exponent form.
fn pval(p: f64) -> String {
    format!("{p:.6e}")
}

fn opt(x: Option<String>) -> String {
    x.unwrap_or_default()
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Long format, one row per observed month:
/// `subject,month,state,arm,dropout_month`.
pub fn write_trajectories<W: Write>(w: W, subjects: &[SubjectTrajectory]) -> Result<()> {
    let mut out = writer(w, &["subject", "month", "state", "arm", "dropout_month"])?;
    for (i, s) in subjects.iter().enumerate() {
        let dropout = s.dropout_month.map(|d| d.to_string()).unwrap_or_default();
        for (m, state) in s.observed().iter().enumerate() {
            out.write_record([
                i.to_string(),
                m.to_string(),
                state.value().to_string(),
                s.arm.as_str().to_string(),
                dropout.clone(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct TrajectoryRow {
    subject: String,
    month: u32,
    state: u8,
    arm: String,
    #[serde(default)]
    dropout_month: Option<u32>,
}

/// Reads the long trajectory format. `dropout_month` is optional; subjects
/// keep the order in which they first appear and each needs months
/// `0..=k` without gaps, all in one arm.
pub fn read_trajectories<R: Read>(r: R) -> Result<Vec<SubjectTrajectory>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<TrajectoryRow>> = HashMap::new();
    for row in rdr.deserialize() {
        let row: TrajectoryRow = row?;
        if !rows.contains_key(&row.subject) {
            order.push(row.subject.clone());
        }
        rows.entry(row.subject.clone()).or_default().push(row);
    }
    if order.is_empty() {
        return Err(Error::InvalidInput("trajectory file has no rows".into()));
    }
    order
        .into_iter()
        .map(|id| {
            let mut rs = rows.remove(&id).unwrap_or_default();
            rs.sort_by_key(|r| r.month);
            let bad = |why: &str| Error::InvalidInput(format!("subject `{id}`: {why}"));
            if rs.iter().enumerate().any(|(i, r)| r.month as usize != i) {
                return Err(bad("months must run 0, 1, 2, ... without gaps or repeats"));
            }
            let arm: Arm = rs[0].arm.parse()?;
            let dropout = rs[0].dropout_month;
            let mut states = Vec::with_capacity(rs.len());
            for r in &rs {
                if r.arm.parse::<Arm>()? != arm {
                    return Err(bad("arm changes between rows"));
                }
                if r.dropout_month != dropout {
                    return Err(bad("dropout_month changes between rows"));
                }
                states.push(HealthState::new(r.state)?);
            }
            SubjectTrajectory::new(states, dropout, arm).map_err(|e| bad(&e.to_string()))
        })
        .collect()
}

/// `time,survival,at_risk,events`, one row per event time.
pub fn write_km_curve<W: Write>(w: W, curve: &KmCurve) -> Result<()> {
    let mut out = writer(w, &["time", "survival", "at_risk", "events"])?;
    for s in &curve.steps {
        out.write_record([
            s.time.to_string(),
            fixed(s.survival, 6),
            s.at_risk.to_string(),
            s.events.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `month,value,at_risk_arm1,at_risk_arm2`, starting at month 0.
pub fn write_cwta_curve<W: Write>(w: W, curve: &TrajectoryCurve) -> Result<()> {
    let mut out = writer(w, &["month", "value", "at_risk_arm1", "at_risk_arm2"])?;
    for s in &curve.steps {
        out.write_record([
            s.month.to_string(),
            fixed(s.value, 6),
            s.at_risk[0].to_string(),
            s.at_risk[1].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Three-method summary of one trial; degenerate tests leave the numeric
/// fields empty.
pub fn write_test_summary<W: Write>(w: W, analysis: &TrialAnalysis) -> Result<()> {
    let mut out = writer(
        w,
        &["method", "statistic", "z", "p_value", "observed_minus_expected", "variance"],
    )?;
    for m in Method::ALL {
        let t = analysis.tests[m.index()];
        out.write_record([
            m.as_str().to_string(),
            opt(t.map(|t| fixed(t.statistic, 6))),
            opt(t.map(|t| fixed(t.z, 6))),
            opt(t.map(|t| pval(t.p_value))),
            opt(t.map(|t| fixed(t.observed_minus_expected, 6))),
            opt(t.map(|t| fixed(t.variance, 6))),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `method,hr,ss,replicates,power`.
pub fn write_power_table<W: Write>(w: W, rows: &[PowerEstimate]) -> Result<()> {
    let mut out = writer(w, &["method", "hr", "ss", "replicates", "power"])?;
    for r in rows {
        out.write_record([
            r.method.as_str().to_string(),
            r.hazard_ratio.to_string(),
            r.sample_size.to_string(),
            r.replicates.to_string(),
            fixed(r.power, 4),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `method,hr,sample_size,max_power,pct_reduction_vs_cwta`. The reduction is
/// the percentage saved by CWTA relative to the row's method.
pub fn write_sample_size_table<W: Write>(w: W, rows: &[SampleSizeRow]) -> Result<()> {
    let mut out = writer(
        w,
        &["method", "hr", "sample_size", "max_power", "pct_reduction_vs_cwta"],
    )?;
    for r in rows {
        let reduction = if r.method == Method::Cwta {
            None
        } else {
            crate::harness::sample_size_reduction(rows, r.hazard_ratio, r.method)
        };
        out.write_record([
            r.method.as_str().to_string(),
            r.hazard_ratio.to_string(),
            opt(r.sample_size.map(|s| fixed(s, 1))),
            fixed(r.max_power, 4),
            opt(reduction.map(|x| fixed(100.0 * x, 1))),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `method,hr,ss,mean,sd,n_included,n_omitted,pct_delta_vs_cwta,p_value`.
pub fn write_tte_table<W: Write>(w: W, rows: &[TteRow]) -> Result<()> {
    let mut out = writer(
        w,
        &[
            "method",
            "hr",
            "ss",
            "mean",
            "sd",
            "n_included",
            "n_omitted",
            "pct_delta_vs_cwta",
            "p_value",
        ],
    )?;
    for r in rows {
        let s = &r.summary;
        let c = r.versus_cwta;
        out.write_record([
            s.method.as_str().to_string(),
            s.hazard_ratio.to_string(),
            s.sample_size.to_string(),
            opt(s.mean_months.map(|x| fixed(x, 3))),
            opt(s.sd_months.map(|x| fixed(x, 3))),
            s.n_included.to_string(),
            s.n_omitted.to_string(),
            opt(c.map(|c| fixed(100.0 * c.pct_delta, 2))),
            opt(c.and_then(|c| c.p_value).map(pval)),
        ])?;
    }
    out.flush()?;
    Ok(())
}
