//! Python bindings for `cwta_core`.
//!
//! States are plain integers (0 = CR .. 4 = death), arms are the strings
//! `"control"` and `"experimental"`, and analysis results come back as
//! dicts keyed by method name.

use std::collections::HashMap;

use cwta_core::harness::{self, Executor, Method, ReplicateRun};
use cwta_core::km::{self, TimeToEventRecord};
use cwta_core::sim::{self, CalibrationTarget, ResponseEffect};
use cwta_core::{Arm, Error, HealthState};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::CalibrationFailure(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_effect(name: &str) -> PyResult<ResponseEffect> {
    match name {
        "inverse_hazard" => Ok(ResponseEffect::InverseHazard),
        "unchanged" => Ok(ResponseEffect::Unchanged),
        other => Err(PyValueError::new_err(format!(
            "unknown response effect `{other}` (expected inverse_hazard or unchanged)"
        ))),
    }
}

fn parse_arm(name: &str) -> PyResult<Arm> {
    name.parse().map_err(to_py)
}

fn arm_name(arm: Arm) -> &'static str {
    match arm {
        Arm::Control => "control",
        Arm::Experimental => "experimental",
    }
}

/// Monthly transition probabilities for the control arm.
#[pyclass(name = "TransitionModel", from_py_object)]
#[derive(Clone)]
struct PyTransitionModel {
    inner: sim::TransitionModel,
}

#[pymethods]
impl PyTransitionModel {
    #[new]
    #[pyo3(signature = (improve_prob, worsen_prob, improve_decay, horizon_months = 60, dropout_rate = 0.1))]
    fn new(
        improve_prob: [f64; 5],
        worsen_prob: [f64; 5],
        improve_decay: f64,
        horizon_months: u32,
        dropout_rate: f64,
    ) -> PyResult<Self> {
        let inner = sim::TransitionModel {
            improve_prob,
            worsen_prob,
            improve_decay,
            horizon_months,
            dropout_rate,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyTransitionModel { inner })
    }

    /// Shared worsening probabilities with zero improvement.
    #[staticmethod]
    fn template() -> Self {
        PyTransitionModel {
            inner: sim::TransitionModel::template(),
        }
    }

    /// Calibrated model of a shipped profile (`moderate` or `high`).
    #[staticmethod]
    fn profile(name: &str) -> PyResult<Self> {
        let p = sim::Profile::builtin(name).map_err(to_py)?;
        Ok(PyTransitionModel { inner: p.model })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: sim::TransitionModel =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(PyTransitionModel { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn improve_prob(&self) -> [f64; 5] {
        self.inner.improve_prob
    }

    #[getter]
    fn worsen_prob(&self) -> [f64; 5] {
        self.inner.worsen_prob
    }

    #[getter]
    fn improve_decay(&self) -> f64 {
        self.inner.improve_decay
    }

    #[getter]
    fn horizon_months(&self) -> u32 {
        self.inner.horizon_months
    }

    #[getter]
    fn dropout_rate(&self) -> f64 {
        self.inner.dropout_rate
    }

    /// Experimental-arm model under hazard ratio `hr`.
    #[pyo3(signature = (hr, response_effect = "inverse_hazard"))]
    fn experimental(&self, hr: f64, response_effect: &str) -> PyResult<Self> {
        let m = sim::apply_hazard_ratio(&self.inner, hr).map_err(to_py)?;
        Ok(PyTransitionModel {
            inner: sim::apply_response_effect(&m, hr, parse_effect(response_effect)?),
        })
    }

    /// Control-arm best-response `(cr_rate, pr_rate)` by Monte Carlo.
    #[pyo3(signature = (subjects = 100_000, seed = 1))]
    fn response_rates(&self, py: Python<'_>, subjects: usize, seed: u64) -> (f64, f64) {
        let r = py.detach(|| sim::measure_response_rates(&self.inner, subjects, seed));
        (r.cr_rate, r.pr_rate)
    }

    fn __repr__(&self) -> String {
        format!(
            "TransitionModel(improve_prob={:?}, worsen_prob={:?}, improve_decay={}, horizon_months={}, dropout_rate={})",
            self.inner.improve_prob,
            self.inner.worsen_prob,
            self.inner.improve_decay,
            self.inner.horizon_months,
            self.inner.dropout_rate
        )
    }
}

/// One simulated two-arm trial.
#[pyclass(name = "Trial")]
struct PyTrial {
    inner: sim::SimulatedTrial,
}

#[pymethods]
impl PyTrial {
    fn __len__(&self) -> usize {
        self.inner.subjects.len()
    }

    /// Observed states per subject, baseline first.
    fn states(&self) -> Vec<Vec<u8>> {
        self.inner
            .subjects
            .iter()
            .map(|s| s.observed().iter().map(|h| h.value()).collect())
            .collect()
    }

    fn arms(&self) -> Vec<&'static str> {
        self.inner.subjects.iter().map(|s| arm_name(s.arm)).collect()
    }

    fn dropout_months(&self) -> Vec<Option<u32>> {
        self.inner.subjects.iter().map(|s| s.dropout_month).collect()
    }

    /// Copy with every trajectory cut at `month`.
    fn truncated(&self, month: u32) -> Self {
        PyTrial {
            inner: self.inner.truncated(month),
        }
    }

    /// Two-sided p-values, `None` when a test is degenerate.
    fn p_values(&self) -> PyResult<HashMap<&'static str, Option<f64>>> {
        let a = harness::analyze_subjects(&self.inner.subjects).map_err(to_py)?;
        Ok(Method::ALL
            .iter()
            .map(|&m| (m.as_str(), a.tests[m.index()].map(|t| t.p_value)))
            .collect())
    }

    /// Per-method `(z, p_value)` plus per-arm curves as lists of
    /// `(time, value)` pairs.
    fn analyze(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let a = py
            .detach(|| harness::analyze_subjects(&self.inner.subjects))
            .map_err(to_py)?;
        let out = pyo3::types::PyDict::new(py);
        for m in Method::ALL {
            out.set_item(m.as_str(), a.tests[m.index()].map(|t| (t.z, t.p_value)))?;
        }
        for arm in [Arm::Control, Arm::Experimental] {
            let i = arm.index();
            let km = |c: &km::KmCurve| c.steps.iter().map(|s| (s.time, s.survival)).collect::<Vec<_>>();
            out.set_item(format!("pfs_{}", arm_name(arm)), km(&a.pfs[i]))?;
            out.set_item(format!("os_{}", arm_name(arm)), km(&a.os[i]))?;
            let traj: Vec<(u32, f64)> = a.cwta[i].steps.iter().map(|s| (s.month, s.value)).collect();
            out.set_item(format!("cwta_{}", arm_name(arm)), traj)?;
        }
        Ok(out.into_any().unbind())
    }
}

/// Simulates `sample_size` subjects split 1:1.
#[pyfunction]
#[pyo3(signature = (model, sample_size, hazard_ratio, seed, response_effect = "inverse_hazard"))]
fn simulate_trial(
    py: Python<'_>,
    model: &PyTransitionModel,
    sample_size: usize,
    hazard_ratio: f64,
    seed: u64,
    response_effect: &str,
) -> PyResult<PyTrial> {
    let cfg = sim::TrialConfig::new(sample_size, hazard_ratio, model.inner.clone(), seed)
        .with_response_effect(parse_effect(response_effect)?);
    let inner = py.detach(|| sim::simulate_trial(&cfg)).map_err(to_py)?;
    Ok(PyTrial { inner })
}

/// Fits improvement probabilities to control-arm CR and PR rates. Returns
/// the model and the achieved `(cr_rate, pr_rate)`.
#[pyfunction]
#[pyo3(signature = (cr_rate, pr_rate, tolerance = 0.005, template = None, rounds = 8))]
fn calibrate(
    py: Python<'_>,
    cr_rate: f64,
    pr_rate: f64,
    tolerance: f64,
    template: Option<PyTransitionModel>,
    rounds: u32,
) -> PyResult<(PyTransitionModel, (f64, f64))> {
    let target = CalibrationTarget {
        cr_rate,
        pr_rate,
        tolerance,
    };
    let template = template.map(|t| t.inner).unwrap_or_else(sim::TransitionModel::template);
    let (inner, achieved) = py
        .detach(|| sim::calibrate_transition_model(&target, &template, rounds))
        .map_err(to_py)?;
    Ok((PyTransitionModel { inner }, (achieved.cr_rate, achieved.pr_rate)))
}

/// Rejection rate per method over independent replicates at one grid point.
#[pyfunction]
#[pyo3(signature = (model, hazard_ratio, sample_size, replicates, master_seed = 1, alpha = 0.05, workers = 0, response_effect = "inverse_hazard"))]
#[allow(clippy::too_many_arguments)]
fn power(
    py: Python<'_>,
    model: &PyTransitionModel,
    hazard_ratio: f64,
    sample_size: usize,
    replicates: usize,
    master_seed: u64,
    alpha: f64,
    workers: usize,
    response_effect: &str,
) -> PyResult<HashMap<&'static str, f64>> {
    let run = ReplicateRun {
        hazard_ratio,
        sample_size,
        replicates,
        master_seed,
        alpha,
        response_effect: parse_effect(response_effect)?,
    };
    let exec = Executor::with_workers(workers).map_err(to_py)?;
    let results = py
        .detach(|| harness::run_replicates(&run, &model.inner, &exec))
        .map_err(to_py)?;
    Method::ALL
        .iter()
        .map(|&m| {
            let p = harness::estimate_power(&results, m, alpha).map_err(to_py)?;
            Ok((m.as_str(), p.power))
        })
        .collect()
}

/// Smallest sample size reaching `target` power on the isotonic-smoothed,
/// linearly interpolated `(sample_size, power)` curve.
#[pyfunction]
#[pyo3(signature = (points, target = 0.8))]
fn interpolate_sample_size(points: Vec<(f64, f64)>, target: f64) -> PyResult<f64> {
    harness::interpolate_sample_size(&points, target).map_err(to_py)
}

fn records(times: Vec<u32>, events: Vec<bool>, arms: Vec<String>) -> PyResult<Vec<TimeToEventRecord>> {
    if times.len() != events.len() || times.len() != arms.len() {
        return Err(PyValueError::new_err("times, events and arms differ in length"));
    }
    times
        .into_iter()
        .zip(events)
        .zip(arms)
        .map(|((time, event), arm)| {
            Ok(TimeToEventRecord {
                time,
                event,
                arm: parse_arm(&arm)?,
            })
        })
        .collect()
}

/// Product-limit steps `(time, survival, at_risk, events)`.
#[pyfunction]
fn kaplan_meier(times: Vec<u32>, events: Vec<bool>) -> PyResult<Vec<(u32, f64, usize, usize)>> {
    let arms = vec!["control".to_string(); times.len()];
    let curve = km::km_estimate(&records(times, events, arms)?).map_err(to_py)?;
    Ok(curve.steps.iter().map(|s| (s.time, s.survival, s.at_risk, s.events)).collect())
}

/// Two-arm logrank test; returns `(z, p_value)`.
#[pyfunction]
fn logrank(times: Vec<u32>, events: Vec<bool>, arms: Vec<String>) -> PyResult<(f64, f64)> {
    let r = km::logrank_test(&records(times, events, arms)?).map_err(to_py)?;
    Ok((r.z, r.p_value))
}

/// Name of state `value` (0..=4).
#[pyfunction]
fn state_label(value: u8) -> PyResult<&'static str> {
    Ok(HealthState::new(value).map_err(to_py)?.label())
}

#[pymodule]
fn cwta_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTransitionModel>()?;
    m.add_class::<PyTrial>()?;
    m.add_function(wrap_pyfunction!(simulate_trial, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(power, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(kaplan_meier, m)?)?;
    m.add_function(wrap_pyfunction!(logrank, m)?)?;
    m.add_function(wrap_pyfunction!(state_label, m)?)?;
    Ok(())
}
