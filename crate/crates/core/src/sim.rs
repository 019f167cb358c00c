//! Discrete-time ordinal health-state simulation of two-arm trials.
//!
//! Each subject starts in stable disease and, once per month, may move at
//! most one level on the ladder CR(0) < PR(1) < SD(2) < PD(3) < Death(4).
//! PD can only worsen and Death is absorbing. The experimental arm shares
//! the control arm's improvement probabilities; its worsening probabilities
//! are rescaled by a discrete-time hazard ratio.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CalibrationFailure, Error, Result};
use crate::rng::{self, SimRng};

/// Highest ordinal on the ladder.
pub const MAX_STATE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct HealthState(u8);

impl HealthState {
    pub const CR: HealthState = HealthState(0);
    pub const PR: HealthState = HealthState(1);
    pub const SD: HealthState = HealthState(2);
    pub const PD: HealthState = HealthState(3);
    pub const DEATH: HealthState = HealthState(4);

    pub fn new(value: u8) -> Result<Self> {
        if value <= MAX_STATE {
            Ok(HealthState(value))
        } else {
            Err(Error::param("state", format!("{value} is outside 0..=4")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        ["CR", "PR", "SD", "PD", "Death"][self.index()]
    }
}

impl TryFrom<u8> for HealthState {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        HealthState::new(value)
    }
}

impl From<HealthState> for u8 {
    fn from(s: HealthState) -> u8 {
        s.0
    }
}

impl fmt::Display for HealthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Experimental,
}

impl Arm {
    /// 0 for control ("arm 1" in test sums), 1 for experimental.
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Experimental => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Experimental => "experimental",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" | "1" => Ok(Arm::Control),
            "experimental" | "2" => Ok(Arm::Experimental),
            other => Err(Error::InvalidInput(format!("unknown arm `{other}`"))),
        }
    }
}

/// Serializes a per-state probability array as `{"0": p0, ..., "4": p4}`.
mod state_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(probs: &[f64; 5], s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, f64> = probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i.to_string(), *p))
            .collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 5], D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(d)?;
        let mut out = [0.0; 5];
        for (k, v) in map {
            let idx: usize = k
                .parse()
                .ok()
                .filter(|i| *i < 5)
                .ok_or_else(|| D::Error::custom(format!("state key `{k}` is not in 0..=4")))?;
            out[idx] = v;
        }
        Ok(out)
    }
}

/// Monthly transition probabilities for one arm.
///
/// `improve_prob[s]` moves `s -> s-1` and is multiplied by
/// `improve_decay^(m-1)` in month `m`; `worsen_prob[s]` moves `s -> s+1`
/// and is constant in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionModel {
    #[serde(with = "state_map")]
    pub improve_prob: [f64; 5],
    #[serde(with = "state_map")]
    pub worsen_prob: [f64; 5],
    pub improve_decay: f64,
    pub horizon_months: u32,
    pub dropout_rate: f64,
}

impl TransitionModel {
    /// Worsening probabilities and decay shared by the shipped profiles.
    /// Improvement probabilities are left at zero for calibration to fill in.
    pub fn template() -> Self {
        TransitionModel {
            improve_prob: [0.0; 5],
            worsen_prob: [0.174, 0.059, 0.025, 0.067, 0.0],
            improve_decay: 0.911,
            horizon_months: 60,
            dropout_rate: 0.10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        for s in 0..5 {
            if !unit(self.improve_prob[s]) {
                return Err(Error::param("improve_prob", format!("state {s} outside [0,1]")));
            }
            if !unit(self.worsen_prob[s]) {
                return Err(Error::param("worsen_prob", format!("state {s} outside [0,1]")));
            }
            if self.improve_prob[s] + self.worsen_prob[s] > 1.0 + 1e-12 {
                return Err(Error::param(
                    "improve_prob",
                    format!("state {s}: improve + worsen exceeds 1"),
                ));
            }
        }
        if self.improve_prob[0] != 0.0 || self.improve_prob[3] != 0.0 || self.improve_prob[4] != 0.0
        {
            return Err(Error::param(
                "improve_prob",
                "only PR (1) and SD (2) can improve",
            ));
        }
        if self.worsen_prob[4] != 0.0 {
            return Err(Error::param("worsen_prob", "death is absorbing"));
        }
        if !(self.improve_decay > 0.0 && self.improve_decay <= 1.0) {
            return Err(Error::param("improve_decay", "must lie in (0,1]"));
        }
        if self.horizon_months == 0 {
            return Err(Error::param("horizon_months", "must be at least 1"));
        }
        if !unit(self.dropout_rate) {
            return Err(Error::param("dropout_rate", "must lie in [0,1]"));
        }
        Ok(())
    }
}

/// Exact discrete-time proportional-hazards transform `1 - (1 - b)^hr`.
pub fn hazard_transform(b: f64, hr: f64) -> f64 {
    if b >= 1.0 {
        1.0
    } else {
        // -expm1(hr * ln(1 - b)) keeps precision for small b.
        -(hr * (-b).ln_1p()).exp_m1()
    }
}

/// Applies `hr` to every worsening probability. Improvement probabilities and
/// the decay are left as they are.
pub fn apply_hazard_ratio(model: &TransitionModel, hr: f64) -> Result<TransitionModel> {
    if !(hr > 0.0) || !hr.is_finite() {
        return Err(Error::param("hazard_ratio", "must be a positive finite number"));
    }
    model.validate()?;
    let mut out = model.clone();
    for b in out.worsen_prob.iter_mut() {
        *b = hazard_transform(*b, hr);
    }
    // hr > 1 can push improve + worsen over 1; trim the improvement side.
    for s in 0..5 {
        let room = 1.0 - out.worsen_prob[s];
        if out.improve_prob[s] > room {
            out.improve_prob[s] = room.max(0.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubjectTrajectory {
    /// `states[m]` is the state at month `m`; `states[0]` is baseline.
    pub states: Vec<HealthState>,
    /// Last month under observation for a dropout.
    pub dropout_month: Option<u32>,
    pub arm: Arm,
}

impl SubjectTrajectory {
    pub fn new(states: Vec<HealthState>, dropout_month: Option<u32>, arm: Arm) -> Result<Self> {
        let t = SubjectTrajectory {
            states,
            dropout_month,
            arm,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidInput("trajectory has no states".into()));
        }
        if self.dropout_month == Some(0) {
            return Err(Error::InvalidInput("dropout month must be at least 1".into()));
        }
        let end = self.last_observed_month() as usize;
        for m in 1..=end {
            let (prev, cur) = (self.states[m - 1].value(), self.states[m].value());
            if prev.abs_diff(cur) > 1 {
                return Err(Error::InvalidInput(format!(
                    "month {m}: jump {prev} -> {cur} skips a level"
                )));
            }
            if prev >= 3 && cur < prev {
                return Err(Error::InvalidInput(format!(
                    "month {m}: {prev} -> {cur} leaves an irreversible state"
                )));
            }
        }
        Ok(())
    }

    /// Last month whose state is observed: the dropout month, capped by the
    /// recorded length.
    pub fn last_observed_month(&self) -> u32 {
        let recorded = (self.states.len() - 1) as u32;
        self.dropout_month.map_or(recorded, |d| d.min(recorded))
    }

    pub fn observed(&self) -> &[HealthState] {
        &self.states[..=self.last_observed_month() as usize]
    }

    /// Administrative censoring at `month`: later states are dropped and a
    /// later dropout is forgotten.
    pub fn truncated(&self, month: u32) -> SubjectTrajectory {
        let keep = (month as usize + 1).min(self.states.len());
        SubjectTrajectory {
            states: self.states[..keep].to_vec(),
            dropout_month: self.dropout_month.filter(|&d| d <= month),
            arm: self.arm,
        }
    }
}

/// Minimum observed state.
pub fn best_overall_response(traj: &SubjectTrajectory) -> HealthState {
    traj.observed().iter().copied().min().unwrap_or(HealthState::SD)
}

fn draw_dropout(model: &TransitionModel, rng: &mut SimRng) -> Option<u32> {
    let u: f64 = rng.random();
    if u < model.dropout_rate {
        Some(rng.random_range(1..=model.horizon_months))
    } else {
        None
    }
}

/// Simulates one subject under an already arm-specific model.
pub(crate) fn simulate_with_model(model: &TransitionModel, arm: Arm, rng: &mut SimRng) -> SubjectTrajectory {
    let dropout_month = draw_dropout(model, rng);
    let end = dropout_month.unwrap_or(model.horizon_months) as usize;
    let mut states = Vec::with_capacity(end + 1);
    let mut s = HealthState::SD.index();
    states.push(HealthState(s as u8));
    let mut decay = 1.0;
    for _ in 1..=end {
        if s != 4 {
            let u: f64 = rng.random();
            let improve = model.improve_prob[s] * decay;
            let worsen = model.worsen_prob[s];
            // [improve | stay | worsen]
            if u < improve {
                s -= 1;
            } else if u >= 1.0 - worsen {
                s += 1;
            }
        }
        decay *= model.improve_decay;
        states.push(HealthState(s as u8));
    }
    SubjectTrajectory {
        states,
        dropout_month,
        arm,
    }
}

/// Simulates one subject. The experimental arm uses the hazard-ratio
/// transformed worsening probabilities only; no response effect is applied,
/// which matches a trial built with [`ResponseEffect::Unchanged`].
pub fn simulate_subject(
    control_model: &TransitionModel,
    arm: Arm,
    hr: f64,
    rng: &mut SimRng,
) -> Result<SubjectTrajectory> {
    let model = match arm {
        Arm::Control => {
            control_model.validate()?;
            control_model.clone()
        }
        Arm::Experimental => apply_hazard_ratio(control_model, hr)?,
    };
    Ok(simulate_with_model(&model, arm, rng))
}

/// How treatment acts on the experimental arm's improvement probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseEffect {
    /// Improvement probabilities are the same in both arms.
    Unchanged,
    /// Improvements get the inverse hazard ratio: `a -> 1 - (1 - a)^(1/hr)`,
    /// capped so that improve + worsen stays within 1.
    #[default]
    InverseHazard,
}

/// Applies `effect` to an already hazard-transformed experimental model.
pub fn apply_response_effect(model: &TransitionModel, hr: f64, effect: ResponseEffect) -> TransitionModel {
    let mut out = model.clone();
    if effect == ResponseEffect::InverseHazard {
        for s in 0..5 {
            let a = hazard_transform(out.improve_prob[s], 1.0 / hr);
            out.improve_prob[s] = a.min(1.0 - out.worsen_prob[s]).max(0.0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub sample_size: usize,
    pub hazard_ratio: f64,
    pub control_model: TransitionModel,
    pub seed: u64,
    #[serde(default)]
    pub response_effect: ResponseEffect,
}

impl TrialConfig {
    pub fn new(sample_size: usize, hazard_ratio: f64, control_model: TransitionModel, seed: u64) -> Self {
        TrialConfig {
            sample_size,
            hazard_ratio,
            control_model,
            seed,
            response_effect: ResponseEffect::default(),
        }
    }

    pub fn with_response_effect(mut self, effect: ResponseEffect) -> Self {
        self.response_effect = effect;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 || self.sample_size % 2 != 0 {
            return Err(Error::param(
                "sample_size",
                format!("{} cannot be allocated 1:1 (need an even number >= 2)", self.sample_size),
            ));
        }
        if !(self.hazard_ratio > 0.0) || !self.hazard_ratio.is_finite() {
            return Err(Error::param("hazard_ratio", "must be a positive finite number"));
        }
        self.control_model.validate()
    }

    pub fn experimental_model(&self) -> Result<TransitionModel> {
        let model = apply_hazard_ratio(&self.control_model, self.hazard_ratio)?;
        Ok(apply_response_effect(&model, self.hazard_ratio, self.response_effect))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTrial {
    pub subjects: Vec<SubjectTrajectory>,
    pub config: TrialConfig,
}

impl SimulatedTrial {
    pub fn truncated(&self, month: u32) -> SimulatedTrial {
        SimulatedTrial {
            subjects: self.subjects.iter().map(|s| s.truncated(month)).collect(),
            config: self.config.clone(),
        }
    }
}

/// Subjects `0..n/2` are control, `n/2..n` experimental; subject `i` draws
/// from the stream seeded by `mix(config.seed, i)`.
pub fn simulate_trial(config: &TrialConfig) -> Result<SimulatedTrial> {
    config.validate()?;
    let experimental = config.experimental_model()?;
    let half = config.sample_size / 2;
    let subjects = (0..config.sample_size)
        .map(|i| {
            let mut rng = rng::stream(rng::mix(config.seed, i as u64));
            if i < half {
                simulate_with_model(&config.control_model, Arm::Control, &mut rng)
            } else {
                simulate_with_model(&experimental, Arm::Experimental, &mut rng)
            }
        })
        .collect();
    Ok(SimulatedTrial {
        subjects,
        config: config.clone(),
    })
}

/// Control-arm best-response targets. All three fields are fractions, so a
/// tolerance of one percentage point is `0.01`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTarget {
    pub cr_rate: f64,
    pub pr_rate: f64,
    pub tolerance: f64,
}

impl CalibrationTarget {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cr_rate) || !(0.0..=1.0).contains(&self.pr_rate) {
            return Err(Error::param("cr_rate", "rates must lie in [0,1]"));
        }
        if self.cr_rate + self.pr_rate > 1.0 {
            return Err(Error::param("pr_rate", "cr_rate + pr_rate exceeds 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchievedRates {
    pub cr_rate: f64,
    pub pr_rate: f64,
    pub subjects: usize,
}

impl AchievedRates {
    fn within(&self, target: &CalibrationTarget) -> bool {
        (self.cr_rate - target.cr_rate).abs() <= target.tolerance
            && (self.pr_rate - target.pr_rate).abs() <= target.tolerance
    }
}

/// Best-response CR and PR fractions over `subjects` simulated control
/// subjects. Subject `i` uses the stream `mix(seed, i)`.
pub fn measure_response_rates(model: &TransitionModel, subjects: usize, seed: u64) -> AchievedRates {
    let (mut cr, mut pr) = (0usize, 0usize);
    for i in 0..subjects {
        let mut rng = rng::stream(rng::mix(seed, i as u64));
        let traj = simulate_with_model(model, Arm::Control, &mut rng);
        match best_overall_response(&traj) {
            HealthState::CR => cr += 1,
            HealthState::PR => pr += 1,
            _ => {}
        }
    }
    AchievedRates {
        cr_rate: cr as f64 / subjects as f64,
        pr_rate: pr as f64 / subjects as f64,
        subjects,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub subjects: usize,
    pub seed: u64,
    /// Halvings per coordinate search.
    pub bisection_steps: u32,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            subjects: 50_000,
            seed: 0x00C0_FFEE,
            bisection_steps: 30,
        }
    }
}

/// Smallest `x` in `[0, hi]` with `f(x) >= target`, assuming `f` is
/// non-decreasing. Returns `hi` when the target is out of reach.
fn bisect(hi: f64, target: f64, steps: u32, f: impl Fn(f64) -> f64) -> f64 {
    if f(0.0) >= target {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Pick whichever end lands closer.
    if (f(lo) - target).abs() < (f(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

/// Fits the SD->PR and PR->CR probabilities so that the control arm's
/// best-response rates hit `target`.
///
/// Coordinate bisection: SD->PR is searched against the total response
/// rate (CR + PR), which PR->CR cannot change, then PR->CR against the CR
/// rate. `budget` caps the number of coordinate rounds. Monte Carlo uses
/// common random numbers from `settings.seed` so the objective is
/// reproducible.
pub fn calibrate_transition_model(
    target: &CalibrationTarget,
    template: &TransitionModel,
    budget: u32,
) -> Result<(TransitionModel, AchievedRates)> {
    calibrate_with(target, template, budget, &CalibrationSettings::default())
}

pub fn calibrate_with(
    target: &CalibrationTarget,
    template: &TransitionModel,
    budget: u32,
    settings: &CalibrationSettings,
) -> Result<(TransitionModel, AchievedRates)> {
    target.validate()?;
    template.validate()?;
    if settings.subjects == 0 {
        return Err(Error::param("subjects", "calibration needs at least one subject"));
    }
    let mut model = template.clone();
    model.improve_prob = [0.0; 5];
    let measure = |m: &TransitionModel| measure_response_rates(m, settings.subjects, settings.seed);

    let mut achieved = measure(&model);
    for _ in 0..budget {
        let responders = target.cr_rate + target.pr_rate;
        let a2 = bisect(1.0 - model.worsen_prob[2], responders, settings.bisection_steps, |x| {
            let mut m = model.clone();
            m.improve_prob[2] = x;
            let r = measure(&m);
            r.cr_rate + r.pr_rate
        });
        model.improve_prob[2] = a2;

        let a1 = bisect(1.0 - model.worsen_prob[1], target.cr_rate, settings.bisection_steps, |x| {
            let mut m = model.clone();
            m.improve_prob[1] = x;
            measure(&m).cr_rate
        });
        model.improve_prob[1] = a1;

        achieved = measure(&model);
        if achieved.within(target) {
            return Ok((model, achieved));
        }
    }
    Err(Error::CalibrationFailure(Box::new(CalibrationFailure {
        model,
        achieved,
    })))
}

/// A calibrated transition model plus the target it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub version: u32,
    pub target: CalibrationTarget,
    pub model: TransitionModel,
    pub calibration_seed: u64,
    pub calibration_subjects: usize,
    pub achieved: Option<AchievedRates>,
}

const MODERATE_JSON: &str = include_str!("../../../profiles/moderate.json");
const HIGH_JSON: &str = include_str!("../../../profiles/high.json");

impl Profile {
    /// `moderate` (CR ~5%, PR ~30%) or `high` (CR ~10%, PR ~50%).
    pub fn builtin(name: &str) -> Result<Profile> {
        let text = match name {
            "moderate" => MODERATE_JSON,
            "high" => HIGH_JSON,
            other => return Err(Error::param("profile", format!("no built-in profile `{other}`"))),
        };
        Profile::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Profile> {
        let p: Profile = serde_json::from_str(text)?;
        p.target.validate()?;
        p.model.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn moderate_target() -> CalibrationTarget {
    CalibrationTarget {
        cr_rate: 0.05,
        pr_rate: 0.30,
        tolerance: 0.005,
    }
}

pub fn high_target() -> CalibrationTarget {
    CalibrationTarget {
        cr_rate: 0.10,
        pr_rate: 0.50,
        tolerance: 0.005,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states(v: &[u8]) -> Vec<HealthState> {
        v.iter().map(|&x| HealthState::new(x).unwrap()).collect()
    }

    fn null_model() -> TransitionModel {
        TransitionModel {
            improve_prob: [0.0; 5],
            worsen_prob: [0.0; 5],
            improve_decay: 1.0,
            horizon_months: 60,
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn hazard_ratio_examples() {
        let mut m = null_model();
        m.worsen_prob[2] = 0.05;
        assert_eq!(apply_hazard_ratio(&m, 1.0).unwrap().worsen_prob[2], 0.05);

        let b = apply_hazard_ratio(&m, 0.5).unwrap().worsen_prob[2];
        assert!((b - (1.0 - 0.95f64.sqrt())).abs() < 1e-15);
        assert!((b - 0.02532).abs() < 5e-6);
        assert!(((1.0 - b).ln() / 0.95f64.ln() - 0.5).abs() < 1e-14);

        assert_eq!(apply_hazard_ratio(&null_model(), 0.7).unwrap().worsen_prob[2], 0.0);
        assert!(apply_hazard_ratio(&m, 0.0).is_err());
        assert!(apply_hazard_ratio(&m, -1.0).is_err());
    }

    #[test]
    fn model_validation() {
        let mut m = TransitionModel::template();
        assert!(m.validate().is_ok());
        m.improve_prob[3] = 0.1;
        assert!(m.validate().is_err());
        let mut m = TransitionModel::template();
        m.worsen_prob[4] = 0.1;
        assert!(m.validate().is_err());
        let mut m = TransitionModel::template();
        m.improve_prob[2] = 0.99;
        assert!(m.validate().is_err());
        let mut m = TransitionModel::template();
        m.improve_decay = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn null_model_stays_in_sd() {
        let mut rng = rng::stream(1);
        let t = simulate_subject(&null_model(), Arm::Control, 1.0, &mut rng).unwrap();
        assert_eq!(t.states.len(), 61);
        assert!(t.states.iter().all(|&s| s == HealthState::SD));
    }

    #[test]
    fn forced_worst_path() {
        let mut m = null_model();
        m.worsen_prob[2] = 1.0;
        m.worsen_prob[3] = 1.0;
        let t = simulate_subject(&m, Arm::Control, 1.0, &mut rng::stream(9)).unwrap();
        assert_eq!(&t.states[..4], &states(&[2, 3, 4, 4])[..]);
        assert!(t.states[2..].iter().all(|&s| s == HealthState::DEATH));
        // hr does not soften certainty.
        let t = simulate_subject(&m, Arm::Experimental, 0.5, &mut rng::stream(9)).unwrap();
        assert_eq!(&t.states[..3], &states(&[2, 3, 4])[..]);
    }

    #[test]
    fn best_response_examples() {
        let t = |v: &[u8]| SubjectTrajectory::new(states(v), None, Arm::Control).unwrap();
        assert_eq!(best_overall_response(&t(&[2, 2, 2])), HealthState::SD);
        assert_eq!(best_overall_response(&t(&[2, 1, 2, 3, 4])), HealthState::PR);
        assert_eq!(best_overall_response(&t(&[2, 1, 0, 1, 2, 3])), HealthState::CR);
        // States after dropout are ignored.
        let d = SubjectTrajectory::new(states(&[2, 2, 1, 0]), Some(1), Arm::Control).unwrap();
        assert_eq!(best_overall_response(&d), HealthState::SD);
    }

    #[test]
    fn trajectory_validation() {
        assert!(SubjectTrajectory::new(states(&[2, 4]), None, Arm::Control).is_err());
        assert!(SubjectTrajectory::new(states(&[2, 3, 2]), None, Arm::Control).is_err());
        assert!(SubjectTrajectory::new(states(&[2, 3, 4, 3]), None, Arm::Control).is_err());
        assert!(SubjectTrajectory::new(states(&[2, 2]), Some(0), Arm::Control).is_err());
    }

    #[test]
    fn trial_allocation_and_errors() {
        let cfg = TrialConfig::new(2, 0.7, TransitionModel::template(), 3);
        let trial = simulate_trial(&cfg).unwrap();
        assert_eq!(trial.subjects[0].arm, Arm::Control);
        assert_eq!(trial.subjects[1].arm, Arm::Experimental);

        for bad in [0, 1, 101] {
            let cfg = TrialConfig::new(bad, 0.7, TransitionModel::template(), 3);
            assert!(matches!(simulate_trial(&cfg), Err(Error::InvalidParameter { .. })));
        }
        let cfg = TrialConfig::new(10, 0.0, TransitionModel::template(), 3);
        assert!(simulate_trial(&cfg).is_err());
    }

    #[test]
    fn truncation_is_idempotent() {
        let cfg = TrialConfig::new(40, 0.7, TransitionModel::template(), 11);
        let trial = simulate_trial(&cfg).unwrap();
        for s in &trial.subjects {
            assert_eq!(s.truncated(30).truncated(12), s.truncated(12));
            assert!(s.truncated(12).last_observed_month() <= 12);
        }
    }

    #[test]
    fn zero_target_calibrates_to_zero() {
        let target = CalibrationTarget {
            cr_rate: 0.0,
            pr_rate: 0.0,
            tolerance: 0.005,
        };
        let settings = CalibrationSettings {
            subjects: 2_000,
            ..Default::default()
        };
        let (m, rates) = calibrate_with(&target, &TransitionModel::template(), 3, &settings).unwrap();
        assert_eq!(m.improve_prob[2], 0.0);
        assert_eq!(m.improve_prob[1], 0.0);
        assert_eq!(rates.cr_rate + rates.pr_rate, 0.0);
    }

    #[test]
    fn unreachable_target_reports_best_model() {
        // Responders cannot exceed what a2 = 1 - b2 delivers with heavy dropout.
        let mut template = TransitionModel::template();
        template.worsen_prob[2] = 0.9;
        template.worsen_prob[1] = 0.9;
        let target = CalibrationTarget {
            cr_rate: 0.5,
            pr_rate: 0.45,
            tolerance: 0.005,
        };
        let settings = CalibrationSettings {
            subjects: 2_000,
            bisection_steps: 12,
            ..Default::default()
        };
        match calibrate_with(&target, &template, 1, &settings) {
            Err(Error::CalibrationFailure(f)) => {
                assert!(f.achieved.cr_rate < 0.5);
                assert!(f.model.validate().is_ok());
            }
            other => panic!("expected calibration failure, got {other:?}"),
        }
    }

    #[test]
    fn model_json_uses_state_keys() {
        let json = serde_json::to_value(TransitionModel::template()).unwrap();
        assert_eq!(json["worsen_prob"]["2"], 0.025);
        assert!(serde_json::from_str::<TransitionModel>(
            r#"{"improve_prob":{"7":0.1},"worsen_prob":{},"improve_decay":1,"horizon_months":60,"dropout_rate":0.1}"#
        )
        .is_err());
    }

    #[test]
    fn builtin_profiles_load() {
        for name in ["moderate", "high"] {
            let p = Profile::builtin(name).unwrap();
            assert_eq!(p.name, name);
            assert!(p.model.improve_prob[2] > 0.0);
        }
        assert!(Profile::builtin("nope").is_err());
    }
}
