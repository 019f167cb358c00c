//! JSON configuration shared by the CLI subcommands.
//!
//! Every field has a default, so `{}` is a valid config. Unknown keys are
//! rejected. Validation errors name the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    default_power_sample_sizes, ExperimentGrid, ReplicateOverride, STUDY_HAZARD_RATIOS,
};
use crate::sim::{moderate_target, CalibrationSettings, CalibrationTarget, Profile, ResponseEffect, TransitionModel, TrialConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Built-in profile name (`moderate`, `high`) or a path to a profile JSON.
    pub profile: String,
    pub hazard_ratios: Vec<f64>,
    /// Grid sample sizes; each subcommand has its own default grid.
    pub sample_sizes: Option<Vec<usize>>,
    pub replicates: usize,
    pub replicate_overrides: Vec<ReplicateOverride>,
    pub alpha: f64,
    /// Analysis horizon in months; also the simulated follow-up.
    pub horizon: u32,
    pub target_power: f64,
    pub master_seed: u64,
    pub response_effect: ResponseEffect,
    pub output_dir: Option<PathBuf>,
    /// Single-trial settings for `simulate`.
    pub sample_size: usize,
    pub hazard_ratio: f64,
    pub seed: u64,
    pub calibration: CalibrationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            profile: "moderate".into(),
            hazard_ratios: STUDY_HAZARD_RATIOS.to_vec(),
            sample_sizes: None,
            replicates: 100,
            replicate_overrides: vec![ReplicateOverride {
                hazard_ratio: 0.8,
                replicates: 1000,
            }],
            alpha: 0.05,
            horizon: 60,
            target_power: 0.8,
            master_seed: 1,
            response_effect: ResponseEffect::default(),
            output_dir: None,
            sample_size: 150,
            hazard_ratio: 0.7,
            seed: 1,
            calibration: CalibrationConfig::default(),
        }
    }
}

/// Settings for `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub name: String,
    pub target: CalibrationTarget,
    /// Starting model; improvement probabilities are overwritten.
    pub template: Option<TransitionModel>,
    pub subjects: usize,
    pub seed: u64,
    pub rounds: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let s = CalibrationSettings::default();
        CalibrationConfig {
            name: "moderate".into(),
            target: moderate_target(),
            template: None,
            subjects: s.subjects,
            seed: s.seed,
            rounds: 8,
        }
    }
}

impl CalibrationConfig {
    pub fn settings(&self) -> CalibrationSettings {
        CalibrationSettings {
            subjects: self.subjects,
            seed: self.seed,
            ..CalibrationSettings::default()
        }
    }

    pub fn template(&self) -> TransitionModel {
        self.template.clone().unwrap_or_else(TransitionModel::template)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_sample_size(field: &str, ss: usize) -> Result<()> {
    if ss < 2 || ss % 2 != 0 {
        return Err(Error::config(
            field,
            format!("{ss} cannot be split 1:1 between the arms (need an even number >= 2)"),
        ));
    }
    Ok(())
}

fn check_hazard_ratio(field: &str, hr: f64) -> Result<()> {
    if !(hr > 0.0) || !hr.is_finite() {
        return Err(Error::config(field, format!("{hr} is not a positive finite hazard ratio")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", format!("{} is outside the open range (0,1)", self.alpha)));
        }
        if !(self.target_power > 0.0 && self.target_power < 1.0) {
            return Err(Error::config(
                "target_power",
                format!("{} is outside the open range (0,1)", self.target_power),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        for o in &self.replicate_overrides {
            check_hazard_ratio("replicate_overrides.hazard_ratio", o.hazard_ratio)?;
            if o.replicates == 0 {
                return Err(Error::config("replicate_overrides.replicates", "must be at least 1"));
            }
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1 month"));
        }
        if self.hazard_ratios.is_empty() {
            return Err(Error::config("hazard_ratios", "must not be empty"));
        }
        for &hr in &self.hazard_ratios {
            check_hazard_ratio("hazard_ratios", hr)?;
        }
        if let Some(sizes) = &self.sample_sizes {
            if sizes.is_empty() {
                return Err(Error::config("sample_sizes", "must not be empty"));
            }
            for &ss in sizes {
                check_sample_size("sample_sizes", ss)?;
            }
        }
        check_sample_size("sample_size", self.sample_size)?;
        check_hazard_ratio("hazard_ratio", self.hazard_ratio)?;
        if self.profile.is_empty() {
            return Err(Error::config("profile", "must name a built-in profile or a file"));
        }
        let c = &self.calibration;
        c.target
            .validate()
            .map_err(|e| Error::config("calibration.target", e.to_string()))?;
        if c.subjects == 0 {
            return Err(Error::config("calibration.subjects", "must be at least 1"));
        }
        if c.rounds == 0 {
            return Err(Error::config("calibration.rounds", "must be at least 1"));
        }
        if let Some(t) = &c.template {
            t.validate()
                .map_err(|e| Error::config("calibration.template", e.to_string()))?;
        }
        Ok(())
    }

    /// Resolves `profile` as a built-in name first, then as a path relative
    /// to `base` (the config file's directory).
    pub fn load_profile(&self, base: Option<&Path>) -> Result<Profile> {
        if let Ok(p) = Profile::builtin(&self.profile) {
            return Ok(p);
        }
        let path = match base {
            Some(b) => b.join(&self.profile),
            None => PathBuf::from(&self.profile),
        };
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::config("profile", format!("cannot read `{}`: {e}", path.display()))
        })?;
        Profile::from_json(&text)
    }

    /// The profile's control model with the configured horizon.
    pub fn control_model(&self, profile: &Profile) -> TransitionModel {
        let mut m = profile.model.clone();
        m.horizon_months = self.horizon;
        m
    }

    pub fn trial_config(&self, profile: &Profile) -> TrialConfig {
        TrialConfig::new(self.sample_size, self.hazard_ratio, self.control_model(profile), self.seed)
            .with_response_effect(self.response_effect)
    }

    pub fn grid(&self, default_sizes: impl FnOnce() -> Vec<usize>) -> ExperimentGrid {
        ExperimentGrid {
            hazard_ratios: self.hazard_ratios.clone(),
            sample_sizes: self.sample_sizes.clone().unwrap_or_else(default_sizes),
            replicates: self.replicates,
            replicate_overrides: self.replicate_overrides.clone(),
            alpha: self.alpha,
            profile: self.profile.clone(),
            master_seed: self.master_seed,
            response_effect: self.response_effect,
        }
    }

    pub fn power_grid(&self) -> ExperimentGrid {
        self.grid(default_power_sample_sizes)
    }
}
