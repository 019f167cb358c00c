//! Simulation and analysis of two-arm advanced-cancer trials on an ordinal
//! health-state ladder, comparing weighted trajectory analysis (CWTA) with
//! Kaplan-Meier PFS and OS.
//!
//! - [`sim`]: monthly single-level state transitions, hazard-ratio
//!   transform, dropout, calibration of response probabilities.
//! - [`km`]: PFS/OS endpoints, product-limit estimator, logrank test.
//! - [`cwta`]: weighted event tables, trajectory curves, weighted logrank.
//! - [`harness`]: deterministic parallel replicates, power, sample-size
//!   interpolation, time-to-first-significance.
//! - [`io`]: config parsing, CSV tables, SVG step plots.
//! - [`cli`]: the `cwta` command-line front end.

pub mod cli;
pub mod cwta;
pub mod error;
pub mod harness;
pub mod io;
pub mod km;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use sim::{Arm, HealthState, SimulatedTrial, SubjectTrajectory, TransitionModel, TrialConfig};
pub use stats::TestResult;
