//! Monte Carlo simulation of three-stage Stern-Gerlach interferometer
//! experiments with paired which-path (TS) and output (OD) sensors.
//!
//! A run prepares a spin qubit, splits it over two paths, lets an
//! interpretation engine produce one click record per trial, classifies each
//! record against the stage's outcome taxonomy and aggregates the result
//! into a [`report::RunReport`].

pub mod config;
pub mod engines;
pub mod error;
pub mod physics;
pub mod report;
pub mod runner;
pub mod sensor;
pub mod stages;
pub mod state;
pub mod stats;
pub mod units;

pub use config::{parse_config, ExperimentConfig};
pub use engines::{BhsiParams, Engine, EngineKind, InterpretationEngine, RetrocausalMode};
pub use error::{Error, Result};
pub use physics::{PhaseMode, PhysicsParams};
pub use report::RunReport;
pub use runner::run;
pub use sensor::{ClickRecord, SensorTimings, Stage};
pub use stages::{classify, enumerate_taxonomy, OutcomeClass, OutcomeLabel, StageConfig};
pub use state::{prepare_qubit, PathState, SpinQubit};
