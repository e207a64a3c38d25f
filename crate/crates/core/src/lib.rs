//! Constant-potential hedging for prediction with expert advice.
//!
//! The crate implements the CP learner for the exponential-weights and
//! NormalHedge.BH potentials, tracks the second-moment complexity `V_T`,
//! measures quantile regret, and ships numerical certificates for the
//! per-step inequalities and regret bounds that the learner should satisfy.
//!
//! Module map:
//!
//! - [`potentials`]: scalar potentials, their derivatives and projection;
//! - [`engine`]: the learner itself;
//! - [`adversaries`]: loss generators and CSV loading;
//! - [`diagnostics`]: certificates and bound formulas;
//! - [`harness`]: configuration, experiment runs and file output.

pub mod adversaries;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod harness;
pub mod potentials;
pub mod rng;
mod root;

pub use engine::{Engine, EngineState, StepRecord, VtMode};
pub use error::{Error, Result};
pub use potentials::{Domain, PotentialKind, PotentialSpec};
