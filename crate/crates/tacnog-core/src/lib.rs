//! Time- and angle-constrained nonlinear optimal guidance toolkit.
//!
//! The pipeline has three stages:
//!
//! 1. [`dataset`] sweeps the costate parameter grid, propagates the backward
//!    extremal system of [`extremal`], filters out trajectories that fail
//!    either optimality condition, and emits a fixed-horizon training set.
//! 2. [`policy`] trains a small feedforward network on that set and wraps it
//!    with the time-scaling transform that turns a fixed-horizon map into a
//!    full feedback law.
//! 3. [`sim`] closes the loop: at each guidance step the current engagement
//!    is mapped into the canonical frame of [`model`], the policy is queried,
//!    and the dimensional plant is advanced.
//!
//! [`shooting`] solves the same boundary-value problem by Newton iteration on
//! the extremal flow, for baselines and dataset audits.

pub mod dataset;
pub mod error;
pub mod extremal;
pub mod model;
pub mod policy;
pub mod shooting;
pub mod sim;

pub use error::{Error, Result};
pub use extremal::{CostateParams, ExtremalTrajectory};
pub use model::{CanonicalScenario, DimensionalScenario, EngagementState};
pub use policy::{PolicyNetwork, TrainConfig};
pub use sim::SimResult;
