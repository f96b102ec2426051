//! Multi-task feature learning for temporal outcome series.
//!
//! Stages: [`ingest`] factor tables and epidemic series, select features with
//! [`featureprep`], fit ridge / lasso / fused sparse group lasso models from
//! [`solvers`] inside the repeated experiments of [`multitask`], rank features
//! by [`voting`], and augment scarce data with [`seir`] simulations.

pub mod error;
pub mod featureprep;
pub mod ingest;
pub mod multitask;
pub mod rng;
pub mod seir;
pub mod solvers;
pub mod voting;

pub use error::{Error, Result};
pub use ingest::{Indicator, RegionId, Sector};
pub use multitask::{EvalReport, RunResult, TaskSpec};
pub use solvers::{Model, PenaltyConfig, SolverOptions, SolverReport, WeightMatrix};
