//! Spatially-clustered spatial autoregression.
//!
//! Jointly estimates a partition of spatial units and per-cluster
//! regression parameters (OLS, SAR, SEM or SLX) by alternating group-wise
//! maximum likelihood with a Potts-penalised membership update that rewards
//! neighbouring units sharing a cluster.

pub mod cli;
pub mod concentration;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod io;
pub mod likelihood;
mod linalg;
pub mod optimize;
pub mod selection;
pub mod synthesis;
pub mod weights;

pub use dataset::Dataset;
pub use engine::{ClusterAssignment, EngineConfig, FitResult};
pub use error::{Error, Result};
pub use likelihood::{ClusterFit, FitOptions, ModelFamily};
pub use weights::{SpatialWeights, UnitIndexMap};
