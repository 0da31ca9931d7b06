//! Sparse covariance and precision matrix estimation through DAG structure learning.
//!
//! The PC-DAG estimator learns an equivalence class of Gaussian DAGs with the
//! PC-algorithm, fits the regression parameterization on several members of the
//! class and averages the implied covariance and precision matrices. The crate
//! also provides the graphical lasso and the OGK robust scatter estimator for
//! comparison, a data simulator and a benchmark harness.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dagcov;
pub mod data;
pub mod error;
pub mod eval;
pub mod glasso;
pub mod graph;
pub mod linalg;
pub mod pcalg;
pub mod result;
pub mod rng;
pub mod robust;
pub mod simgen;

pub use nalgebra;

pub use dagcov::{pc_dag_estimate, InitialEstimator, PcDagConfig};
pub use data::{Dataset, GroundTruth};
pub use error::{Error, Result};
pub use eval::{BenchmarkReport, BenchmarkSetting, Grid, Method};
pub use glasso::{glasso_fit, GlassoConfig, GlassoFit};
pub use graph::{Cpdag, Dag, Mark, PartiallyDirectedGraph};
pub use pcalg::{pc_cpdag, CiTestContext, PcResult};
pub use result::{EstimationResult, Tuning};
pub use robust::{ogk_covariance, OgkConfig};
pub use simgen::{ErrorDistribution, Model};
