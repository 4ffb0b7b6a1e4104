//! Support vector machines for right-censored survival data.
//!
//! Uncensored observations are reweighted by the inverse of the estimated
//! probability of remaining uncensored (IPCW), which turns any convex loss on
//! the failure time into an unbiased empirical risk computable from censored
//! data. The crate provides:
//!
//! - [`data`]: datasets of `(z, u, delta)` triplets, CSV ingestion, response transforms
//! - [`censoring`]: Kaplan-Meier, Cox and generalized (kernel-weighted) Kaplan-Meier
//!   estimators of the censoring survival function, plus IPCW weights
//! - [`losses`]: hinge, squared, absolute and quantile losses with clipping
//! - [`kernels`]: kernel functions and Gram matrices
//! - [`solver`]: the weighted regularized risk minimizer in penalized or norm-constrained form
//! - [`model_selection`]: k-fold cross-validation and recursive feature elimination
//! - [`simulation`]: the five benchmark data-generating settings and the benchmark harness

pub mod censoring;
pub mod cox;
pub mod data;
pub mod error;
pub mod kernels;
pub mod losses;
pub mod model_selection;
pub mod rng;
pub mod simulation;
pub mod solver;

pub use censoring::{CensoringMethod, CensoringModel, StepSurvival};
pub use data::{CensoredSample, Dataset, ResponseTransform};
pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use losses::{LossKind, LossSpec};
pub use model_selection::{CvGrid, CvReport, CvSetup};
pub use solver::{CensoredSvmModel, FitConfig, Form};
