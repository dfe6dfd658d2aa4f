//! Fairness-aware preprocessing by chained conditional probability integral
//! transforms.
//!
//! Each adjustable covariate `x_j` is mapped through its fitted conditional CDF
//! given the protected attributes and the previously adjusted covariates, then
//! back through the empirical quantile function of its own marginal. The
//! resulting columns are independent of the protected attributes while keeping
//! conditional ranks and the original marginal distributions.
//!
//! Modules, in pipeline order:
//!
//! - [`tabular`]: tables, CSV ingestion, variable roles and plan validation
//! - [`empdist`]: ECDFs, generalized quantiles, randomized PIT
//! - [`condmodels`]: conditional regression models and their CDFs
//! - [`chain`]: the chained transform and its fair replicates
//! - [`diagnostics`]: Kolmogorov-Smirnov tests and the leakage audit
//! - [`evaluate`]: random forest, replicate averaging, ROC/AUC

pub mod chain;
pub mod condmodels;
pub mod diagnostics;
pub mod empdist;
pub mod error;
pub mod evaluate;
pub mod rng;
pub mod tabular;

pub use error::{Error, Result};
