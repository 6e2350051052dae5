//! Median-of-means min-max estimators for heavy-tailed, corrupted data, with
//! the VC-dimension calculus that sizes their block counts and risk radii.

pub mod cov_est;
pub mod data_lab;
pub mod eigensplit;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mean_est;
pub mod mom_core;
pub mod reg_est;
pub mod vc_calculus;

pub use error::{MomError, Result};
pub use mean_est::{EstimatorReport, SolverOptions};
pub use mom_core::{BlockPartition, Dataset, Truth};
