//! Retain-sensitivity analysis and certified unlearning.
//!
//! Each problem module pairs a closed-form retain-sensitivity bound with the
//! matching global bound and a brute-force oracle; [`mechanism`] turns a
//! retain report into calibrated Gaussian noise, [`active`] implements the
//! two update-then-noise algorithms, and [`harness`] runs parameter sweeps
//! and writes CSV reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod dataset;
pub mod erm;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mechanism;
pub mod median;
pub mod mst;
pub mod pca;
pub mod rng;
pub mod svm;

pub use dataset::{Dataset, Preprocessing};
pub use erm::{CurvatureReport, LossKind, LossSpec};
pub use error::{Error, ErrorCategory, Result};
pub use mechanism::{NoiseShape, NoiseSpec, PrivacyParams, SensitivityKind, SensitivityReport};
pub use median::ScalarSample;
pub use mst::WeightedGraph;
pub use svm::{KernelSpec, MarginReport};
