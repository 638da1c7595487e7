//! Active unlearning: Descent-to-Delete and the Newton-step update, each
//! calibrated either to the retain set's curvature or to the worst case.

mod d2d;
mod newton;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::erm::{CurvatureReport, LossSpec};
use crate::error::{invalid, Result};
use crate::mechanism::{PrivacyParams, SensitivityReport};

pub use d2d::{
    d2d_iteration_ratio, d2d_iterations, projected_gradient_descent, unlearn_d2d, D2dCount, PgdTrace,
    DEFAULT_D2D_SIGMA,
};
pub use newton::{newton_sensitivity, newton_sigma, recover_hessian, unlearn_newton};

/// Which constants drive the calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Retain,
    Global,
}

impl std::fmt::Display for Calibration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Calibration::Retain => "retain",
            Calibration::Global => "global",
        })
    }
}

/// Single-point deletion from `full_data`.
#[derive(Debug, Clone)]
pub struct UnlearnRequest {
    pub full_data: Dataset,
    pub delete_index: usize,
    pub loss: LossSpec,
    pub params: PrivacyParams,
    /// Noise scale for Descent-to-Delete; ignored by the Newton update.
    pub sigma: f64,
    pub seed: u64,
}

impl UnlearnRequest {
    pub fn new(full_data: Dataset, delete_index: usize, loss: LossSpec, params: PrivacyParams, seed: u64) -> Result<Self> {
        if delete_index >= full_data.n() {
            return Err(invalid(format!(
                "delete index {delete_index} out of range for {} rows",
                full_data.n()
            )));
        }
        if full_data.n() < 2 {
            return Err(invalid("need at least two rows to delete one"));
        }
        Ok(Self {
            full_data,
            delete_index,
            loss,
            params,
            sigma: DEFAULT_D2D_SIGMA,
            seed,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// The retained set `R`.
    pub fn retain_set(&self) -> Result<Dataset> {
        self.full_data.without(self.delete_index)
    }

    pub fn deleted_point(&self) -> (DVector<f64>, f64) {
        (
            self.full_data.row(self.delete_index),
            self.full_data.label(self.delete_index),
        )
    }
}

/// Everything needed to reconstruct a calibration decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnAudit {
    pub calibration: Calibration,
    pub curvature: CurvatureReport,
    pub sensitivity: SensitivityReport,
    pub sigma: f64,
    /// Gradient steps taken (Descent-to-Delete only).
    pub iterations: Option<usize>,
    /// Iteration count before rounding up.
    pub iterations_real: Option<f64>,
    /// Distance bound the certificate relies on.
    pub shift_bound: f64,
    /// Whether the norm cap was active during the update.
    pub projection_active: bool,
    /// `λ_min` of the recovered Hessian (Newton only).
    pub hessian_min_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct UnlearnResult {
    pub w_out: DVector<f64>,
    /// The update before noise; exposed for verification only.
    pub w_pre_noise: DVector<f64>,
    pub audit: UnlearnAudit,
    pub certified: PrivacyParams,
}
