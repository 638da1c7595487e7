//! Regularized empirical risk minimization: losses, training, curvature
//! constants and stability bounds.

mod bounds;
mod loss;
mod train;

pub use bounds::{
    curvature, erm_root_excess, gs_erm, hessian_min_eigenvalue_at, logistic_curvature_factor, oracle_stability,
    rs_erm, rs_erm_root, sampled_hessian_floor, CurvatureReport, StabilityOracle,
};
pub use loss::{LossKind, LossSpec};
pub use train::{stationarity, train, train_detailed, TrainOptions, TrainOutput};
