use nalgebra::DVector;

use super::{Calibration, UnlearnAudit, UnlearnRequest, UnlearnResult};
use crate::dataset::Dataset;
use crate::erm::{curvature, gs_erm, rs_erm, train_detailed, CurvatureReport, LossSpec, TrainOptions};
use crate::error::{domain, Error, Result};
use crate::linalg::project_to_ball;
use crate::mechanism::{draw_noise, shift_multiplier, NoiseShape, NoiseSpec, PrivacyParams};

/// Noise scale used when the caller does not pick one.
pub const DEFAULT_D2D_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2dCount {
    pub iterations: usize,
    /// `ln(L/(nλ σ b))/ln(1/γ)` before rounding; negative when no step is needed.
    pub real: f64,
    /// `γ^I · L/(nλ)`, the distance bound after `I` steps.
    pub shift_bound: f64,
}

/// Smallest `I ≥ 0` with `γ^I · L/(nλ) ≤ σ·b(ε, δ)`, where `λ` and `γ` are
/// the report's curvature floor and contraction factor.
pub fn d2d_iterations(
    report: &CurvatureReport,
    n: usize,
    lipschitz: f64,
    sigma: f64,
    params: &PrivacyParams,
) -> Result<D2dCount> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if report.is_degenerate() {
        return Err(Error::Unbounded(format!(
            "curvature floor {} gives no contraction",
            report.lambda_r
        )));
    }
    let gamma = report.gamma_r;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Degenerate(format!(
            "contraction factor γ = {gamma} is not below 1"
        )));
    }
    let initial = lipschitz / (n as f64 * report.lambda_r);
    let target = sigma * shift_multiplier(params.epsilon, params.delta);
    let log_ratio = (initial / target).ln();
    if gamma == 0.0 {
        // One exact step reaches the optimum.
        let iterations = usize::from(initial > target);
        let shift_bound = if iterations == 0 { initial } else { 0.0 };
        return Ok(D2dCount {
            iterations,
            real: if log_ratio > 0.0 { 0.0 } else { log_ratio },
            shift_bound,
        });
    }
    let real = log_ratio / (1.0 / gamma).ln();
    let mut iterations = if real <= 0.0 { 0 } else { real.ceil() as usize };
    // Guard against rounding in the logarithms.
    while gamma.powi(iterations as i32) * initial > target {
        iterations += 1;
    }
    Ok(D2dCount {
        iterations,
        real,
        shift_bound: gamma.powi(iterations as i32) * initial,
    })
}

/// Pre-ceiling ratio `ln(C/λ_R)·ln γ / (ln(C/λ)·ln γ_R)` with
/// `C = L/(nσb)`; defined as 1 when neither calibration needs a step.
pub fn d2d_iteration_ratio(retain: &D2dCount, global: &D2dCount) -> f64 {
    if global.iterations == 0 && retain.iterations == 0 {
        1.0
    } else if global.real <= 0.0 {
        f64::INFINITY
    } else {
        retain.real.max(0.0) / global.real
    }
}

#[derive(Debug, Clone)]
pub struct PgdTrace {
    pub w: DVector<f64>,
    pub projection_active: bool,
    /// Every iterate including the start, when requested.
    pub iterates: Vec<DVector<f64>>,
}

/// `I` steps of `w ← Proj(w − η∇F̂_R(w))` onto `‖w‖ ≤ radius`.
pub fn projected_gradient_descent(
    data: &Dataset,
    loss: &LossSpec,
    start: &DVector<f64>,
    step: f64,
    iterations: usize,
    radius: f64,
    keep_iterates: bool,
) -> PgdTrace {
    let mut w = start.clone();
    let mut projection_active = false;
    let mut iterates = Vec::new();
    if keep_iterates {
        iterates.push(w.clone());
    }
    for _ in 0..iterations {
        let g = loss.gradient(data, &w);
        w.axpy(-step, &g, 1.0);
        projection_active |= project_to_ball(&mut w, radius);
        if keep_iterates {
            iterates.push(w.clone());
        }
    }
    PgdTrace {
        w,
        projection_active,
        iterates,
    }
}

/// Descent-to-Delete: train on `R′`, run the calibrated number of projected
/// gradient steps on `F̂_R`, add `N(0, σ²I)`.
pub fn unlearn_d2d(request: &UnlearnRequest, calibration: Calibration) -> Result<UnlearnResult> {
    let options = TrainOptions::default();
    let full = &request.full_data;
    let trained = train_detailed(full, &request.loss, &options, None)?;
    let retain = request.retain_set()?;
    let n = retain.n();
    let report_r = curvature(&retain, &request.loss)?;
    let report = match calibration {
        Calibration::Retain => report_r,
        Calibration::Global => report_r.global(retain.bound_b()),
    };
    let sensitivity = match calibration {
        Calibration::Retain => rs_erm(&report, n)?,
        Calibration::Global => gs_erm(report.lipschitz, n, report.lambda)?,
    };
    let count = d2d_iterations(&report, n, report.lipschitz, request.sigma, &request.params)?;
    let trace = projected_gradient_descent(
        &retain,
        &request.loss,
        &trained.w,
        report.step_size(),
        count.iterations,
        retain.bound_rw(),
        false,
    );
    let spec = NoiseSpec::new(request.sigma, NoiseShape::Vector(retain.d()))?;
    let noise = draw_noise(&spec, request.seed)
        .into_vector()
        .expect("vector shape yields a vector");
    Ok(UnlearnResult {
        w_out: &trace.w + noise,
        w_pre_noise: trace.w,
        audit: UnlearnAudit {
            calibration,
            curvature: report,
            sensitivity,
            sigma: request.sigma,
            iterations: Some(count.iterations),
            iterations_real: Some(count.real),
            shift_bound: count.shift_bound,
            projection_active: trace.projection_active || trained.constrained,
            hessian_min_eigenvalue: None,
        },
        certified: request.params,
    })
}
