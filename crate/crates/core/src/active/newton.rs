use nalgebra::{DMatrix, DVector};

use super::{Calibration, UnlearnAudit, UnlearnRequest, UnlearnResult};
use crate::erm::{curvature, train_detailed, CurvatureReport, LossSpec, TrainOptions};
use crate::error::{invalid, Error, Result};
use crate::linalg::{min_eigenvalue, project_to_ball};
use crate::mechanism::{
    certify_unlearning, draw_noise, gaussian_sigma, Branch, NoiseAudit, NoiseShape, NoiseSpec, PrivacyParams,
    SensitivityKind, SensitivityReport,
};

/// Distance bound `M·L²/(λ³·n²)` of the Newton update, with `λ` the
/// report's curvature floor.
pub fn newton_sensitivity(report: &CurvatureReport, n: usize, calibration: Calibration) -> Result<SensitivityReport> {
    if report.is_degenerate() {
        return Err(Error::Unbounded(format!(
            "curvature floor {} makes the Newton bound infinite",
            report.lambda_r
        )));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let nf = n as f64;
    let value = report.hessian_lipschitz * report.lipschitz.powi(2) / (report.lambda_r.powi(3) * nf * nf);
    let kind = match calibration {
        Calibration::Retain => SensitivityKind::Retain,
        Calibration::Global => SensitivityKind::Global,
    };
    Ok(SensitivityReport::new(value, kind, "newton_sensitivity")
        .with_input("M", report.hessian_lipschitz)
        .with_input("L", report.lipschitz)
        .with_input("lambda_r", report.lambda_r)
        .with_input("n", nf))
}

/// `σ = c(ε, δ) · M·L²/(λ³·n²)`. A zero `M` (quadratic loss) gives `σ = 0`:
/// the update is then exact.
pub fn newton_sigma(
    report: &CurvatureReport,
    n: usize,
    params: &PrivacyParams,
    calibration: Calibration,
) -> Result<NoiseSpec> {
    let sens = newton_sensitivity(report, n, calibration)?;
    let d = NoiseShape::Vector(1);
    match calibration {
        Calibration::Retain => certify_unlearning(&sens, params, d, Branch::Unlearn),
        Calibration::Global => {
            let mut spec = gaussian_sigma(&sens, params, d)?;
            spec.audit = Some(NoiseAudit {
                sensitivity: sens.value,
                kind: sens.kind,
                source: sens.source.clone(),
                inputs: sens.inputs.clone(),
                multiplier: params.gaussian_multiplier()?,
            });
            Ok(spec)
        }
    }
}

/// `Ĥ = ((n+1)·∇²F̂_{R′}(w) − ∇²f(w; z))/n`, the retain-set Hessian from the
/// full-data Hessian and the deleted point's Hessian.
pub fn recover_hessian(
    full_hessian: &DMatrix<f64>,
    point_hessian: &DMatrix<f64>,
    n_retain: usize,
) -> DMatrix<f64> {
    let n = n_retain as f64;
    (full_hessian * (n + 1.0) - point_hessian) / n
}

/// Newton-step unlearning: one Newton step on `F̂_R` from `w_{R′}` using the
/// recovered Hessian, then Gaussian noise.
///
/// The step uses the retain-set gradient `((n+1)∇F̂_{R′}(w) − ∇f(w; z))/n`,
/// which reduces to `−∇f(w; z)/n` at an unconstrained optimum; the result
/// is projected back onto the norm ball.
pub fn unlearn_newton(request: &UnlearnRequest, calibration: Calibration) -> Result<UnlearnResult> {
    let options = TrainOptions::default();
    let full = &request.full_data;
    let loss: &LossSpec = &request.loss;
    let trained = train_detailed(full, loss, &options, None)?;
    let w = &trained.w;
    let retain = request.retain_set()?;
    let n = retain.n();
    let nf = n as f64;
    let (xz, yz) = request.deleted_point();

    let h_hat = recover_hessian(&loss.hessian(full, w), &loss.sample_hessian(w, &xz, yz), n);
    let lambda_min = min_eigenvalue(&h_hat);
    let chol = h_hat.clone().cholesky().ok_or_else(|| {
        Error::Degenerate(format!(
            "recovered Hessian is not positive definite (λ_min = {lambda_min:e})"
        ))
    })?;
    let retain_gradient = (loss.gradient(full, w) * (nf + 1.0) - loss.sample_gradient(w, &xz, yz)) / nf;
    let mut w_bar: DVector<f64> = w - chol.solve(&retain_gradient);
    let projected = project_to_ball(&mut w_bar, retain.bound_rw());

    let report_r = curvature(&retain, loss)?;
    let report = match calibration {
        Calibration::Retain => report_r,
        Calibration::Global => report_r.global(retain.bound_b()),
    };
    let spec = newton_sigma(&report, n, &request.params, calibration)?;
    let sensitivity = newton_sensitivity(&report, n, calibration)?;
    let noise_spec = NoiseSpec::new(spec.sigma, NoiseShape::Vector(retain.d()))?;
    let noise = draw_noise(&noise_spec, request.seed)
        .into_vector()
        .expect("vector shape yields a vector");
    Ok(UnlearnResult {
        w_out: &w_bar + noise,
        w_pre_noise: w_bar,
        audit: UnlearnAudit {
            calibration,
            curvature: report,
            shift_bound: sensitivity.value,
            sensitivity,
            sigma: spec.sigma,
            iterations: None,
            iterations_real: None,
            projection_active: projected || trained.constrained,
            hessian_min_eigenvalue: Some(lambda_min),
        },
        certified: request.params,
    })
}
