use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{LossKind, LossSpec};
use super::train::{train_detailed, TrainOptions};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::{min_eigenvalue, random_in_ball, sym_eigen};
use crate::mechanism::{SensitivityKind, SensitivityReport};
use crate::rng;

/// Curvature and regularity constants of `F̂_R` on the ball `‖w‖ ≤ R_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub loss: LossKind,
    pub lambda: f64,
    /// Strong-convexity floor `inf_w λ_min(∇²F̂_R(w))`.
    pub lambda_r: f64,
    /// Smoothness `sup_w λ_max(∇²F̂_R(w))`.
    pub beta_r: f64,
    pub kappa_r: f64,
    /// Gradient-descent contraction factor `(κ−1)/(κ+1)`.
    pub gamma_r: f64,
    /// Lipschitz constant `L` of the per-sample loss.
    pub lipschitz: f64,
    /// Lipschitz constant `M` of the per-sample Hessian.
    pub hessian_lipschitz: f64,
    pub n: usize,
    /// `λ_min(XᵀX)` and `λ_max(XᵀX)`, not divided by `n`.
    pub gram_min: f64,
    pub gram_max: f64,
}

impl CurvatureReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        loss: LossKind,
        lambda: f64,
        lambda_r: f64,
        beta_r: f64,
        lipschitz: f64,
        hessian_lipschitz: f64,
        n: usize,
        gram: (f64, f64),
    ) -> Self {
        let (kappa_r, gamma_r) = if lambda_r > 0.0 {
            let kappa = (beta_r / lambda_r).max(1.0);
            (kappa, (kappa - 1.0) / (kappa + 1.0))
        } else {
            (f64::INFINITY, 1.0)
        };
        Self {
            loss,
            lambda,
            lambda_r,
            beta_r,
            kappa_r,
            gamma_r,
            lipschitz,
            hessian_lipschitz,
            n,
            gram_min: gram.0,
            gram_max: gram.1,
        }
    }

    /// No strong convexity anywhere on the ball.
    pub fn is_degenerate(&self) -> bool {
        !(self.lambda_r > 0.0)
    }

    /// Step size `2/(λ_R + β_R)`.
    pub fn step_size(&self) -> f64 {
        2.0 / (self.lambda_r + self.beta_r)
    }

    /// Data-independent counterpart: curvature floor `λ`, the worst-case
    /// smoothness over all datasets with `‖x‖ ≤ B`, and the same `L`, `M`
    /// and `n`, so that ratios isolate the curvature gain.
    pub fn global(&self, bound_b: f64) -> Self {
        let b2 = bound_b * bound_b;
        let beta = match self.loss {
            LossKind::Mse => b2 + self.lambda,
            LossKind::Logistic => 0.25 * b2 + self.lambda,
        };
        Self::assemble(
            self.loss,
            self.lambda,
            self.lambda,
            beta,
            self.lipschitz,
            self.hessian_lipschitz,
            self.n,
            (self.gram_min, self.gram_max),
        )
    }
}

/// Logistic curvature factor `(2cosh(B·R_w/2))⁻²`, the smallest value of
/// `σ'(m)` over `|m| ≤ B·R_w`.
pub fn logistic_curvature_factor(bound_b: f64, bound_rw: f64) -> f64 {
    (2.0 * (0.5 * bound_b * bound_rw).cosh()).powi(-2)
}

pub fn curvature(data: &Dataset, loss: &LossSpec) -> Result<CurvatureReport> {
    loss.check_labels(data)?;
    let n = data.n();
    let nf = n as f64;
    let b = data.bound_b();
    let rw = data.bound_rw();
    let lambda = loss.lambda;
    let eig = data.gram().symmetric_eigenvalues();
    let gram_min = eig.min().max(0.0);
    let gram_max = eig.max().max(0.0);
    let report = match loss.kind {
        LossKind::Mse => {
            // Curvature floor of the augmented set R ∪ {z} that depends on R
            // alone: a rank-one PSD term cannot lower λ_min(XᵀX).
            let lambda_aug = gram_min / (nf + 1.0) + lambda;
            // ‖w_{R∪z}‖ is bounded by the closed form and by the cap.
            let w_bound = if lambda_aug > 0.0 { (b / lambda_aug).min(rw) } else { rw };
            let lipschitz = b * (b * w_bound + 1.0) + lambda * w_bound;
            CurvatureReport::assemble(
                LossKind::Mse,
                lambda,
                gram_min / nf + lambda,
                gram_max / nf + lambda,
                lipschitz,
                0.0,
                n,
                (gram_min, gram_max),
            )
        }
        LossKind::Logistic => {
            let c = logistic_curvature_factor(b, rw);
            CurvatureReport::assemble(
                LossKind::Logistic,
                lambda,
                c * gram_min / nf + lambda,
                gram_max / (4.0 * nf) + lambda,
                b + lambda * rw,
                b.powi(3) / (6.0 * 3f64.sqrt()),
                n,
                (gram_min, gram_max),
            )
        }
    };
    Ok(report)
}

/// `L/(n·λ_R)`.
pub fn rs_erm(report: &CurvatureReport, n: usize) -> Result<SensitivityReport> {
    if report.is_degenerate() {
        return Err(Error::Unbounded(format!(
            "λ_R = {} (λ = {}): the {} risk is not strongly convex on this data",
            report.lambda_r, report.lambda, report.loss
        )));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let value = report.lipschitz / (n as f64 * report.lambda_r);
    Ok(SensitivityReport::new(value, SensitivityKind::Retain, "rs_erm")
        .with_input("L", report.lipschitz)
        .with_input("n", n as f64)
        .with_input("lambda_r", report.lambda_r)
        .with_input("lambda", report.lambda))
}

/// `L/(n·λ)`.
pub fn gs_erm(lipschitz: f64, n: usize, lambda: f64) -> Result<SensitivityReport> {
    if !(lambda > 0.0) {
        return Err(Error::Unbounded(format!(
            "global ERM sensitivity L/(nλ) diverges at λ = {lambda}"
        )));
    }
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok(SensitivityReport::new(lipschitz / (n as f64 * lambda), SensitivityKind::Global, "gs_erm")
        .with_input("L", lipschitz)
        .with_input("n", n as f64)
        .with_input("lambda", lambda))
}

/// Refined stability bound `(λ₀ − √(λ₀² − 4ML/n))/(2M)` with `λ₀` the
/// Hessian's smallest eigenvalue at the trained optimum.
///
/// Evaluated as `(2L/n)/(λ₀ + √(λ₀² − 4ML/n))`, which is the same number
/// without the cancellation and extends continuously to `M = 0`.
pub fn rs_erm_root(lambda_0: f64, lipschitz: f64, m: f64, n: usize) -> Result<SensitivityReport> {
    if n == 0 || !(lambda_0 > 0.0) || !(lipschitz >= 0.0) || !(m >= 0.0) {
        return Err(invalid(format!(
            "rs_erm_root needs n > 0, λ₀ > 0, L ≥ 0, M ≥ 0 (got n={n}, λ₀={lambda_0}, L={lipschitz}, M={m})"
        )));
    }
    let nf = n as f64;
    let disc = lambda_0 * lambda_0 - 4.0 * m * lipschitz / nf;
    if disc < 0.0 {
        return Err(Error::ConditionFailed {
            reason: format!("λ₀² = {:e} is below 4ML/n = {:e}", lambda_0 * lambda_0, 4.0 * m * lipschitz / nf),
            deficit: -disc,
        });
    }
    let value = (2.0 * lipschitz / nf) / (lambda_0 + disc.sqrt());
    Ok(SensitivityReport::new(value, SensitivityKind::Retain, "rs_erm_root")
        .with_input("lambda_0", lambda_0)
        .with_input("L", lipschitz)
        .with_input("M", m)
        .with_input("n", nf))
}

/// `root − L/(nλ₀) = 4ML²/(n²λ₀(λ₀ + s)²)` with `s = √(λ₀² − 4ML/n)`,
/// computed without subtracting the two bounds.
pub fn erm_root_excess(lambda_0: f64, lipschitz: f64, m: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let disc = lambda_0 * lambda_0 - 4.0 * m * lipschitz / nf;
    if disc < 0.0 || !(lambda_0 > 0.0) {
        return Err(Error::ConditionFailed {
            reason: "root bound hypothesis fails".into(),
            deficit: -disc,
        });
    }
    let s = lambda_0 + disc.sqrt();
    Ok(4.0 * m * lipschitz * lipschitz / (nf * nf * lambda_0 * s * s))
}

pub fn hessian_min_eigenvalue_at(data: &Dataset, loss: &LossSpec, w: &DVector<f64>) -> f64 {
    min_eigenvalue(&loss.hessian(data, w))
}

/// Where the retraining oracle draws added points from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOracle {
    pub trial_count: usize,
    pub seed: u64,
    pub train: TrainOptions,
}

/// Empirical retain sensitivity by retraining on `R ∪ {z}`.
///
/// Candidates: `±B` along the top and bottom eigenvectors of `XᵀX` with
/// labels `±1`, the zero point, then `trial_count` uniform ball points with
/// random labels (±1 for logistic, uniform in `[−1, 1]` for MSE). Trials
/// run in parallel, each with its own random stream.
pub fn oracle_stability(data: &Dataset, loss: &LossSpec, oracle: &StabilityOracle) -> Result<SensitivityReport> {
    let base = train_detailed(data, loss, &oracle.train, None)?;
    let d = data.d();
    let b = data.bound_b();
    let eig = sym_eigen(&data.gram());
    let mut fixed: Vec<(DVector<f64>, f64)> = Vec::new();
    for col in [0, d - 1] {
        let v = eig.vectors.column(col).into_owned();
        for sx in [1.0, -1.0] {
            for y in [1.0, -1.0] {
                fixed.push((&v * (sx * b), y));
            }
        }
    }
    fixed.push((DVector::zeros(d), 1.0));
    if loss.kind == LossKind::Mse {
        fixed.push((DVector::zeros(d), 0.0));
    }

    let distance = |x: &DVector<f64>, y: f64| -> Result<f64> {
        let extended = data.with_point(x, y)?;
        let out = train_detailed(&extended, loss, &oracle.train, Some(&base.w))?;
        Ok((out.w - &base.w).norm())
    };
    let mut best = 0.0f64;
    for (x, y) in &fixed {
        best = best.max(distance(x, *y)?);
    }
    let random_best = (0..oracle.trial_count)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::seeded_stream(oracle.seed, t as u64);
            let x = random_in_ball(d, b, &mut r);
            let y = match loss.kind {
                LossKind::Logistic => {
                    if rand::Rng::random::<bool>(&mut r) {
                        1.0
                    } else {
                        -1.0
                    }
                }
                LossKind::Mse => 2.0 * rand::Rng::random::<f64>(&mut r) - 1.0,
            };
            distance(&x, y)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    best = best.max(random_best);
    Ok(SensitivityReport::new(best, SensitivityKind::Oracle, "oracle_stability")
        .with_input("n", data.n() as f64)
        .with_input("lambda", loss.lambda)
        .with_input("trials", (fixed.len() + oracle.trial_count) as f64)
        .with_input("base_constrained", if base.constrained { 1.0 } else { 0.0 }))
}

/// Smallest eigenvalue of the Hessian over random points of the ball; used
/// to check that the analytic floor `λ_R` is not optimistic.
pub fn sampled_hessian_floor(data: &Dataset, loss: &LossSpec, samples: usize, seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    (0..samples)
        .map(|_| {
            let w = random_in_ball(data.d(), data.bound_rw(), &mut r);
            hessian_min_eigenvalue_at(data, loss, &w)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn data_from(rows: &[f64], d: usize, y: &[f64], b: f64, rw: f64) -> Dataset {
        let n = y.len();
        Dataset::new(DMatrix::from_row_slice(n, d, rows), DVector::from_row_slice(y), b, rw).unwrap()
    }

    #[test]
    fn zero_features_reduce_to_lambda() {
        let data = data_from(&[0.0; 6], 2, &[1.0, -1.0, 1.0], 1.0, 1.0);
        for loss in [LossSpec::mse(0.3).unwrap(), LossSpec::logistic(0.3).unwrap()] {
            let c = curvature(&data, &loss).unwrap();
            assert_eq!(c.lambda_r, 0.3);
            let rs = rs_erm(&c, 3).unwrap();
            let gs = gs_erm(c.lipschitz, 3, 0.3).unwrap();
            assert_relative_eq!(rs.value, gs.value, max_relative = 1e-15);
        }
    }

    #[test]
    fn orthonormal_rows() {
        // n = d = 3, rows B·eᵢ: XᵀX = B²I.
        let b = 0.5;
        let data = data_from(&[b, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, b], 3, &[1.0, 0.0, -1.0], b, 1.0);
        let c = curvature(&data, &LossSpec::mse(0.0).unwrap()).unwrap();
        assert_relative_eq!(c.lambda_r, b * b / 3.0, max_relative = 1e-12);
        assert_relative_eq!(c.beta_r, b * b / 3.0, max_relative = 1e-12);
        assert_eq!(c.gamma_r, 0.0);
    }

    #[test]
    fn logistic_factor_at_zero() {
        assert_eq!(logistic_curvature_factor(0.0, 1.0), 0.25);
        assert!(logistic_curvature_factor(1.0, 1.0) < 0.25);
    }

    #[test]
    fn degenerate_curvature() {
        let data = data_from(&[0.5, 0.0, 0.2, 0.0], 2, &[1.0, -1.0], 1.0, 1.0);
        let c = curvature(&data, &LossSpec::logistic(0.0).unwrap()).unwrap();
        assert!(c.is_degenerate());
        assert!(matches!(rs_erm(&c, 2), Err(Error::Unbounded(_))));
        assert!(matches!(gs_erm(1.0, 2, 0.0), Err(Error::Unbounded(_))));
    }

    #[test]
    fn formula_examples() {
        assert_relative_eq!(gs_erm(1.0, 100, 1.0).unwrap().value, 0.01, max_relative = 1e-15);
        let root = rs_erm_root(1.0, 1.0, 1.0, 100).unwrap().value;
        assert_relative_eq!(root, 0.010_102_051_443_364_38, max_relative = 1e-14);
        let limit = rs_erm_root(0.7, 2.0, 0.0, 50).unwrap().value;
        assert_relative_eq!(limit, 2.0 / (50.0 * 0.7), max_relative = 1e-15);
        let tiny = rs_erm_root(0.7, 2.0, 1e-12, 50).unwrap().value;
        assert_relative_eq!(tiny, 2.0 / (50.0 * 0.7), max_relative = 1e-10);
        let err = rs_erm_root(0.1, 1.0, 1.0, 10).unwrap_err();
        match err {
            Error::ConditionFailed { deficit, .. } => assert_relative_eq!(deficit, 0.39, max_relative = 1e-12),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn excess_matches_difference() {
        let (l0, l, m, n) = (0.8, 1.3, 0.2, 40);
        let root = rs_erm_root(l0, l, m, n).unwrap().value;
        let diff = root - l / (n as f64 * l0);
        assert_relative_eq!(erm_root_excess(l0, l, m, n).unwrap(), diff, max_relative = 1e-9);
    }

    #[test]
    fn ratio_and_scaling() {
        let data = data_from(&[0.6, 0.0, 0.0, 0.8, -0.5, 0.5], 2, &[1.0, -1.0, 1.0], 1.0, 1.0);
        let c = curvature(&data, &LossSpec::logistic(0.01).unwrap()).unwrap();
        let rs = rs_erm(&c, 3).unwrap().value;
        let gs = gs_erm(c.lipschitz, 3, 0.01).unwrap().value;
        assert_relative_eq!(rs / gs, 0.01 / c.lambda_r, max_relative = 1e-12);
        assert_relative_eq!(rs_erm(&c, 6).unwrap().value, rs / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn zero_point_addition_only_reweights() {
        let data = data_from(&[0.6, 0.0, 0.0, 0.8, -0.5, 0.5], 2, &[1.0, -0.5, 0.2], 1.0, 10.0);
        let loss = LossSpec::mse(0.1).unwrap();
        let opts = TrainOptions::default();
        let w = super::super::train::train(&data, &loss, &opts).unwrap();
        let w0 = super::super::train::train(&data.with_point(&DVector::zeros(2), 0.0).unwrap(), &loss, &opts).unwrap();
        // Adding (0, 0) turns (XᵀX/n + λ) into (XᵀX/(n+1) + λ) with the same right-hand side scaled.
        let n = 3.0;
        let a = data.gram() / (n + 1.0) + DMatrix::identity(2, 2) * 0.1;
        let expect = a.cholesky().unwrap().solve(&(data.x().tr_mul(data.y()) / (n + 1.0)));
        assert!((w0 - &expect).norm() < 1e-12);
        assert!((w - expect).norm() > 0.0);
    }
}
