//! Minimization of `F̂_R` over the ball `‖w‖ ≤ R_w`.
//!
//! When the unconstrained minimizer lies outside the ball, the constrained
//! one is `w(μ) = argmin F̂_R(w) + (μ/2)‖w‖²` for the `μ > 0` with
//! `‖w(μ)‖ = R_w`; `‖w(μ)‖` decreases in `μ`, so `μ` is found by bisection.

use nalgebra::{DMatrix, DVector};

use super::loss::{LossKind, LossSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Target for the projected-gradient stationarity measure.
    pub tolerance: f64,
    pub max_newton_steps: usize,
    pub max_bisection_steps: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_newton_steps: 200,
            max_bisection_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub w: DVector<f64>,
    /// Whether the norm cap is active at the solution.
    pub constrained: bool,
    /// `‖w − Proj(w − ∇F̂_R(w))‖`; the gradient norm for interior solutions.
    pub stationarity: f64,
}

pub fn train(data: &Dataset, loss: &LossSpec, options: &TrainOptions) -> Result<DVector<f64>> {
    Ok(train_detailed(data, loss, options, None)?.w)
}

pub fn train_detailed(
    data: &Dataset,
    loss: &LossSpec,
    options: &TrainOptions,
    warm: Option<&DVector<f64>>,
) -> Result<TrainOutput> {
    loss.check_labels(data)?;
    let radius = data.bound_rw();
    let d = data.d();
    let start = warm.cloned().unwrap_or_else(|| DVector::zeros(d));

    let unconstrained = match loss.kind {
        LossKind::Mse => {
            let a = data.gram() / data.n() as f64 + DMatrix::identity(d, d) * loss.lambda;
            if loss.lambda == 0.0 && min_eigenvalue(&a) <= 1e-14 * (1.0 + a.norm()) {
                return Err(Error::Degenerate(
                    "least squares without regularization on rank-deficient features has no unique solution".into(),
                ));
            }
            Some(solve_penalized(data, loss, 0.0, &start, options)?)
        }
        // Without regularization the logistic risk may have no minimizer at all.
        LossKind::Logistic if loss.lambda == 0.0 => solve_penalized(data, loss, 0.0, &start, options)
            .ok()
            .filter(|w| w.iter().all(|v| v.is_finite())),
        LossKind::Logistic => Some(solve_penalized(data, loss, 0.0, &start, options)?),
    };
    if let Some(w) = unconstrained {
        if w.norm() <= radius {
            let stationarity = stationarity(data, loss, &w, radius);
            return Ok(TrainOutput {
                w,
                constrained: false,
                stationarity,
            });
        }
    }

    // ‖w(μ)‖ ≤ ‖∇F̂_R(0)‖/μ by μ-strong convexity of the penalized risk.
    let g0 = loss.gradient(data, &DVector::zeros(d)).norm();
    let mut hi = (g0 / radius).max(f64::MIN_POSITIVE);
    let mut lo = 0.0f64;
    let mut w_hi = solve_penalized(data, loss, hi, &start, options)?;
    while w_hi.norm() > radius {
        lo = hi;
        hi *= 2.0;
        w_hi = solve_penalized(data, loss, hi, &w_hi, options)?;
    }
    let mut w = w_hi.clone();
    for _ in 0..options.max_bisection_steps {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let candidate = solve_penalized(data, loss, mid, &w, options)?;
        if candidate.norm() > radius {
            lo = mid;
        } else {
            hi = mid;
            w = candidate;
        }
        if (w.norm() - radius).abs() <= 1e-14 * radius {
            break;
        }
    }
    let norm = w.norm();
    if norm > 0.0 {
        w *= radius / norm;
    }
    let stationarity = stationarity(data, loss, &w, radius);
    Ok(TrainOutput {
        w,
        constrained: true,
        stationarity,
    })
}

/// Projected-gradient residual `‖w − Proj_{‖·‖≤r}(w − ∇F̂_R(w))‖`.
pub fn stationarity(data: &Dataset, loss: &LossSpec, w: &DVector<f64>, radius: f64) -> f64 {
    let mut step = w - loss.gradient(data, w);
    crate::linalg::project_to_ball(&mut step, radius);
    (w - step).norm()
}

/// Unconstrained minimizer of `F̂_R(w) + (μ/2)‖w‖²`.
fn solve_penalized(
    data: &Dataset,
    loss: &LossSpec,
    mu: f64,
    start: &DVector<f64>,
    options: &TrainOptions,
) -> Result<DVector<f64>> {
    let d = data.d();
    let shifted = LossSpec {
        kind: loss.kind,
        lambda: loss.lambda + mu,
    };
    match loss.kind {
        LossKind::Mse => {
            let a = data.gram() / data.n() as f64 + DMatrix::identity(d, d) * shifted.lambda;
            let b = data.x().tr_mul(data.y()) / data.n() as f64;
            a.cholesky()
                .map(|c| c.solve(&b))
                .ok_or_else(|| Error::Degenerate("least-squares system is singular".into()))
        }
        LossKind::Logistic => newton(data, &shifted, start, options),
    }
}

/// Damped Newton with Armijo backtracking.
fn newton(data: &Dataset, loss: &LossSpec, start: &DVector<f64>, options: &TrainOptions) -> Result<DVector<f64>> {
    let mut w = start.clone();
    let target = 0.1 * options.tolerance;
    for _ in 0..options.max_newton_steps {
        let g = loss.gradient(data, &w);
        if g.norm() <= target {
            return Ok(w);
        }
        let h = loss.hessian(data, &w);
        let dir = match h.cholesky() {
            Some(c) => -c.solve(&g),
            None => -&g,
        };
        let f0 = loss.value(data, &w);
        let g0 = g.norm();
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &w + &dir * t;
            // Near the optimum the decrease in value drops below rounding
            // while the gradient norm still resolves progress.
            if loss.value(data, &cand) <= f0 + 1e-4 * t * slope
                || loss.gradient(data, &cand).norm() <= (1.0 - 1e-4 * t) * g0
            {
                w = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No decrease is representable any more; accept if nearly stationary.
            if g.norm() <= options.tolerance {
                return Ok(w);
            }
            return Err(Error::Convergence(format!(
                "Newton line search stalled at gradient norm {:e}",
                g.norm()
            )));
        }
    }
    let g = loss.gradient(data, &w).norm();
    if g <= options.tolerance {
        return Ok(w);
    }
    Err(Error::Convergence(format!(
        "Newton did not converge in {} steps (gradient norm {g:e})",
        options.max_newton_steps
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_closed_form() {
        let data = Dataset::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_vec(vec![1.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let w = train(&data, &LossSpec::mse(1.0).unwrap(), &TrainOptions::default()).unwrap();
        assert_relative_eq!(w[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn zero_labels_give_zero() {
        let data = Dataset::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.7]),
            DVector::zeros(2),
            1.0,
            1.0,
        )
        .unwrap();
        let w = train(&data, &LossSpec::mse(0.01).unwrap(), &TrainOptions::default()).unwrap();
        assert_eq!(w.norm(), 0.0);
    }

    #[test]
    fn rank_deficient_unregularized_mse_fails() {
        let data = Dataset::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.2, 0.0]),
            DVector::from_vec(vec![0.1, 0.2]),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            train(&data, &LossSpec::mse(0.0).unwrap(), &TrainOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn separable_logistic_without_regularization_hits_the_cap() {
        let data = Dataset::new(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![1.0, -1.0]),
            1.0,
            2.0,
        )
        .unwrap();
        let out = train_detailed(&data, &LossSpec::logistic(0.0).unwrap(), &TrainOptions::default(), None).unwrap();
        assert!(out.constrained);
        assert_relative_eq!(out.w[0], 2.0, max_relative = 1e-12);
        assert!(out.stationarity < 1e-9);
    }

    #[test]
    fn capped_least_squares_matches_kkt() {
        let data = Dataset::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.2, 0.6, 0.6]),
            DVector::from_vec(vec![1.0, 1.0, -1.0]),
            1.0,
            0.5,
        )
        .unwrap();
        let loss = LossSpec::mse(1e-4).unwrap();
        let out = train_detailed(&data, &loss, &TrainOptions::default(), None).unwrap();
        assert!(out.constrained);
        assert_relative_eq!(out.w.norm(), 0.5, max_relative = 1e-12);
        assert!(out.stationarity < 1e-9, "{}", out.stationarity);
        // The gradient points straight back along -w at a boundary optimum.
        let g = loss.gradient(&data, &out.w);
        let cos = -g.dot(&out.w) / (g.norm() * out.w.norm());
        assert!((cos - 1.0).abs() < 1e-9);
    }
}
