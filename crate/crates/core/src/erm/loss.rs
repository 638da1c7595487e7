use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Logistic,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Mse => "mse",
            LossKind::Logistic => "logistic",
        })
    }
}

/// Per-sample loss `f(w; x, y) = ℓ(w; x, y) + (λ/2)‖w‖²`, so that the
/// empirical risk is the plain average `F̂_R(w) = (1/n) Σ f(w; zᵢ)`.
///
/// - MSE: `ℓ = ½(xᵀw − y)²`
/// - Logistic: `ℓ = ln(1 + exp(−y xᵀw))`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub lambda: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        Ok(Self { kind, lambda })
    }

    pub fn mse(lambda: f64) -> Result<Self> {
        Self::new(LossKind::Mse, lambda)
    }

    pub fn logistic(lambda: f64) -> Result<Self> {
        Self::new(LossKind::Logistic, lambda)
    }

    /// Labels must be ±1 for the logistic loss.
    pub fn check_labels(&self, data: &Dataset) -> Result<()> {
        if self.kind == LossKind::Logistic && !data.labels_are_binary() {
            return Err(invalid("logistic loss needs labels in {-1, +1}"));
        }
        Ok(())
    }

    pub fn sample_value(&self, w: &DVector<f64>, x: &DVector<f64>, y: f64) -> f64 {
        let reg = 0.5 * self.lambda * w.norm_squared();
        let m = x.dot(w);
        reg + match self.kind {
            LossKind::Mse => 0.5 * (m - y).powi(2),
            LossKind::Logistic => softplus(-y * m),
        }
    }

    pub fn sample_gradient(&self, w: &DVector<f64>, x: &DVector<f64>, y: f64) -> DVector<f64> {
        let m = x.dot(w);
        x * self.link_derivative(m, y) + w * self.lambda
    }

    pub fn sample_hessian(&self, w: &DVector<f64>, x: &DVector<f64>, y: f64) -> DMatrix<f64> {
        let d = w.len();
        let c = self.link_curvature(x.dot(w), y);
        x * x.transpose() * c + DMatrix::identity(d, d) * self.lambda
    }

    /// `∂ℓ/∂m` at margin-free score `m = xᵀw`.
    fn link_derivative(&self, m: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Mse => m - y,
            LossKind::Logistic => -y * sigmoid(-y * m),
        }
    }

    /// `∂²ℓ/∂m²`.
    fn link_curvature(&self, m: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Mse => 1.0,
            LossKind::Logistic => {
                let s = sigmoid(y * m);
                s * (1.0 - s)
            }
        }
    }

    pub fn value(&self, data: &Dataset, w: &DVector<f64>) -> f64 {
        let n = data.n() as f64;
        let scores = data.x() * w;
        let data_term: f64 = scores
            .iter()
            .zip(data.y().iter())
            .map(|(&m, &y)| match self.kind {
                LossKind::Mse => 0.5 * (m - y).powi(2),
                LossKind::Logistic => softplus(-y * m),
            })
            .sum();
        data_term / n + 0.5 * self.lambda * w.norm_squared()
    }

    pub fn gradient(&self, data: &Dataset, w: &DVector<f64>) -> DVector<f64> {
        let n = data.n() as f64;
        let scores = data.x() * w;
        let coeffs = DVector::from_iterator(
            data.n(),
            scores.iter().zip(data.y().iter()).map(|(&m, &y)| self.link_derivative(m, y)),
        );
        data.x().tr_mul(&coeffs) / n + w * self.lambda
    }

    pub fn hessian(&self, data: &Dataset, w: &DVector<f64>) -> DMatrix<f64> {
        let n = data.n() as f64;
        let d = data.d();
        let scores = data.x() * w;
        let mut weighted = data.x().clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= self.link_curvature(scores[i], data.label(i));
        }
        data.x().tr_mul(&weighted) / n + DMatrix::identity(d, d) * self.lambda
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eᵗ)` without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_in_ball;
    use crate::rng;

    fn random_data(n: usize, d: usize, binary: bool, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let mut x = DMatrix::zeros(n, d);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            x.set_row(i, &random_in_ball(d, 1.0, &mut r).transpose());
            y[i] = if binary {
                if i % 2 == 0 { 1.0 } else { -1.0 }
            } else {
                random_in_ball(1, 1.0, &mut r)[0]
            };
        }
        Dataset::new(x, y, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        for (kind, binary) in [(LossKind::Mse, false), (LossKind::Logistic, true)] {
            let loss = LossSpec::new(kind, 0.3).unwrap();
            let data = random_data(25, 4, binary, 7);
            let mut r = rng::seeded(8);
            for _ in 0..20 {
                let w = random_in_ball(4, 2.0, &mut r);
                let g = loss.gradient(&data, &w);
                let h = loss.hessian(&data, &w);
                let step = 1e-5;
                for j in 0..4 {
                    let mut e = DVector::zeros(4);
                    e[j] = step;
                    let fd = (loss.value(&data, &(&w + &e)) - loss.value(&data, &(&w - &e))) / (2.0 * step);
                    assert!((fd - g[j]).abs() <= 1e-5 * g.norm().max(1e-3), "{kind} grad {fd} vs {}", g[j]);
                    let hd = (loss.gradient(&data, &(&w + &e)) - loss.gradient(&data, &(&w - &e))) / (2.0 * step);
                    for i in 0..4 {
                        assert!((hd[i] - h[(i, j)]).abs() <= 1e-5 * h.norm(), "{kind} hess");
                    }
                }
            }
        }
    }

    #[test]
    fn averages_of_sample_terms() {
        let loss = LossSpec::logistic(0.1).unwrap();
        let data = random_data(10, 3, true, 2);
        let w = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let mut g = DVector::zeros(3);
        let mut h = DMatrix::zeros(3, 3);
        let mut v = 0.0;
        for i in 0..10 {
            g += loss.sample_gradient(&w, &data.row(i), data.label(i));
            h += loss.sample_hessian(&w, &data.row(i), data.label(i));
            v += loss.sample_value(&w, &data.row(i), data.label(i));
        }
        assert!((g / 10.0 - loss.gradient(&data, &w)).norm() < 1e-14);
        assert!((h / 10.0 - loss.hessian(&data, &w)).norm() < 1e-14);
        assert!((v / 10.0 - loss.value(&data, &w)).abs() < 1e-14);
    }

    #[test]
    fn stable_scalar_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!(LossSpec::mse(-1.0).is_err());
    }
}
