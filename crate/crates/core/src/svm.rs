//! Hard-margin SVM without bias, trained in the dual, and its margin-driven
//! retain sensitivity.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::mechanism::{SensitivityKind, SensitivityReport};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    /// `k(x, x') = exp(−‖x − x'‖² / (2h²))`.
    Rbf { bandwidth: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { bandwidth } if bandwidth > 0.0 && bandwidth.is_finite() => Ok(()),
            KernelSpec::Rbf { bandwidth } => Err(invalid(format!("RBF bandwidth must be positive, got {bandwidth}"))),
        }
    }

    pub fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match *self {
            KernelSpec::Linear => a.dot(b),
            KernelSpec::Rbf { bandwidth } => (-(a - b).norm_squared() / (2.0 * bandwidth * bandwidth)).exp(),
        }
    }

    /// `K_ij = k(a_i, b_j)` over the rows of `a` and `b`.
    pub fn cross_gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        match *self {
            KernelSpec::Linear => a * b.transpose(),
            KernelSpec::Rbf { .. } => {
                let ra: Vec<DVector<f64>> = a.row_iter().map(|r| r.transpose()).collect();
                let rb: Vec<DVector<f64>> = b.row_iter().map(|r| r.transpose()).collect();
                DMatrix::from_fn(ra.len(), rb.len(), |i, j| self.eval(&ra[i], &rb[j]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    /// KKT tolerance.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Dual objective above which the data is declared non-separable;
    /// `None` means `1/tolerance²`.
    pub objective_cap: Option<f64>,
    /// Seed for the coordinate permutation of each sweep.
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_sweeps: 100_000,
            objective_cap: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    /// `γ_R = min_i y_i⟨w, φ(x_i)⟩ / ‖w‖`.
    pub empirical_margin: f64,
    /// Margin of the data distribution, supplied by the caller.
    pub true_margin: Option<f64>,
    pub solution_norm: f64,
    pub support_indices: Vec<usize>,
    pub sweeps: usize,
}

impl MarginReport {
    pub fn with_true_margin(mut self, gamma: f64) -> Self {
        self.true_margin = Some(gamma);
        self
    }
}

/// Trained classifier `w = Σ αᵢ yᵢ φ(xᵢ)`.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub points: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub alpha: DVector<f64>,
    pub margin: MarginReport,
}

impl SvmModel {
    /// Expansion coefficients `αᵢ yᵢ`.
    pub fn coefficients(&self) -> DVector<f64> {
        self.alpha.component_mul(&self.labels)
    }

    /// Primal weight vector; only defined for the linear kernel.
    pub fn weights(&self) -> Option<DVector<f64>> {
        match self.kernel {
            KernelSpec::Linear => Some(self.points.tr_mul(&self.coefficients())),
            KernelSpec::Rbf { .. } => None,
        }
    }

    pub fn decision(&self, x: &DVector<f64>) -> f64 {
        let c = self.coefficients();
        self.points
            .row_iter()
            .zip(c.iter())
            .filter(|(_, &ci)| ci != 0.0)
            .map(|(row, &ci)| ci * self.kernel.eval(&row.transpose(), x))
            .sum()
    }
}

/// RKHS distance `‖w_a − w_b‖_H` through the Gram expansion.
pub fn rkhs_distance(a: &SvmModel, b: &SvmModel) -> Result<f64> {
    if a.kernel != b.kernel {
        return Err(invalid("models use different kernels"));
    }
    let ca = a.coefficients();
    let cb = b.coefficients();
    let kaa = a.kernel.cross_gram(&a.points, &a.points);
    let kbb = a.kernel.cross_gram(&b.points, &b.points);
    let kab = a.kernel.cross_gram(&a.points, &b.points);
    let sq = ca.dot(&(&kaa * &ca)) - 2.0 * ca.dot(&(&kab * &cb)) + cb.dot(&(&kbb * &cb));
    Ok(sq.max(0.0).sqrt())
}

/// Hard-margin dual `max Σα − ½αᵀQα, α ≥ 0` with `Q_ij = yᵢyⱼk(xᵢ,xⱼ)`,
/// solved by coordinate ascent over random permutations.
pub fn train_hard_margin(data: &Dataset, kernel: KernelSpec, options: &SvmOptions) -> Result<SvmModel> {
    train_warm(data, kernel, options, None)
}

/// Same as [`train_hard_margin`], starting from `warm` (padded with zeros).
pub fn train_warm(
    data: &Dataset,
    kernel: KernelSpec,
    options: &SvmOptions,
    warm: Option<&DVector<f64>>,
) -> Result<SvmModel> {
    kernel.validate()?;
    if !data.labels_are_binary() {
        return Err(invalid("hard-margin SVM needs labels in {-1, +1}"));
    }
    if !(options.tolerance > 0.0) {
        return Err(invalid("SVM tolerance must be positive"));
    }
    let n = data.n();
    let y = data.y();
    let k = kernel.cross_gram(data.x(), data.x());
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    if let Some(i) = (0..n).find(|&i| q[(i, i)] <= 0.0) {
        return Err(Error::NonSeparable(format!(
            "point {i} is the zero vector in feature space and cannot have positive margin"
        )));
    }
    let cap = options.objective_cap.unwrap_or(1.0 / (options.tolerance * options.tolerance));
    let mut alpha = DVector::zeros(n);
    if let Some(w) = warm {
        for i in 0..n.min(w.len()) {
            alpha[i] = w[i].max(0.0);
        }
    }
    let mut grad = &q * &alpha;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::seeded(options.seed);
    let mut sweeps = 0usize;
    loop {
        let violation = kkt_violation(&alpha, &grad);
        if violation <= options.tolerance {
            break;
        }
        if sweeps >= options.max_sweeps {
            return Err(Error::Convergence(format!(
                "SVM dual did not reach KKT tolerance {:e} in {} sweeps (violation {violation:e})",
                options.tolerance, options.max_sweeps
            )));
        }
        sweeps += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let next = (alpha[i] + (1.0 - grad[i]) / q[(i, i)]).max(0.0);
            let step = next - alpha[i];
            if step != 0.0 {
                alpha[i] = next;
                grad.axpy(step, &q.column(i), 1.0);
            }
        }
        let objective = alpha.sum() - 0.5 * alpha.dot(&grad);
        if objective > cap {
            return Err(Error::NonSeparable(format!(
                "dual objective {objective:e} exceeded {cap:e} after {sweeps} sweeps; \
                 the data is not separable in feature space"
            )));
        }
    }
    let norm_sq = alpha.dot(&grad);
    if !(norm_sq > 0.0) {
        return Err(Error::Degenerate("SVM solution is zero".into()));
    }
    let norm = norm_sq.sqrt();
    let min_functional = grad.iter().copied().fold(f64::INFINITY, f64::min);
    let support_indices = (0..n).filter(|&i| alpha[i] > options.tolerance).collect();
    Ok(SvmModel {
        kernel,
        points: data.x().clone(),
        labels: y.clone(),
        alpha,
        margin: MarginReport {
            empirical_margin: min_functional / norm,
            true_margin: None,
            solution_norm: norm,
            support_indices,
            sweeps,
        },
    })
}

fn kkt_violation(alpha: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    alpha
        .iter()
        .zip(grad.iter())
        .map(|(&a, &g)| if a > 0.0 { (1.0 - g).abs() } else { (1.0 - g).max(0.0) })
        .fold(0.0, f64::max)
}

/// `√(1/γ² − 1/γ_R²)` in RKHS norm.
pub fn rs_svm(report: &MarginReport) -> Result<SensitivityReport> {
    let gamma = report
        .true_margin
        .ok_or_else(|| Error::Config("rs_svm needs the true margin γ".into()))?;
    let gamma_r = report.empirical_margin;
    if !(gamma > 0.0) {
        return Err(invalid(format!("true margin must be positive, got {gamma}")));
    }
    // Solver slack: γ_R is only accurate to the KKT tolerance.
    if gamma_r < gamma * (1.0 - 1e-6) {
        return Err(invalid(format!(
            "empirical margin {gamma_r} is below the configured true margin {gamma}; \
             the configured γ cannot be the distribution's margin"
        )));
    }
    let value = (1.0 / (gamma * gamma) - 1.0 / (gamma_r * gamma_r)).max(0.0).sqrt();
    Ok(SensitivityReport::new(value, SensitivityKind::Retain, "rs_svm")
        .with_input("gamma", gamma)
        .with_input("gamma_r", gamma_r)
        .with_input("solution_norm", report.solution_norm))
}

/// Smallest margin accepted by [`gs_svm`].
pub const MIN_MARGIN: f64 = 1e-12;

pub fn gs_svm(gamma: f64) -> Result<SensitivityReport> {
    if !(gamma >= MIN_MARGIN) {
        return Err(Error::Unbounded(format!(
            "global SVM sensitivity 1/γ diverges for γ = {gamma}"
        )));
    }
    Ok(SensitivityReport::new(1.0 / gamma, SensitivityKind::Global, "gs_svm").with_input("gamma", gamma))
}

/// Points drawn from the margin-γ distribution: `u = e₁`, labels ±1 with
/// equal probability, `y⟨u, x⟩ = t` uniform on `[γ, B]` and the remaining
/// coordinates uniform in the ball of radius `√(B² − t²)`. Every point
/// satisfies `y⟨u, x⟩ ≥ γ` and `‖x‖ ≤ B`, and the infimum is `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginDistribution {
    pub d: usize,
    pub gamma: f64,
    pub bound_b: f64,
}

impl MarginDistribution {
    pub fn new(d: usize, gamma: f64, bound_b: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("margin distribution needs d >= 2"));
        }
        if !(gamma > 0.0 && gamma <= bound_b) {
            return Err(invalid(format!("margin γ = {gamma} must lie in (0, B = {bound_b}]")));
        }
        Ok(Self { d, gamma, bound_b })
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let t = self.gamma + (self.bound_b - self.gamma) * rng.random::<f64>();
        let rest_radius = (self.bound_b * self.bound_b - t * t).max(0.0).sqrt();
        let rest = crate::linalg::random_in_ball(self.d - 1, rest_radius, rng);
        let mut x = DVector::zeros(self.d);
        x[0] = y * t;
        x.rows_mut(1, self.d - 1).copy_from(&rest);
        (x, y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let mut x = DMatrix::zeros(n, self.d);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let (xi, yi) = self.sample_point(rng);
            x.set_row(i, &xi.transpose());
            y[i] = yi;
        }
        Dataset::new(x, y, self.bound_b, 1.0)
    }
}

/// Empirical retain sensitivity: adds `trial_count` points from
/// `candidates`, retrains (warm-started) and reports the largest RKHS
/// distance to the base solution.
pub fn oracle_rs_svm(
    data: &Dataset,
    kernel: KernelSpec,
    candidates: &MarginDistribution,
    trial_count: usize,
    options: &SvmOptions,
    seed: u64,
) -> Result<SensitivityReport> {
    let base = train_hard_margin(data, kernel, options)?;
    let mut r = rng::seeded(seed);
    let mut best = 0.0f64;
    for _ in 0..trial_count {
        let (x, y) = candidates.sample_point(&mut r);
        let extended = data.with_point(&x, y)?;
        let model = train_warm(&extended, kernel, options, Some(&base.alpha))?;
        best = best.max(rkhs_distance(&base, &model)?);
    }
    Ok(SensitivityReport::new(best, SensitivityKind::Oracle, "oracle_rs_svm")
        .with_input("trials", trial_count as f64)
        .with_input("gamma", candidates.gamma)
        .with_input("gamma_r", base.margin.empirical_margin))
}
