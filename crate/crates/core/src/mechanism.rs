//! Gaussian noise calibration and (ε, δ) certificate arithmetic.
//!
//! Two calibration routes are kept separate:
//!
//! * the classic multiplier `c(ε, δ) = √(2 ln(1.25/δ)) / ε`, valid only for
//!   `ε ∈ (0, 1]` ([`gaussian_sigma`], [`certify_unlearning`]);
//! * the mean-shift route, where two isotropic Gaussians at distance `Δ`
//!   with scale `σ` are indistinguishable for
//!   `ε ≥ Δ²/(2σ²) + (Δ/σ)·√(2 ln(1/δ))` ([`analytic_epsilon`],
//!   [`max_shift`]). It accepts any `ε > 0`.
//!
//! All logarithms are natural logarithms.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;

/// Target `(ε, δ)` for a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    /// The classic Gaussian-mechanism multiplier `√(2 ln(1.25/δ)) / ε`.
    pub fn gaussian_multiplier(&self) -> Result<f64> {
        if self.epsilon > 1.0 {
            return Err(domain(format!(
                "the classic Gaussian multiplier needs epsilon <= 1 (got {}); \
                 use the analytic route (max_shift / analytic_epsilon) instead",
                self.epsilon
            )));
        }
        Ok((2.0 * (1.25 / self.delta).ln()).sqrt() / self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityKind {
    Retain,
    Global,
    Oracle,
}

impl std::fmt::Display for SensitivityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SensitivityKind::Retain => "retain",
            SensitivityKind::Global => "global",
            SensitivityKind::Oracle => "oracle",
        })
    }
}

/// A sensitivity value together with the arguments that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub value: f64,
    pub kind: SensitivityKind,
    pub inputs: BTreeMap<String, f64>,
    pub source: String,
}

impl SensitivityReport {
    pub fn new(value: f64, kind: SensitivityKind, source: impl Into<String>) -> Self {
        debug_assert!(value >= 0.0 || value.is_nan(), "negative sensitivity {value}");
        Self {
            value,
            kind,
            inputs: BTreeMap::new(),
            source: source.into(),
        }
    }

    pub fn with_input(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_owned(), value);
        self
    }

    pub fn input(&self, key: &str) -> Option<f64> {
        self.inputs.get(key).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    Vector(usize),
    SymmetricMatrix(usize),
}

impl NoiseShape {
    pub fn dim(&self) -> usize {
        match *self {
            NoiseShape::Vector(d) | NoiseShape::SymmetricMatrix(d) => d,
        }
    }
}

/// What a noise scale was calibrated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub sensitivity: f64,
    pub kind: SensitivityKind,
    pub source: String,
    pub inputs: BTreeMap<String, f64>,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub shape: NoiseShape,
    pub audit: Option<NoiseAudit>,
}

impl NoiseSpec {
    pub fn new(sigma: f64, shape: NoiseShape) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(domain(format!("sigma must be finite and nonnegative, got {sigma}")));
        }
        if shape.dim() == 0 {
            return Err(domain("noise dimension must be at least 1"));
        }
        Ok(Self {
            sigma,
            shape,
            audit: None,
        })
    }
}

/// A realized noise draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Noise {
    pub fn into_vector(self) -> Option<DVector<f64>> {
        match self {
            Noise::Vector(v) => Some(v),
            Noise::Matrix(_) => None,
        }
    }

    pub fn into_matrix(self) -> Option<DMatrix<f64>> {
        match self {
            Noise::Matrix(m) => Some(m),
            Noise::Vector(_) => None,
        }
    }
}

/// Noise scale `Δ · c(ε, δ)` from the classic Gaussian mechanism.
pub fn gaussian_sigma(
    sensitivity: &SensitivityReport,
    params: &PrivacyParams,
    shape: NoiseShape,
) -> Result<NoiseSpec> {
    if !(sensitivity.value >= 0.0) {
        return Err(domain(format!(
            "sensitivity must be nonnegative, got {}",
            sensitivity.value
        )));
    }
    if !sensitivity.value.is_finite() {
        return Err(Error::Unbounded(format!(
            "cannot calibrate noise to an infinite sensitivity from {}",
            sensitivity.source
        )));
    }
    let multiplier = params.gaussian_multiplier()?;
    NoiseSpec::new(sensitivity.value * multiplier, shape)
}

/// `b(ε, δ) = √(2 ln(1/δ) + 2ε) − √(2 ln(1/δ))`, the largest certifiable
/// mean shift per unit of noise scale.
///
/// Evaluated in the rationalized form `2ε / (√(2 ln(1/δ) + 2ε) + √(2 ln(1/δ)))`
/// to avoid cancellation at small ε.
pub fn shift_multiplier(epsilon: f64, delta: f64) -> f64 {
    let a = 2.0 * (1.0 / delta).ln();
    2.0 * epsilon / ((a + 2.0 * epsilon).sqrt() + a.sqrt())
}

/// Largest mean shift certifiable at `params` with noise scale `sigma`.
pub fn max_shift(params: &PrivacyParams, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(sigma * shift_multiplier(params.epsilon, params.delta))
}

/// Certified ε for two isotropic Gaussians whose means are `shift` apart.
pub fn analytic_epsilon(shift: f64, sigma: f64, delta: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(shift >= 0.0) {
        return Err(domain(format!("shift must be nonnegative, got {shift}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let r = shift / sigma;
    Ok(0.5 * r * r + r * (2.0 * (1.0 / delta).ln()).sqrt())
}

/// Noise scale from the mean-shift route: the smallest σ with
/// `max_shift(params, σ) ≥ sensitivity`.
pub fn analytic_sigma(sensitivity: f64, params: &PrivacyParams) -> f64 {
    sensitivity / shift_multiplier(params.epsilon, params.delta)
}

/// Deterministic Gaussian draw for a noise spec.
///
/// Matrix shapes fill the upper triangle (diagonal included) with i.i.d.
/// `N(0, σ²)` entries and mirror them, so the result is exactly symmetric.
pub fn draw_noise(spec: &NoiseSpec, seed: u64) -> Noise {
    let mut rng = rng::seeded(seed);
    let sigma = spec.sigma;
    let mut sample = || -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    };
    match spec.shape {
        NoiseShape::Vector(d) => Noise::Vector(DVector::from_iterator(d, (0..d).map(|_| sample()))),
        NoiseShape::SymmetricMatrix(d) => {
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = sample();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            Noise::Matrix(m)
        }
    }
}

/// Which branch of the unlearning comparison is asking for noise. Only
/// logged; calibration must not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Unlearn,
    Retrain,
}

/// Calibrates noise for an (ε, δ)-unlearning certificate from a retain
/// sensitivity report.
///
/// The scale depends only on the report, which in turn depends only on the
/// retained set, so the unlearn and retrain branches get the same noise law.
/// Oracle (observed) and global reports are rejected.
pub fn certify_unlearning(
    rs: &SensitivityReport,
    params: &PrivacyParams,
    shape: NoiseShape,
    branch: Branch,
) -> Result<NoiseSpec> {
    if rs.kind != SensitivityKind::Retain {
        return Err(Error::Calibration(format!(
            "certify_unlearning needs a retain-sensitivity report, got kind={} from {}; \
             an observed or local value differs between the unlearn and retrain branches",
            rs.kind, rs.source
        )));
    }
    log::debug!(
        "calibrating {:?} branch from {} (value {:e})",
        branch,
        rs.source,
        rs.value
    );
    let mut spec = gaussian_sigma(rs, params, shape)?;
    spec.audit = Some(NoiseAudit {
        sensitivity: rs.value,
        kind: rs.kind,
        source: rs.source.clone(),
        inputs: rs.inputs.clone(),
        multiplier: params.gaussian_multiplier()?,
    });
    Ok(spec)
}

/// Monte-Carlo estimate of the privacy loss of two 1-D Gaussians with means
/// `shift` apart and common scale `sigma`: the empirical `(1 − δ)`-quantile
/// of `ln(p₁(X)/p₂(X))` for `X ∼ p₁`.
pub fn empirical_epsilon(shift: f64, sigma: f64, delta: f64, samples: usize, seed: u64) -> f64 {
    let normal = Normal::new(shift, sigma).expect("sigma must be positive");
    let mut rng = rng::seeded(seed);
    let mut losses: Vec<f64> = (0..samples)
        .map(|_| {
            let x = normal.sample(&mut rng);
            (x * x - (x - shift) * (x - shift)) / (2.0 * sigma * sigma)
        })
        .collect();
    // Number of samples allowed above the estimate.
    let tail = ((samples as f64) * delta).floor() as usize;
    let idx = samples - 1 - tail.min(samples - 1);
    let (_, q, _) = losses.select_nth_unstable_by(idx, f64::total_cmp);
    *q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn report(value: f64, kind: SensitivityKind) -> SensitivityReport {
        SensitivityReport::new(value, kind, "test").with_input("n", 10.0)
    }

    #[test]
    fn zero_sensitivity_needs_no_noise() {
        let p = PrivacyParams::new(0.5, 0.1).unwrap();
        let s = gaussian_sigma(&report(0.0, SensitivityKind::Retain), &p, NoiseShape::Vector(3)).unwrap();
        assert_eq!(s.sigma, 0.0);
    }

    #[test]
    fn unit_sensitivity_at_eps_one() {
        // sqrt(2 ln 125000), evaluated at 30 digits with mpmath.
        let reference = 4.844_805_262_605_389_f64;
        let p = PrivacyParams::new(1.0, 1e-5).unwrap();
        let s1 = gaussian_sigma(&report(1.0, SensitivityKind::Retain), &p, NoiseShape::Vector(1)).unwrap();
        assert_relative_eq!(s1.sigma, reference, max_relative = 1e-12);
        let s2 = gaussian_sigma(&report(2.0, SensitivityKind::Retain), &p, NoiseShape::Vector(1)).unwrap();
        assert_eq!(s2.sigma, 2.0 * s1.sigma);
    }

    #[test]
    fn classic_route_rejects_large_epsilon() {
        let p = PrivacyParams::new(2.0, 1e-5).unwrap();
        let err = gaussian_sigma(&report(1.0, SensitivityKind::Retain), &p, NoiseShape::Vector(1)).unwrap_err();
        assert!(err.to_string().contains("analytic"), "{err}");
        // The analytic route still works there.
        assert!(max_shift(&p, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::new(0.0, 0.1).is_err());
        assert!(PrivacyParams::new(1.0, 0.0).is_err());
        assert!(PrivacyParams::new(1.0, 1.0).is_err());
        assert!(PrivacyParams::new(f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn analytic_epsilon_examples() {
        assert_eq!(analytic_epsilon(0.0, 1.0, 1e-5).unwrap(), 0.0);
        let eps = analytic_epsilon(1.0, 4.8438, 1e-5).unwrap();
        let direct = 1.0 / (2.0 * 4.8438f64.powi(2)) + (2.0 * 1e5f64.ln()).sqrt() / 4.8438;
        assert_relative_eq!(eps, direct, max_relative = 1e-14);
        // The mean-shift bound is slightly more conservative than the classic
        // multiplier here: shift 1 at the classic σ for (1, 1e-5) certifies
        // ε ≈ 1.0117, not ε ≤ 1.
        let classic = PrivacyParams::new(1.0, 1e-5).unwrap().gaussian_multiplier().unwrap();
        let eps = analytic_epsilon(1.0, classic, 1e-5).unwrap();
        assert!(eps > 1.0 && eps < 1.012, "{eps}");
        assert!(analytic_sigma(1.0, &PrivacyParams::new(1.0, 1e-5).unwrap()) > classic);
        assert!(analytic_epsilon(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn max_shift_matches_direct_formula() {
        let p = PrivacyParams::new(1.0, 1e-5).unwrap();
        let a = 2.0 * 1e5f64.ln();
        let direct = 0.1 * ((a + 2.0).sqrt() - a.sqrt());
        assert_relative_eq!(max_shift(&p, 0.1).unwrap(), direct, max_relative = 1e-12);
        assert_eq!(shift_multiplier(0.0, 1e-5), 0.0);
        let back = analytic_epsilon(max_shift(&p, 0.1).unwrap(), 0.1, p.delta).unwrap();
        assert_relative_eq!(back, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn analytic_sigma_inverts_max_shift() {
        let p = PrivacyParams::new(3.0, 1e-6).unwrap();
        let sigma = analytic_sigma(0.7, &p);
        assert_relative_eq!(max_shift(&p, sigma).unwrap(), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn zero_sigma_draws_are_zero() {
        for shape in [NoiseShape::Vector(4), NoiseShape::SymmetricMatrix(4)] {
            let spec = NoiseSpec::new(0.0, shape).unwrap();
            match draw_noise(&spec, 9) {
                Noise::Vector(v) => assert!(v.iter().all(|&x| x == 0.0)),
                Noise::Matrix(m) => assert!(m.iter().all(|&x| x == 0.0)),
            }
        }
    }

    #[test]
    fn matrix_draw_is_exactly_symmetric_and_deterministic() {
        let spec = NoiseSpec::new(1.3, NoiseShape::SymmetricMatrix(6)).unwrap();
        let m = draw_noise(&spec, 42).into_matrix().unwrap();
        assert_eq!(m, m.transpose());
        assert_eq!(draw_noise(&spec, 42), Noise::Matrix(m.clone()));
        assert_ne!(draw_noise(&spec, 43), Noise::Matrix(m));
    }

    #[test]
    fn empirical_variance_matches_sigma() {
        let spec = NoiseSpec::new(2.0, NoiseShape::Vector(3)).unwrap();
        let trials = 100_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for seed in 0..trials {
            let v = draw_noise(&spec, seed).into_vector().unwrap();
            for i in 0..3 {
                sum[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
        for i in 0..3 {
            let mean = sum[i] / trials as f64;
            let var = sq[i] / trials as f64 - mean * mean;
            assert!((var / 4.0 - 1.0).abs() < 0.05, "coordinate {i}: variance {var}");
        }
    }

    #[test]
    fn certify_rejects_non_retain_reports() {
        let p = PrivacyParams::new(1.0, 1e-5).unwrap();
        for kind in [SensitivityKind::Oracle, SensitivityKind::Global] {
            let err = certify_unlearning(&report(1.0, kind), &p, NoiseShape::Vector(2), Branch::Unlearn).unwrap_err();
            assert!(matches!(err, Error::Calibration(_)));
        }
    }

    #[test]
    fn certify_matches_gaussian_sigma_and_records_inputs() {
        let p = PrivacyParams::new(1.0, 1e-5).unwrap();
        let rs = report(2.0, SensitivityKind::Retain);
        let spec = certify_unlearning(&rs, &p, NoiseShape::Vector(2), Branch::Unlearn).unwrap();
        let plain = gaussian_sigma(&rs, &p, NoiseShape::Vector(2)).unwrap();
        assert_eq!(spec.sigma, plain.sigma);
        let audit = spec.audit.unwrap();
        assert_eq!(audit.inputs, rs.inputs);
        assert_eq!(audit.source, "test");
    }

    #[test]
    fn same_law_for_both_branches() {
        let p = PrivacyParams::new(0.8, 1e-6).unwrap();
        let rs = report(0.37, SensitivityKind::Retain);
        let a = certify_unlearning(&rs, &p, NoiseShape::SymmetricMatrix(3), Branch::Unlearn).unwrap();
        let b = certify_unlearning(&rs, &p, NoiseShape::SymmetricMatrix(3), Branch::Retrain).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(eps in 1e-4f64..=1.0, log_delta in -12.0f64..-0.1, sigma in 1e-3f64..1e3) {
                let p = PrivacyParams::new(eps, 10f64.powf(log_delta)).unwrap();
                let shift = max_shift(&p, sigma).unwrap();
                let back = analytic_epsilon(shift, sigma, p.delta).unwrap();
                prop_assert!(((back - eps) / eps).abs() < 1e-9);
            }

            #[test]
            fn sigma_monotone(s1 in 0.0f64..10.0, ds in 0.0f64..10.0, eps in 0.01f64..=1.0, deps in 0.0f64..0.5,
                              delta in 1e-9f64..0.5, ddelta in 0.0f64..0.4) {
                let r = |v| SensitivityReport::new(v, SensitivityKind::Retain, "p");
                let p = PrivacyParams::new(eps, delta).unwrap();
                let base = gaussian_sigma(&r(s1), &p, NoiseShape::Vector(1)).unwrap().sigma;
                let more_sens = gaussian_sigma(&r(s1 + ds), &p, NoiseShape::Vector(1)).unwrap().sigma;
                prop_assert!(more_sens >= base);
                let p_eps = PrivacyParams::new((eps + deps).min(1.0), delta).unwrap();
                prop_assert!(gaussian_sigma(&r(s1), &p_eps, NoiseShape::Vector(1)).unwrap().sigma <= base);
                let p_delta = PrivacyParams::new(eps, (delta + ddelta).min(0.9)).unwrap();
                prop_assert!(gaussian_sigma(&r(s1), &p_delta, NoiseShape::Vector(1)).unwrap().sigma <= base);
            }
        }
    }
}
