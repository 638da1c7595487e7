//! Rank-k PCA projector: eigengap, retain-sensitivity bound and the passive
//! noisy-projector unlearning mechanism.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::{projector_from_columns, random_unit_vector, sym_eigen, sym_operator_norm};
use crate::mechanism::{
    certify_unlearning, draw_noise, Branch, NoiseShape, PrivacyParams, SensitivityKind, SensitivityReport,
};
use crate::rng;

/// Eigengaps below this are treated as zero.
pub const GAP_THRESHOLD: f64 = 1e-10;

/// Largest mean norm accepted by [`check_centered`].
pub const CENTERING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub gap_k: f64,
    /// True when `gap_k` is below [`GAP_THRESHOLD`].
    pub degenerate: bool,
    pub projector: DMatrix<f64>,
}

/// `(1/n) XᵀX`. The data is used as given; see [`check_centered`].
pub fn covariance(data: &Dataset) -> DMatrix<f64> {
    data.gram() / data.n() as f64
}

/// Errors unless the feature mean has norm at most [`CENTERING_TOLERANCE`].
pub fn check_centered(data: &Dataset) -> Result<()> {
    let norm = data.mean().norm();
    if norm > CENTERING_TOLERANCE {
        return Err(invalid(format!(
            "PCA data must be centered; mean has norm {norm:.3e}"
        )));
    }
    Ok(())
}

pub fn spectral(cov: &DMatrix<f64>, k: usize) -> Result<SpectralReport> {
    let d = cov.nrows();
    if !cov.is_square() {
        return Err(invalid("covariance must be square"));
    }
    if k == 0 || k >= d {
        return Err(invalid(format!("k must lie in [1, {}], got {k}", d.saturating_sub(1))));
    }
    let eig = sym_eigen(cov);
    let gap_k = eig.values[k - 1] - eig.values[k];
    Ok(SpectralReport {
        projector: projector_from_columns(&eig.vectors, k),
        degenerate: gap_k < GAP_THRESHOLD,
        gap_k,
        eigenvalues: eig.values,
        k,
    })
}

/// Nearest rank-k orthogonal projector to a symmetric matrix (top-k eigenvectors).
pub fn rank_k_projection(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k >= m.nrows() {
        return Err(invalid(format!("k must lie in [1, {}], got {k}", m.nrows().saturating_sub(1))));
    }
    Ok(projector_from_columns(&sym_eigen(m).vectors, k))
}

/// `2√2·B²/((n+1)·gap_k)` in Frobenius norm.
pub fn rs_pca_bound(report: &SpectralReport, n: usize, bound_b: f64) -> Result<SensitivityReport> {
    if report.degenerate || report.gap_k < GAP_THRESHOLD {
        return Err(Error::Unbounded(format!(
            "eigengap {:.3e} at k = {} is zero; the projector bound is vacuous",
            report.gap_k, report.k
        )));
    }
    if n == 0 || !(bound_b > 0.0) {
        return Err(invalid("rs_pca_bound needs n >= 1 and B > 0"));
    }
    let value = 2.0 * std::f64::consts::SQRT_2 * bound_b * bound_b / ((n + 1) as f64 * report.gap_k);
    Ok(SensitivityReport::new(value, SensitivityKind::Retain, "rs_pca_bound")
        .with_input("n", n as f64)
        .with_input("k", report.k as f64)
        .with_input("gap_k", report.gap_k)
        .with_input("B", bound_b))
}

/// Sampled lower bound on the projector's retain sensitivity.
///
/// Candidates are `±B` times each of the top and `(k+1)`-th eigenvectors,
/// `B·(v_k ± v_{k+1})/√2`, and `trial_count` uniform directions on the
/// sphere of radius `B`. The report also records the largest covariance
/// perturbation seen, in operator and Frobenius norm.
pub fn oracle_rs_pca(data: &Dataset, k: usize, trial_count: usize, seed: u64) -> Result<SensitivityReport> {
    let n = data.n() as f64;
    let d = data.d();
    let b = data.bound_b();
    let cov = covariance(data);
    let base = spectral(&cov, k)?;
    if base.degenerate {
        return Err(Error::Unbounded(format!("eigengap {:.3e} is zero", base.gap_k)));
    }
    let eig = sym_eigen(&cov);
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    let top = eig.vectors.column(0).into_owned();
    let vk = eig.vectors.column(k - 1).into_owned();
    let vk1 = eig.vectors.column(k).into_owned();
    for v in [&top, &vk, &vk1] {
        candidates.push(v * b);
        candidates.push(v * -b);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2 * b;
    candidates.push((&vk + &vk1) * s);
    candidates.push((&vk - &vk1) * s);
    let mut r = rng::seeded(seed);
    for _ in 0..trial_count {
        candidates.push(random_unit_vector(d, &mut r) * b);
    }

    let mut best = 0.0f64;
    let mut max_op = 0.0f64;
    let mut max_fro = 0.0f64;
    for x in &candidates {
        let added = (&cov * n + x * x.transpose()) / (n + 1.0);
        let delta = &added - &cov;
        max_op = max_op.max(sym_operator_norm(&delta));
        max_fro = max_fro.max(delta.norm());
        let p = spectral(&added, k)?.projector;
        best = best.max((&p - &base.projector).norm());
    }
    Ok(SensitivityReport::new(best, SensitivityKind::Oracle, "oracle_rs_pca")
        .with_input("n", n)
        .with_input("k", k as f64)
        .with_input("candidates", candidates.len() as f64)
        .with_input("max_delta_cov_op", max_op)
        .with_input("max_delta_cov_fro", max_fro))
}

/// Output of [`unlearn_pca`].
#[derive(Debug, Clone)]
pub struct PcaUnlearnOutput {
    pub projector: DMatrix<f64>,
    pub sigma: f64,
    pub sensitivity: SensitivityReport,
}

/// Adds symmetric Gaussian noise calibrated to the retain bound of `R` to
/// `projector_trained` and projects back onto rank-k projectors.
pub fn unlearn_pca(
    projector_trained: &DMatrix<f64>,
    report_r: &SpectralReport,
    n: usize,
    bound_b: f64,
    params: &PrivacyParams,
    seed: u64,
) -> Result<PcaUnlearnOutput> {
    let d = projector_trained.nrows();
    if d != report_r.eigenvalues.len() {
        return Err(invalid(format!(
            "projector is {d}x{d} but the spectral report has dimension {}",
            report_r.eigenvalues.len()
        )));
    }
    let rs = rs_pca_bound(report_r, n, bound_b)?;
    let spec = certify_unlearning(&rs, params, NoiseShape::SymmetricMatrix(d), Branch::Unlearn)?;
    let noise = draw_noise(&spec, seed)
        .into_matrix()
        .expect("symmetric shape yields a matrix");
    let projector = rank_k_projection(&(projector_trained + noise), report_r.k)?;
    Ok(PcaUnlearnOutput {
        projector,
        sigma: spec.sigma,
        sensitivity: rs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_in_ball;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn covariance_examples() {
        let x = DMatrix::from_row_slice(1, 3, &[0.2, 0.4, 0.4]);
        let data = Dataset::unlabeled(x.clone(), 1.0).unwrap();
        assert_relative_eq!(covariance(&data), x.transpose() * &x, epsilon = 1e-15);
        let basis = Dataset::unlabeled(DMatrix::identity(4, 4), 1.0).unwrap();
        assert_eq!(covariance(&basis), DMatrix::identity(4, 4) / 4.0);
        let zeros = Dataset::unlabeled(DMatrix::zeros(3, 2), 1.0).unwrap();
        assert_eq!(covariance(&zeros), DMatrix::zeros(2, 2));
    }

    #[test]
    fn centering_check() {
        let x = DMatrix::from_row_slice(2, 1, &[0.5, -0.5]);
        assert!(check_centered(&Dataset::unlabeled(x, 1.0).unwrap()).is_ok());
        let x = DMatrix::from_row_slice(2, 1, &[0.5, 0.5]);
        assert!(check_centered(&Dataset::unlabeled(x, 1.0).unwrap()).is_err());
    }

    #[test]
    fn spectral_examples() {
        let r = spectral(&diag(&[3.0, 2.0, 1.0]), 1).unwrap();
        assert_eq!(r.gap_k, 1.0);
        assert!(!r.degenerate);
        assert_relative_eq!(r.projector, diag(&[1.0, 0.0, 0.0]), epsilon = 1e-14);
        let r = spectral(&diag(&[2.0, 2.0, 1.0]), 1).unwrap();
        assert_eq!(r.gap_k, 0.0);
        assert!(r.degenerate);
        assert!(rs_pca_bound(&r, 10, 1.0).is_err());
        assert!(spectral(&diag(&[1.0, 0.0]), 2).is_err());
        assert!(spectral(&diag(&[1.0, 0.0]), 0).is_err());
    }

    #[test]
    fn bound_example() {
        let r = SpectralReport {
            eigenvalues: vec![1.0, 0.5],
            k: 1,
            gap_k: 0.5,
            degenerate: false,
            projector: DMatrix::zeros(2, 2),
        };
        let rs = rs_pca_bound(&r, 9, 1.0).unwrap();
        assert_relative_eq!(rs.value, 2.0 * 2f64.sqrt() / 5.0, max_relative = 1e-15);
        assert!((rs.value - 0.5657).abs() < 1e-4);
        let wide = SpectralReport { gap_k: 1e12, ..r };
        assert!(rs_pca_bound(&wide, 9, 1.0).unwrap().value < 1e-11);
    }

    #[test]
    fn zero_addition_keeps_projector() {
        let mut r = rng::seeded(4);
        let x = DMatrix::from_fn(30, 5, |_, _| 0.0);
        let mut x = x;
        for i in 0..30 {
            let row = random_in_ball(5, 1.0, &mut r);
            x.set_row(i, &row.transpose());
        }
        let data = Dataset::unlabeled(x, 1.0).unwrap();
        let cov = covariance(&data);
        let scaled = &cov * (30.0 / 31.0);
        let p0 = spectral(&cov, 2).unwrap().projector;
        let p1 = spectral(&scaled, 2).unwrap().projector;
        assert!((p0 - p1).norm() < 1e-10);
    }

    #[test]
    fn unlearn_output_is_rank_k_projector() {
        let cov = diag(&[5.0, 4.0, 1.0, 0.5]);
        let rep = spectral(&cov, 2).unwrap();
        let params = PrivacyParams::new(1.0, 1e-5).unwrap();
        let out = unlearn_pca(&rep.projector, &rep, 100, 1.0, &params, 9).unwrap();
        let p = &out.projector;
        assert!((p * p - p).norm() < 1e-8);
        assert!((p.trace() - 2.0).abs() < 1e-8);
        assert!((p - p.transpose()).norm() < 1e-12);
        // Huge gap: essentially no noise, exact projection back.
        let rep = SpectralReport { gap_k: 1e15, ..rep };
        let out = unlearn_pca(&rep.projector, &rep, 100, 1.0, &params, 9).unwrap();
        assert!((&out.projector - &rep.projector).norm() < 1e-10);
    }
}
