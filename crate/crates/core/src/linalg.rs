//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Symmetric eigendecomposition with a reproducible layout: eigenvalues in
/// nonincreasing order (ties by original index) and every eigenvector signed
/// so that its largest-magnitude coordinate is positive.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SortedEigen {
    assert!(m.is_square(), "eigendecomposition of a non-square matrix");
    let d = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut vectors = DMatrix::zeros(d, d);
    let mut values = Vec::with_capacity(d);
    for (j, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(j, &col);
    }
    SortedEigen { values, vectors }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Spectral norm of a symmetric matrix.
pub fn sym_operator_norm(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().amax()
}

/// `V_k V_kᵀ` for the first `k` columns of `vectors`.
pub fn projector_from_columns(vectors: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let vk = vectors.columns(0, k);
    vk * vk.transpose()
}

/// Projection onto the Euclidean ball of the given radius. Returns whether
/// the projection moved the point.
pub fn project_to_ball(w: &mut DVector<f64>, radius: f64) -> bool {
    let norm = w.norm();
    if norm > radius {
        *w *= radius / norm;
        true
    } else {
        false
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)))
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = standard_normal_vector(d, rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform draw from the closed ball of radius `radius` in `d` dimensions.
pub fn random_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    let u: f64 = rng.random();
    random_unit_vector(d, rng) * (radius * u.powf(1.0 / d as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn eigen_order_and_signs() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let e = sym_eigen(&m);
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.column(0)[1], 1.0);
        assert_eq!(e.vectors.column(1)[2], 1.0);
        assert_eq!(e.vectors.column(2)[0], 1.0);
    }

    #[test]
    fn sign_convention_flips_negative_pivot() {
        // Eigenvector of the top eigenvalue is ±(1,-2)/√5 ; pivot is coordinate 1.
        let v = DVector::from_vec(vec![1.0, -2.0]) / 5f64.sqrt();
        let m = &v * v.transpose() * 4.0;
        let e = sym_eigen(&m);
        assert!(e.vectors[(1, 0)] > 0.0);
        assert!((e.values[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = seeded(3);
        for _ in 0..1000 {
            let x = random_in_ball(4, 2.5, &mut rng);
            assert!(x.norm() <= 2.5 + 1e-12);
        }
    }

    #[test]
    fn ball_projection_reports_activity() {
        let mut w = DVector::from_vec(vec![3.0, 4.0]);
        assert!(project_to_ball(&mut w, 1.0));
        assert!((w.norm() - 1.0).abs() < 1e-15);
        assert!(!project_to_ball(&mut w, 2.0));
    }
}
