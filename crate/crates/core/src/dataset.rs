use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative slack allowed on the row-norm bound, to absorb rounding from
/// rescaling at ingestion.
const NORM_SLACK: f64 = 1e-9;

/// Feature matrix, labels and the boundedness constants the bounds consume.
///
/// Rows satisfy `‖xᵢ‖ ≤ B` and labels `|yᵢ| ≤ 1`. `bound_rw` caps the norm
/// of parameter vectors for the ERM problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    bound_b: f64,
    bound_rw: f64,
    pub preprocessing: Vec<Preprocessing>,
}

/// One ingestion step, recorded so that a report can be traced back to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Preprocessing {
    Standardize,
    Center,
    RandomProjection { target_dim: usize, seed: u64 },
    ScaleToBall { bound_b: f64, factor: f64 },
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, bound_b: f64, bound_rw: f64) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(invalid("dataset needs at least one row"));
        }
        if x.ncols() == 0 {
            return Err(invalid("dataset needs at least one feature"));
        }
        if y.len() != x.nrows() {
            return Err(invalid(format!(
                "{} labels for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if !(bound_b > 0.0 && bound_b.is_finite()) {
            return Err(invalid(format!("row-norm bound B must be positive, got {bound_b}")));
        }
        if !(bound_rw > 0.0) {
            return Err(invalid(format!("parameter-norm cap R_w must be positive, got {bound_rw}")));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        for (i, row) in x.row_iter().enumerate() {
            let norm = row.norm();
            if norm > bound_b * (1.0 + NORM_SLACK) {
                return Err(invalid(format!("row {i} has norm {norm} > B = {bound_b}")));
            }
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| v.abs() > 1.0) {
            return Err(invalid(format!("label {i} = {v} outside [-1, 1]")));
        }
        Ok(Self {
            x,
            y,
            bound_b,
            bound_rw,
            preprocessing: Vec::new(),
        })
    }

    /// Features only (PCA); labels are zero.
    pub fn unlabeled(x: DMatrix<f64>, bound_b: f64) -> Result<Self> {
        let n = x.nrows();
        Self::new(x, DVector::zeros(n), bound_b, 1.0)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn bound_b(&self) -> f64 {
        self.bound_b
    }

    pub fn bound_rw(&self) -> f64 {
        self.bound_rw
    }

    pub fn with_bound_rw(mut self, bound_rw: f64) -> Result<Self> {
        if !(bound_rw > 0.0) {
            return Err(invalid(format!("parameter-norm cap R_w must be positive, got {bound_rw}")));
        }
        self.bound_rw = bound_rw;
        Ok(self)
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }

    /// `XᵀX` (unnormalized).
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x)
    }

    pub fn labels_are_binary(&self) -> bool {
        self.y.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    pub fn mean(&self) -> DVector<f64> {
        self.x.row_mean().transpose()
    }

    /// Copy with row `index` removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.n() {
            return Err(invalid(format!("index {index} out of range for {} rows", self.n())));
        }
        if self.n() == 1 {
            return Err(invalid("cannot remove the only row"));
        }
        Ok(Self {
            x: self.x.clone().remove_row(index),
            y: self.y.clone().remove_row(index),
            bound_b: self.bound_b,
            bound_rw: self.bound_rw,
            preprocessing: self.preprocessing.clone(),
        })
    }

    /// Copy with `(x, y)` appended as the last row.
    pub fn with_point(&self, x: &DVector<f64>, y: f64) -> Result<Self> {
        if x.len() != self.d() {
            return Err(invalid(format!("point has dimension {}, expected {}", x.len(), self.d())));
        }
        if x.norm() > self.bound_b * (1.0 + NORM_SLACK) {
            return Err(invalid(format!("added point has norm {} > B = {}", x.norm(), self.bound_b)));
        }
        if y.abs() > 1.0 {
            return Err(invalid(format!("added label {y} outside [-1, 1]")));
        }
        let n = self.n();
        let mut xs = self.x.clone().insert_row(n, 0.0);
        xs.set_row(n, &x.transpose());
        let ys = self.y.clone().insert_row(n, y);
        Ok(Self {
            x: xs,
            y: ys,
            bound_b: self.bound_b,
            bound_rw: self.bound_rw,
            preprocessing: self.preprocessing.clone(),
        })
    }

    /// Copy holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("cannot select zero rows"));
        }
        if let Some(&i) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(invalid(format!("index {i} out of range for {} rows", self.n())));
        }
        Ok(Self {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            bound_b: self.bound_b,
            bound_rw: self.bound_rw,
            preprocessing: self.preprocessing.clone(),
        })
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n() {
            return Err(invalid(format!("cannot take {n} of {} rows", self.n())));
        }
        Ok(Self {
            x: self.x.rows(0, n).into_owned(),
            y: self.y.rows(0, n).into_owned(),
            bound_b: self.bound_b,
            bound_rw: self.bound_rw,
            preprocessing: self.preprocessing.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        let x = DMatrix::from_row_slice(3, 2, &[0.6, 0.8, -1.0, 0.0, 0.0, 0.5]);
        Dataset::new(x, DVector::from_vec(vec![1.0, -1.0, 0.5]), 1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_out_of_bound_rows_and_labels() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(Dataset::new(x.clone(), DVector::from_vec(vec![1.0]), 1.0, 1.0).is_err());
        assert!(Dataset::new(x, DVector::from_vec(vec![1.0]), 2.0, 1.0).is_ok());
        let x = DMatrix::from_row_slice(1, 1, &[0.1]);
        assert!(Dataset::new(x, DVector::from_vec(vec![1.5]), 1.0, 1.0).is_err());
    }

    #[test]
    fn remove_and_append_round_trip() {
        let d = small();
        let r = d.without(1).unwrap();
        assert_eq!(r.n(), 2);
        assert_eq!(r.row(1), d.row(2));
        let back = r.with_point(&d.row(1), d.label(1)).unwrap();
        assert_eq!(back.row(2), d.row(1));
        assert_eq!(back.label(2), -1.0);
        assert!(!d.labels_are_binary());
    }
}
