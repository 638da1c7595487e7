//! Retain and global sensitivity of the one-dimensional median.
//!
//! For odd `n` with `m = (n+1)/2`, adding one point to `R` moves the median
//! to the midpoint of `x_(m)` and one of its neighbours, so
//! `RS(R) = ½·max{x_(m+1) − x_(m), x_(m) − x_(m−1)}` while `GS = B/2`.

use crate::error::{invalid, Result};
use crate::mechanism::{SensitivityKind, SensitivityReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSample {
    values: Vec<f64>,
    bound_b: f64,
}

impl ScalarSample {
    pub fn new(values: Vec<f64>, bound_b: f64) -> Result<Self> {
        if !(bound_b > 0.0 && bound_b.is_finite()) {
            return Err(invalid(format!("bound B must be positive, got {bound_b}")));
        }
        if values.is_empty() {
            return Err(invalid("empty sample"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=bound_b).contains(*v)) {
            return Err(invalid(format!("value {v} outside [0, {bound_b}]")));
        }
        Ok(Self { values, bound_b })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bound_b(&self) -> f64 {
        self.bound_b
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Middle order statistic for odd `n`, midpoint of the two middle ones for even `n`.
pub fn median(sample: &ScalarSample) -> f64 {
    median_of_sorted(&sample.sorted())
}

pub fn rs_median(sample: &ScalarSample) -> Result<SensitivityReport> {
    let n = sample.len();
    if n < 3 || n % 2 == 0 {
        return Err(invalid(format!(
            "closed-form median retain sensitivity needs odd n >= 3, got n = {n}; \
             use oracle_rs_median for other sizes"
        )));
    }
    let v = sample.sorted();
    // 0-based index of x_(m).
    let mid = n / 2;
    let upper = v[mid + 1] - v[mid];
    let lower = v[mid] - v[mid - 1];
    // Half the larger gap, evaluated as the shift of the midpoint so that it
    // matches a recomputed median bit for bit.
    let up_shift = (v[mid] + v[mid + 1]) / 2.0 - v[mid];
    let down_shift = v[mid] - (v[mid - 1] + v[mid]) / 2.0;
    Ok(SensitivityReport::new(up_shift.max(down_shift), SensitivityKind::Retain, "rs_median")
        .with_input("n", n as f64)
        .with_input("gap_upper", upper)
        .with_input("gap_lower", lower)
        .with_input("B", sample.bound_b))
}

pub fn gs_median(bound_b: f64) -> Result<SensitivityReport> {
    if !(bound_b > 0.0) {
        return Err(invalid(format!("bound B must be positive, got {bound_b}")));
    }
    Ok(SensitivityReport::new(bound_b / 2.0, SensitivityKind::Global, "gs_median").with_input("B", bound_b))
}

/// Brute-force retain sensitivity: tries every point of a uniform grid on
/// `[0, B]` plus the sample values themselves as the added point and
/// recomputes the median from scratch each time.
pub fn oracle_rs_median(sample: &ScalarSample, grid_points: usize) -> Result<SensitivityReport> {
    if grid_points < 3 {
        return Err(invalid(format!("grid needs at least 3 points, got {grid_points}")));
    }
    let base = median(sample);
    let b = sample.bound_b;
    let step = b / (grid_points - 1) as f64;
    let grid = (0..grid_points).map(|i| if i + 1 == grid_points { b } else { i as f64 * step });
    let candidates = grid.chain(sample.values.iter().copied());

    let mut extended = sample.values.clone();
    extended.push(0.0);
    let last = extended.len() - 1;
    let mut best = 0.0f64;
    let mut argmax = 0.0;
    for x in candidates {
        let mut buf = extended.clone();
        buf[last] = x;
        buf.sort_by(f64::total_cmp);
        let shift = (median_of_sorted(&buf) - base).abs();
        if shift > best {
            best = shift;
            argmax = x;
        }
    }
    Ok(SensitivityReport::new(best, SensitivityKind::Oracle, "oracle_rs_median")
        .with_input("n", sample.len() as f64)
        .with_input("grid_points", grid_points as f64)
        .with_input("argmax", argmax))
}
