use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, Preprocessing};
use crate::error::{invalid, Error, Result};
use crate::median::ScalarSample;
use crate::mst::{Edge, WeightedGraph};
use crate::rng;

/// Preprocessing applied by [`ingest_csv`], in this order: standardize,
/// random projection, scale into the B-ball.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    /// Label column name; `None` reads every column as a feature.
    pub label_column: Option<String>,
    pub standardize: bool,
    pub center: bool,
    pub project_to_b: bool,
    pub jl_target_dim: Option<usize>,
    pub seed: u64,
    /// Map a two-valued label column onto ±1 (smaller value → −1).
    pub binary_labels: bool,
    pub bound_b: f64,
    pub bound_rw: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            label_column: None,
            standardize: false,
            center: false,
            project_to_b: false,
            jl_target_dim: None,
            seed: 0,
            binary_labels: false,
            bound_b: 1.0,
            bound_rw: 1.0,
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{}:{line}", path.display()),
        message: message.into(),
    }
}

/// Reads a numeric CSV with a header row.
pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_index = match &options.label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_error(path, 1, format!("no label column `{name}`")))?,
        ),
        None => None,
    };
    let width = headers.len();
    let d = width - usize::from(label_index.is_some());
    if d == 0 {
        return Err(parse_error(path, 1, "no feature columns"));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => parse_error(
                path,
                pos.as_ref().map_or(0, |p| p.line() as usize),
                format!("ragged row: {len} fields, expected {expected_len}"),
            ),
            _ => Error::Csv(e),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, line, format!("non-numeric cell `{cell}` in column {}", j + 1)))?;
            if !value.is_finite() {
                return Err(parse_error(path, line, format!("non-finite cell `{cell}`")));
            }
            if Some(j) == label_index {
                labels.push(value);
            } else {
                features.push(value);
            }
        }
    }
    let n = features.len() / d;
    if n == 0 {
        return Err(parse_error(path, 2, "no data rows"));
    }
    let x = DMatrix::from_row_slice(n, d, &features);
    let y = if label_index.is_some() {
        let y = DVector::from_vec(labels);
        if options.binary_labels {
            to_plus_minus_one(&y).map_err(|e| parse_error(path, 1, e.to_string()))?
        } else {
            y
        }
    } else {
        DVector::zeros(n)
    };
    preprocess(x, y, options)
}

fn to_plus_minus_one(y: &DVector<f64>) -> Result<DVector<f64>> {
    let mut values: Vec<f64> = y.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    match values.as_slice() {
        [lo, hi] => Ok(y.map(|v| if v == *lo { -1.0 } else if v == *hi { 1.0 } else { unreachable!() })),
        [_] => Err(invalid("label column has a single value")),
        _ => Err(invalid(format!("label column has {} distinct values, expected 2", values.len()))),
    }
}

/// Applies the optional preprocessing steps to an in-memory matrix.
pub fn preprocess(mut x: DMatrix<f64>, y: DVector<f64>, options: &IngestOptions) -> Result<Dataset> {
    let mut steps = Vec::new();
    if options.standardize {
        standardize(&mut x);
        steps.push(Preprocessing::Standardize);
    }
    if let Some(target) = options.jl_target_dim {
        if target == 0 {
            return Err(invalid("random projection target dimension must be positive"));
        }
        x = random_projection(&x, target, options.seed);
        steps.push(Preprocessing::RandomProjection {
            target_dim: target,
            seed: options.seed,
        });
    }
    if options.center {
        let mean = x.row_mean();
        for mut row in x.row_iter_mut() {
            row -= &mean;
        }
        steps.push(Preprocessing::Center);
    }
    if options.project_to_b {
        let factor = scale_into_ball(&mut x, options.bound_b);
        steps.push(Preprocessing::ScaleToBall {
            bound_b: options.bound_b,
            factor,
        });
    }
    let mut data = Dataset::new(x, y, options.bound_b, options.bound_rw)?;
    data.preprocessing = steps;
    Ok(data)
}

/// Column-wise z-scores; constant columns become zero.
pub fn standardize(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for v in col.iter_mut() {
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
    }
}

/// `X·G` with `G_ij ~ N(0, 1/target)`, drawn from `seed`.
pub fn random_projection(x: &DMatrix<f64>, target: usize, seed: u64) -> DMatrix<f64> {
    let normal = Normal::new(0.0, (1.0 / target as f64).sqrt()).expect("positive scale");
    let mut r = rng::seeded(seed);
    let g = DMatrix::from_fn(x.ncols(), target, |_, _| normal.sample(&mut r));
    x * g
}

/// Rescales every row by one common factor so that the largest row norm is
/// `bound_b`; returns the factor (1 for all-zero data).
pub fn scale_into_ball(x: &mut DMatrix<f64>, bound_b: f64) -> f64 {
    let max = x.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 1.0;
    }
    let factor = bound_b / max;
    *x *= factor;
    // Guard the last ulp so that the bound holds exactly.
    for mut row in x.row_iter_mut() {
        let norm = row.norm();
        if norm > bound_b {
            row *= bound_b / norm;
        }
    }
    factor
}

/// Reads a single-column CSV of scalars (header optional).
pub fn ingest_scalars(path: &Path, bound_b: f64) -> Result<ScalarSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 1 {
            return Err(parse_error(path, line, format!("expected 1 column, found {}", record.len())));
        }
        match record[0].parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {} // header
            Err(_) => return Err(parse_error(path, line, format!("non-numeric value `{}`", &record[0]))),
        }
    }
    ScalarSample::new(values, bound_b)
}

/// Reads an edge list: one `u v w` per line, whitespace-separated, `#`
/// starting a comment. Vertex ids are arbitrary strings, numbered in order
/// of first appearance. Repeated edges keep the smaller weight. `B`
/// defaults to the largest weight.
pub fn ingest_edges(path: &Path, bound_b: Option<f64>) -> Result<WeightedGraph> {
    let text = std::fs::read_to_string(path)?;
    parse_edges(&text, path, bound_b)
}

pub(crate) fn parse_edges(text: &str, path: &Path, bound_b: Option<f64>) -> Result<WeightedGraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut intern = |name: &str| {
        let next = ids.len();
        *ids.entry(name.to_owned()).or_insert(next)
    };
    let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_error(path, line_no, format!("expected `u v w`, found {} fields", fields.len())));
        }
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("non-numeric weight `{}`", fields[2])))?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(parse_error(path, line_no, format!("weight {w} must be finite and nonnegative")));
        }
        if fields[0] == fields[1] {
            return Err(parse_error(path, line_no, format!("self-loop on `{}`", fields[0])));
        }
        let (a, b) = (intern(fields[0]), intern(fields[1]));
        let key = (a.min(b), a.max(b));
        match weights.get_mut(&key) {
            Some(existing) => {
                log::warn!(
                    "{}:{line_no}: duplicate edge {} {} (weights {existing} and {w}); keeping the smaller",
                    path.display(),
                    fields[0],
                    fields[1]
                );
                *existing = existing.min(w);
            }
            None => {
                weights.insert(key, w);
                order.push(key);
            }
        }
    }
    if ids.is_empty() {
        return Err(parse_error(path, 1, "edge list is empty"));
    }
    let max_weight = weights.values().copied().fold(0.0, f64::max);
    let b = match bound_b {
        Some(b) => b,
        None if max_weight > 0.0 => max_weight,
        None => 1.0,
    };
    let edges = order
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            weight: weights[&(u, v)],
        })
        .collect();
    WeightedGraph::new(ids.len(), edges, b)
}
