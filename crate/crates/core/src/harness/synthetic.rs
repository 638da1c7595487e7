use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::config::{Bounds, SyntheticKind};
use super::ingest::scale_into_ball;
use crate::dataset::{Dataset, Preprocessing};
use crate::error::{invalid, Result};
use crate::linalg::standard_normal_vector;
use crate::median::ScalarSample;
use crate::mst::{random_connected_graph, WeightedGraph};
use crate::rng;
use crate::svm::MarginDistribution;

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone)]
pub enum Synthetic {
    Data(Dataset),
    Scalars(ScalarSample),
    Graph(WeightedGraph),
}

impl Synthetic {
    pub fn into_dataset(self) -> Result<Dataset> {
        match self {
            Synthetic::Data(d) => Ok(d),
            _ => Err(invalid("generator does not produce a feature matrix")),
        }
    }

    pub fn into_scalars(self) -> Result<ScalarSample> {
        match self {
            Synthetic::Scalars(s) => Ok(s),
            _ => Err(invalid("generator does not produce scalars")),
        }
    }

    pub fn into_graph(self) -> Result<WeightedGraph> {
        match self {
            Synthetic::Graph(g) => Ok(g),
            _ => Err(invalid("generator does not produce a graph")),
        }
    }
}

/// Draws `n` rows (or values, or vertices) from `kind`; deterministic given
/// `seed`.
pub fn generate_synthetic(kind: &SyntheticKind, n: usize, bounds: &Bounds, seed: u64) -> Result<Synthetic> {
    if n == 0 {
        return Err(invalid("synthetic data needs n >= 1"));
    }
    let b = bounds.b;
    let mut r = rng::seeded(seed);
    match *kind {
        SyntheticKind::GaussianBlob { d, separation } => {
            if d == 0 {
                return Err(invalid("gaussian_blob needs d >= 1"));
            }
            let mut x = DMatrix::zeros(n, d);
            let mut y = DVector::zeros(n);
            for i in 0..n {
                let label = if r.random::<bool>() { 1.0 } else { -1.0 };
                let mut row = standard_normal_vector(d, &mut r);
                row[0] += label * separation;
                x.set_row(i, &row.transpose());
                y[i] = label;
            }
            let factor = scale_into_ball(&mut x, b);
            let mut data = Dataset::new(x, y, b, bounds.r_w)?;
            data.preprocessing.push(Preprocessing::ScaleToBall { bound_b: b, factor });
            Ok(Synthetic::Data(data))
        }
        SyntheticKind::MarginSeparable { d, gamma } => {
            if gamma > b {
                return Err(invalid(format!("margin γ = {gamma} exceeds B = {b}")));
            }
            let dist = MarginDistribution::new(d, gamma, b)?;
            Ok(Synthetic::Data(dist.sample(n, &mut r)?.with_bound_rw(bounds.r_w)?))
        }
        SyntheticKind::UniformScalar => {
            let values = (0..n).map(|_| b * r.random::<f64>()).collect();
            Ok(Synthetic::Scalars(ScalarSample::new(values, b)?))
        }
        SyntheticKind::RandomGraph { p, integer_weights } => {
            Ok(Synthetic::Graph(random_connected_graph(n, p, b, integer_weights, &mut r)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::{train_hard_margin, KernelSpec, SvmOptions};

    #[test]
    fn deterministic_given_seed() {
        let kind = SyntheticKind::GaussianBlob { d: 4, separation: 1.0 };
        let a = generate_synthetic(&kind, 50, &Bounds::default(), 9).unwrap().into_dataset().unwrap();
        let b = generate_synthetic(&kind, 50, &Bounds::default(), 9).unwrap().into_dataset().unwrap();
        let c = generate_synthetic(&kind, 50, &Bounds::default(), 10).unwrap().into_dataset().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let max = a.x().row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn margin_data_has_at_least_the_margin() {
        let kind = SyntheticKind::MarginSeparable { d: 3, gamma: 0.2 };
        for seed in 0..5 {
            let data = generate_synthetic(&kind, 60, &Bounds::default(), seed).unwrap().into_dataset().unwrap();
            let m = train_hard_margin(&data, KernelSpec::Linear, &SvmOptions::default()).unwrap();
            assert!(m.margin.empirical_margin >= 0.2 * (1.0 - 1e-9));
        }
        let too_wide = SyntheticKind::MarginSeparable { d: 3, gamma: 1.5 };
        assert!(generate_synthetic(&too_wide, 10, &Bounds::default(), 0).is_err());
    }

    #[test]
    fn scalars_and_graphs() {
        let s = generate_synthetic(&SyntheticKind::UniformScalar, 101, &Bounds::default(), 1)
            .unwrap()
            .into_scalars()
            .unwrap();
        assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let g = generate_synthetic(
            &SyntheticKind::RandomGraph {
                p: 0.3,
                integer_weights: false,
            },
            20,
            &Bounds::default(),
            1,
        )
        .unwrap()
        .into_graph()
        .unwrap();
        assert!(g.is_connected());
    }
}
