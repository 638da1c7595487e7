use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::config::{DatasetSpec, ExperimentConfig, ExperimentKind, SyntheticKind};
use super::ingest::{ingest_csv, ingest_edges, ingest_scalars, scale_into_ball, IngestOptions};
use super::report::{summarize, summary_path, write_report, write_summary, ReportRow};
use super::synthetic::generate_synthetic;
use crate::active::{
    d2d_iteration_ratio, d2d_iterations, newton_sigma, unlearn_d2d, unlearn_newton, Calibration, D2dCount,
    UnlearnRequest,
};
use crate::dataset::{Dataset, Preprocessing};
use crate::erm::{curvature, gs_erm, oracle_stability, rs_erm, LossSpec, StabilityOracle, TrainOptions};
use crate::error::{invalid, Error, Result};
use crate::mechanism::{certify_unlearning, Branch, NoiseShape, PrivacyParams, SensitivityReport};
use crate::median::{gs_median, oracle_rs_median, rs_median, ScalarSample};
use crate::mst::{gs_mst_edge, oracle_rs_mst, rs_mst_edge, sample_subgraphs, SubgraphSampling, WeightedGraph};
use crate::pca::{check_centered, covariance, oracle_rs_pca, rs_pca_bound, spectral};
use crate::rng::{self, derive_seed};
use crate::svm::{gs_svm, oracle_rs_svm, rs_svm, train_hard_margin, KernelSpec, MarginDistribution, SvmOptions};

/// Data loaded once per sweep.
#[derive(Debug, Clone)]
pub enum Source {
    Synthetic(SyntheticKind),
    Data(Dataset),
    Graph(WeightedGraph),
    Scalars(ScalarSample),
}

/// Reads external data (or notes the generator) for `config`.
pub fn load_source(config: &ExperimentConfig) -> Result<Source> {
    let b = config.bounds.b;
    Ok(match &config.dataset {
        DatasetSpec::Synthetic(kind) => Source::Synthetic(*kind),
        DatasetSpec::Csv(c) => {
            let options = IngestOptions {
                label_column: c.label_column.clone(),
                standardize: c.standardize,
                center: false,
                project_to_b: c.project_to_b,
                jl_target_dim: c.jl_target_dim,
                seed: c.projection_seed,
                binary_labels: c.binary_labels && c.label_column.is_some(),
                bound_b: b,
                bound_rw: config.bounds.r_w,
            };
            Source::Data(ingest_csv(&c.path, &options)?)
        }
        DatasetSpec::Edges { path, bound_b } => Source::Graph(ingest_edges(path, *bound_b)?),
        DatasetSpec::Scalars { path } => Source::Scalars(ingest_scalars(path, b)?),
    })
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub lambda: Option<f64>,
    pub seed: u64,
}

/// Grid in row order: `n`, then `λ`, then seed.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let lambdas: Vec<Option<f64>> = if config.experiment.uses_lambda() {
        config.lambda_grid.iter().map(|&l| Some(l)).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for &n in &config.n_grid {
        for &lambda in &lambdas {
            for &seed in &config.seeds {
                out.push(Cell { n, lambda, seed });
            }
        }
    }
    out
}

/// Seed of the data draw: shared by every `λ` (and experiment) at the same
/// `(dataset, n, seed)` so that curves over `λ` compare like with like.
pub fn data_seed(config: &ExperimentConfig, cell: &Cell) -> u64 {
    derive_seed(
        config.master_seed,
        &format!("data/{}/n={}/seed={}", config.dataset.id(), cell.n, cell.seed),
    )
}

/// Seed for everything else in the cell (oracle draws, deletion index, noise).
pub fn cell_seed(config: &ExperimentConfig, cell: &Cell) -> u64 {
    let lambda = cell.lambda.map(|l| format!("{l:?}")).unwrap_or_default();
    derive_seed(
        config.master_seed,
        &format!(
            "cell/{}/{}/n={}/lambda={lambda}/seed={}",
            config.experiment,
            config.dataset.id(),
            cell.n,
            cell.seed
        ),
    )
}

/// Runs the sweep and, when `output_path` is set, writes the report and its
/// summary. Cell failures become rows with the `error` column set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let rows = sweep(config)?;
    if let Some(path) = &config.output_path {
        write_report(path, &rows)?;
        write_summary(&summary_path(path), &summarize(&rows))?;
        log::info!("wrote {} rows to {}", rows.len(), path.display());
    }
    Ok(rows)
}

/// The sweep without writing anything.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let source = load_source(config)?;
    let grid = cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<ReportRow> = pool.install(|| grid.par_iter().map(|c| run_cell(config, &source, c)).collect());
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed; see the error column", rows.len());
    }
    Ok(rows)
}

/// Evaluates one cell; never fails, errors land in the row.
pub fn run_cell(config: &ExperimentConfig, source: &Source, cell: &Cell) -> ReportRow {
    let seed = cell_seed(config, cell);
    let mut row = ReportRow::empty(
        config.experiment,
        &config.dataset.id(),
        cell.n,
        cell.lambda,
        cell.seed,
        seed,
    );
    let start = Instant::now();
    let outcome = match config.experiment {
        ExperimentKind::PassiveMse | ExperimentKind::PassiveLogloss => passive_erm(config, source, cell, seed, &mut row),
        ExperimentKind::PassiveSvm => passive_svm(config, source, cell, seed, &mut row),
        ExperimentKind::PassiveMst => passive_mst(config, source, cell, seed, &mut row),
        ExperimentKind::PassivePca => passive_pca(config, source, cell, seed, &mut row),
        ExperimentKind::PassiveMedian => passive_median(config, source, cell, seed, &mut row),
        ExperimentKind::ActiveD2d => active_d2d(config, source, cell, seed, &mut row),
        ExperimentKind::ActiveNewton => active_newton(config, source, cell, seed, &mut row),
    };
    if let Err(e) = outcome {
        log::debug!("cell n={} lambda={:?} seed={} failed: {e}", cell.n, cell.lambda, cell.seed);
        let mut failed = ReportRow::empty(config.experiment, &row.dataset, row.n, cell.lambda, cell.seed, seed);
        failed.error = Some(e.to_string());
        row = failed;
    }
    if config.record_timing {
        row.wall_time = start.elapsed().as_secs_f64();
    }
    row
}

/// `m` rows: freshly generated, or sampled without replacement from the
/// ingested data.
fn draw_rows(config: &ExperimentConfig, source: &Source, m: usize, seed: u64) -> Result<Dataset> {
    match source {
        Source::Synthetic(kind) => generate_synthetic(kind, m, &config.bounds, seed)?.into_dataset(),
        Source::Data(data) => {
            if m > data.n() {
                return Err(invalid(format!("need {m} rows but the dataset has {}", data.n())));
            }
            let mut idx: Vec<usize> = (0..data.n()).collect();
            idx.shuffle(&mut rng::seeded(seed));
            idx.truncate(m);
            data.select(&idx)?.with_bound_rw(config.bounds.r_w)
        }
        _ => Err(invalid("this experiment needs a feature matrix")),
    }
}

fn passive_sigma(rs: &SensitivityReport, params: &PrivacyParams, shape: NoiseShape) -> Option<f64> {
    if !rs.value.is_finite() {
        return None;
    }
    certify_unlearning(rs, params, shape, Branch::Unlearn).ok().map(|s| s.sigma)
}

/// Value of a bound, with an unbounded instance mapped to `+∞`.
fn value_or_inf(r: Result<SensitivityReport>) -> Result<Option<f64>> {
    match r {
        Ok(rep) => Ok(Some(rep.value)),
        Err(Error::Unbounded(_)) => Ok(Some(f64::INFINITY)),
        Err(e) => Err(e),
    }
}

fn ratio(rs: Option<f64>, gs: Option<f64>) -> Option<f64> {
    match (rs, gs) {
        (Some(r), Some(g)) if g.is_finite() && g > 0.0 && r.is_finite() => Some(r / g),
        _ => None,
    }
}

fn erm_loss(config: &ExperimentConfig, cell: &Cell) -> Result<LossSpec> {
    let kind = config
        .loss_kind()
        .ok_or_else(|| Error::Config(format!("{} has no loss", config.experiment)))?;
    LossSpec::new(kind, cell.lambda.unwrap_or(0.0))
}

fn passive_erm(config: &ExperimentConfig, source: &Source, cell: &Cell, seed: u64, row: &mut ReportRow) -> Result<()> {
    let data = draw_rows(config, source, cell.n, data_seed(config, cell))?;
    let loss = erm_loss(config, cell)?;
    let report = curvature(&data, &loss)?;
    let rs = rs_erm(&report, data.n());
    row.sigma = rs.as_ref().ok().and_then(|r| passive_sigma(r, &config.privacy, NoiseShape::Vector(data.d())));
    row.rs = value_or_inf(rs)?;
    row.gs = value_or_inf(gs_erm(report.lipschitz, data.n(), loss.lambda))?;
    row.ratio = ratio(row.rs, row.gs);
    if config.oracle_trials > 0 {
        let oracle = StabilityOracle {
            trial_count: config.oracle_trials,
            seed,
            train: TrainOptions::default(),
        };
        row.oracle = Some(oracle_stability(&data, &loss, &oracle)?.value);
    }
    Ok(())
}

fn passive_svm(config: &ExperimentConfig, source: &Source, cell: &Cell, seed: u64, row: &mut ReportRow) -> Result<()> {
    let gamma = config
        .svm_gamma()
        .ok_or_else(|| Error::Config("passive_svm needs the true margin svm.gamma".into()))?;
    let data = draw_rows(config, source, cell.n, data_seed(config, cell))?;
    let options = SvmOptions {
        seed,
        ..SvmOptions::default()
    };
    let kernel = config.svm.kernel;
    let model = train_hard_margin(&data, kernel, &options)?;
    let rs = rs_svm(&model.margin.clone().with_true_margin(gamma))?;
    if kernel == KernelSpec::Linear {
        row.sigma = passive_sigma(&rs, &config.privacy, NoiseShape::Vector(data.d()));
    }
    row.rs = Some(rs.value);
    row.gs = Some(gs_svm(gamma)?.value);
    row.ratio = ratio(row.rs, row.gs);
    if config.oracle_trials > 0 {
        if let Source::Synthetic(SyntheticKind::MarginSeparable { d, gamma: g }) = source {
            let dist = MarginDistribution::new(*d, *g, config.bounds.b)?;
            row.oracle = Some(oracle_rs_svm(&data, kernel, &dist, config.oracle_trials, &options, seed)?.value);
        }
    }
    Ok(())
}

fn passive_mst(config: &ExperimentConfig, source: &Source, cell: &Cell, _seed: u64, row: &mut ReportRow) -> Result<()> {
    let dseed = data_seed(config, cell);
    let graph = match source {
        Source::Synthetic(kind) => generate_synthetic(kind, cell.n, &config.bounds, dseed)?.into_graph()?,
        Source::Graph(g) => {
            let params = SubgraphSampling {
                target_nodes: cell.n,
                min_density: config.mst.min_density,
                count: 1,
                max_attempts: None,
            };
            sample_subgraphs(g, &params, dseed)?.remove(0)
        }
        _ => return Err(invalid("passive_mst needs a graph")),
    };
    let rs = rs_mst_edge(&graph)?;
    row.sigma = passive_sigma(&rs, &config.privacy, NoiseShape::Vector(1));
    row.rs = Some(rs.value);
    row.gs = Some(gs_mst_edge(graph.bound_b())?.value);
    row.ratio = ratio(row.rs, row.gs);
    if config.oracle_trials > 0 && graph.vertex_count() <= config.mst.oracle_max_vertices {
        row.oracle = Some(oracle_rs_mst(&graph)?.value);
    }
    Ok(())
}

/// Centers the rows and rescales them into the B-ball.
pub fn center_for_pca(data: &Dataset) -> Result<Dataset> {
    let mut x = data.x().clone();
    let mean = x.row_mean();
    for mut r in x.row_iter_mut() {
        r -= &mean;
    }
    let factor = scale_into_ball(&mut x, data.bound_b());
    let mut out = Dataset::unlabeled(x, data.bound_b())?;
    out.preprocessing = data.preprocessing.clone();
    out.preprocessing.push(Preprocessing::Center);
    out.preprocessing.push(Preprocessing::ScaleToBall {
        bound_b: data.bound_b(),
        factor,
    });
    Ok(out)
}

fn passive_pca(config: &ExperimentConfig, source: &Source, cell: &Cell, seed: u64, row: &mut ReportRow) -> Result<()> {
    let data = center_for_pca(&draw_rows(config, source, cell.n, data_seed(config, cell))?)?;
    check_centered(&data)?;
    let report = spectral(&covariance(&data), config.k)?;
    let rs = rs_pca_bound(&report, data.n(), data.bound_b());
    row.sigma = rs
        .as_ref()
        .ok()
        .and_then(|r| passive_sigma(r, &config.privacy, NoiseShape::SymmetricMatrix(data.d())));
    row.rs = value_or_inf(rs)?;
    // No finite worst case: the eigengap of an adjacent dataset can vanish.
    row.gs = Some(f64::INFINITY);
    if config.oracle_trials > 0 && !report.degenerate {
        row.oracle = Some(oracle_rs_pca(&data, config.k, config.oracle_trials, seed)?.value);
    }
    Ok(())
}

fn passive_median(config: &ExperimentConfig, source: &Source, cell: &Cell, _seed: u64, row: &mut ReportRow) -> Result<()> {
    // The closed form needs odd n; even grid sizes are rounded up.
    let m = cell.n | 1;
    row.n = m;
    let dseed = data_seed(config, cell);
    let sample = match source {
        Source::Synthetic(kind) => generate_synthetic(kind, m, &config.bounds, dseed)?.into_scalars()?,
        Source::Scalars(s) => {
            if m > s.len() {
                return Err(invalid(format!("need {m} values but the sample has {}", s.len())));
            }
            let mut values = s.values().to_vec();
            values.shuffle(&mut rng::seeded(dseed));
            values.truncate(m);
            ScalarSample::new(values, s.bound_b())?
        }
        _ => return Err(invalid("passive_median needs scalars")),
    };
    let rs = rs_median(&sample)?;
    row.sigma = passive_sigma(&rs, &config.privacy, NoiseShape::Vector(1));
    row.rs = Some(rs.value);
    row.gs = Some(gs_median(sample.bound_b())?.value);
    row.ratio = ratio(row.rs, row.gs);
    if config.oracle_trials > 0 {
        row.oracle = Some(oracle_rs_median(&sample, config.oracle_trials.max(3))?.value);
    }
    Ok(())
}

/// `n + 1` rows with a uniformly chosen one to delete.
fn deletion_request(
    config: &ExperimentConfig,
    data: Dataset,
    cell: &Cell,
    seed: u64,
) -> Result<UnlearnRequest> {
    let loss = erm_loss(config, cell)?;
    let index = rng::seeded_stream(seed, 1).random_range(0..data.n());
    UnlearnRequest::new(data, index, loss, config.privacy, seed)
}

fn active_d2d(config: &ExperimentConfig, source: &Source, cell: &Cell, seed: u64, row: &mut ReportRow) -> Result<()> {
    let data = draw_rows(config, source, cell.n + 1, data_seed(config, cell))?;
    let sigma = config.d2d_sigma();
    let request = deletion_request(config, data, cell, seed)?.with_sigma(sigma);
    let result = unlearn_d2d(&request, Calibration::Retain)?;
    let audit = &result.audit;
    let retain = D2dCount {
        iterations: audit.iterations.unwrap_or(0),
        real: audit.iterations_real.unwrap_or(0.0),
        shift_bound: audit.shift_bound,
    };
    let b = config.bounds.b;
    let global_report = audit.curvature.global(b);
    let n = cell.n;
    let global = match d2d_iterations(&global_report, n, global_report.lipschitz, sigma, &config.privacy) {
        Ok(c) => Some(c),
        Err(Error::Unbounded(_)) => None,
        Err(e) => return Err(e),
    };
    row.iterations = Some(retain.iterations);
    row.sigma = Some(sigma);
    row.rs = Some(retain.real.max(0.0));
    match global {
        Some(g) => {
            row.gs = Some(g.real.max(0.0));
            row.ratio = Some(d2d_iteration_ratio(&retain, &g));
        }
        None => row.gs = Some(f64::INFINITY),
    }
    Ok(())
}

fn accuracy(w: &DVector<f64>, test: &Dataset) -> f64 {
    let correct = (0..test.n())
        .filter(|&i| {
            let score = test.x().row(i).transpose().dot(w);
            (score >= 0.0) == (test.label(i) > 0.0)
        })
        .count();
    correct as f64 / test.n() as f64
}

fn active_newton(config: &ExperimentConfig, source: &Source, cell: &Cell, seed: u64, row: &mut ReportRow) -> Result<()> {
    let n = cell.n;
    let all = draw_rows(config, source, n + 1 + config.test_size, data_seed(config, cell))?;
    let train_idx: Vec<usize> = (0..=n).collect();
    let test_idx: Vec<usize> = (n + 1..all.n()).collect();
    let (train, test) = (all.select(&train_idx)?, all.select(&test_idx)?);
    let request = deletion_request(config, train, cell, seed)?;
    let result = unlearn_newton(&request, Calibration::Retain)?;
    let global_report = result.audit.curvature.global(config.bounds.b);
    row.rs = Some(result.audit.sigma);
    row.sigma = Some(result.audit.sigma);
    row.gs = match newton_sigma(&global_report, n, &config.privacy, Calibration::Global) {
        Ok(spec) => Some(spec.sigma),
        Err(Error::Unbounded(_)) => Some(f64::INFINITY),
        Err(e) => return Err(e),
    };
    row.ratio = ratio(row.rs, row.gs);
    row.accuracy = Some(accuracy(&result.w_out, &test));
    Ok(())
}
