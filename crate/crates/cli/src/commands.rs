use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use unlearn_core::active::{unlearn_d2d, unlearn_newton, Calibration, UnlearnRequest};
use unlearn_core::erm::{curvature, gs_erm, oracle_stability, rs_erm, StabilityOracle, TrainOptions};
use unlearn_core::harness::{
    ingest_csv, ingest_edges, ingest_scalars, run_experiment, selftest as run_selftest, summary_path,
    ExperimentConfig, IngestOptions,
};
use unlearn_core::mechanism::{certify_unlearning, Branch};
use unlearn_core::median::{gs_median, oracle_rs_median, rs_median};
use unlearn_core::mst::{gs_mst_edge, oracle_rs_mst, rs_mst_edge};
use unlearn_core::pca::{covariance, oracle_rs_pca, rs_pca_bound, spectral};
use unlearn_core::svm::{gs_svm, rs_svm, train_hard_margin, SvmOptions};
use unlearn_core::{
    Dataset, Error, KernelSpec, LossKind, LossSpec, NoiseShape, PrivacyParams, Result, SensitivityReport,
};

use crate::{CalibrationArg, DataArgs, LossArg, Method, Problem, ProblemArgs, UnlearnArgs};

fn print_json(value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn features(data: &DataArgs, labelled: bool, binary: bool, center: bool) -> Result<Dataset> {
    let options = IngestOptions {
        label_column: labelled.then(|| data.label_column.clone()),
        standardize: data.standardize,
        center,
        project_to_b: data.scale,
        jl_target_dim: data.jl_dim,
        seed: 0,
        binary_labels: binary,
        bound_b: data.bound_b.unwrap_or(1.0),
        bound_rw: data.bound_rw,
    };
    ingest_csv(&data.data, &options)
}

fn kernel(p: &ProblemArgs) -> KernelSpec {
    match p.rbf_bandwidth {
        Some(bandwidth) => KernelSpec::Rbf { bandwidth },
        None => KernelSpec::Linear,
    }
}

fn erm_loss(problem: Problem, lambda: f64) -> Result<LossSpec> {
    match problem {
        Problem::Mse => LossSpec::mse(lambda),
        _ => LossSpec::logistic(lambda),
    }
}

/// A bound that is infinite for this instance is reported as `null`.
fn bounded(r: Result<SensitivityReport>) -> Result<Option<SensitivityReport>> {
    match r {
        Ok(rep) => Ok(Some(rep)),
        Err(Error::Unbounded(msg)) => {
            log::warn!("{msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn ratio(rs: &Option<SensitivityReport>, gs: &Option<SensitivityReport>) -> Option<f64> {
    match (rs, gs) {
        (Some(r), Some(g)) if g.value > 0.0 => Some(r.value / g.value),
        _ => None,
    }
}

pub fn sensitivity(p: &ProblemArgs) -> Result<u8> {
    let params = PrivacyParams::new(p.epsilon, p.delta)?;
    let (n, rs, gs, shape, extra) = match p.problem {
        Problem::Median => {
            let s = ingest_scalars(&p.data.data, p.data.bound_b.unwrap_or(1.0))?;
            let rs = rs_median(&s)?;
            (s.len(), Some(rs), Some(gs_median(s.bound_b())?), NoiseShape::Vector(1), json!({}))
        }
        Problem::Mst => {
            let g = ingest_edges(&p.data.data, p.data.bound_b)?;
            let rs = rs_mst_edge(&g)?;
            let extra = json!({ "edges": g.edges().len(), "bound_b": g.bound_b() });
            (g.vertex_count(), Some(rs), Some(gs_mst_edge(g.bound_b())?), NoiseShape::Vector(1), extra)
        }
        Problem::Pca => {
            let data = features(&p.data, false, false, true)?;
            let report = spectral(&covariance(&data), p.k)?;
            let rs = bounded(rs_pca_bound(&report, data.n(), data.bound_b()))?;
            let extra = json!({ "k": p.k, "gap_k": report.gap_k, "eigenvalues": report.eigenvalues });
            (data.n(), rs, None, NoiseShape::SymmetricMatrix(data.d()), extra)
        }
        Problem::Svm => {
            let gamma = p
                .gamma
                .ok_or_else(|| Error::Config("--gamma (the true margin) is required for svm".into()))?;
            let data = features(&p.data, true, true, false)?;
            let model = train_hard_margin(&data, kernel(p), &SvmOptions::default())?;
            let rs = rs_svm(&model.margin.clone().with_true_margin(gamma))?;
            let extra = json!({ "margin": model.margin });
            (data.n(), Some(rs), bounded(gs_svm(gamma))?, NoiseShape::Vector(data.d()), extra)
        }
        Problem::Mse | Problem::Logistic => {
            let data = features(&p.data, true, p.problem == Problem::Logistic, false)?;
            let loss = erm_loss(p.problem, p.lambda)?;
            let report = curvature(&data, &loss)?;
            let rs = bounded(rs_erm(&report, data.n()))?;
            let gs = bounded(gs_erm(report.lipschitz, data.n(), loss.lambda))?;
            let extra = json!({ "curvature": report });
            (data.n(), rs, gs, NoiseShape::Vector(data.d()), extra)
        }
    };
    let sigma = match &rs {
        Some(r) => Some(certify_unlearning(r, &params, shape, Branch::Unlearn)?.sigma),
        None => None,
    };
    print_json(&json!({
        "problem": format!("{:?}", p.problem).to_lowercase(),
        "n": n,
        "retain": rs,
        "global": gs,
        "ratio": ratio(&rs, &gs),
        "sigma": sigma,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "details": extra,
    }))?;
    Ok(0)
}

pub fn oracle(p: &ProblemArgs, trials: usize, seed: u64) -> Result<u8> {
    let report = match p.problem {
        Problem::Median => {
            let s = ingest_scalars(&p.data.data, p.data.bound_b.unwrap_or(1.0))?;
            oracle_rs_median(&s, trials)?
        }
        Problem::Mst => oracle_rs_mst(&ingest_edges(&p.data.data, p.data.bound_b)?)?,
        Problem::Pca => oracle_rs_pca(&features(&p.data, false, false, true)?, p.k, trials, seed)?,
        Problem::Svm => {
            return Err(Error::Config(
                "the SVM oracle needs the generating distribution; run it through a synthetic sweep".into(),
            ))
        }
        Problem::Mse | Problem::Logistic => {
            let data = features(&p.data, true, p.problem == Problem::Logistic, false)?;
            let oracle = StabilityOracle {
                trial_count: trials,
                seed,
                train: TrainOptions::default(),
            };
            oracle_stability(&data, &erm_loss(p.problem, p.lambda)?, &oracle)?
        }
    };
    print_json(&json!({ "oracle": report }))?;
    Ok(0)
}

pub fn unlearn(u: &UnlearnArgs) -> Result<u8> {
    let params = PrivacyParams::new(u.epsilon, u.delta)?;
    let kind = match u.loss {
        LossArg::Mse => LossKind::Mse,
        LossArg::Logistic => LossKind::Logistic,
    };
    let data = features(&u.data, true, kind == LossKind::Logistic, false)?;
    let loss = LossSpec::new(kind, u.lambda)?;
    let request = UnlearnRequest::new(data, u.delete_index, loss, params, u.seed)?.with_sigma(u.sigma);
    let calibration = match u.calibration {
        CalibrationArg::Retain => Calibration::Retain,
        CalibrationArg::Global => Calibration::Global,
    };
    let result = match u.method {
        Method::D2d => unlearn_d2d(&request, calibration)?,
        Method::Newton => unlearn_newton(&request, calibration)?,
    };
    print_json(&json!({
        "method": format!("{:?}", u.method).to_lowercase(),
        "deleted_index": u.delete_index,
        "w_out": result.w_out.as_slice(),
        "audit": result.audit,
        "certified": result.certified,
    }))?;
    Ok(0)
}

fn resolve_output(config: &ExperimentConfig, output_dir: Option<&Path>) -> PathBuf {
    let name = config
        .output_path
        .as_deref()
        .and_then(Path::file_name)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", config.experiment)));
    match (output_dir, &config.output_path) {
        (Some(dir), _) => dir.join(name),
        (None, Some(path)) => path.clone(),
        (None, None) => name,
    }
}

pub fn sweep(
    config_path: Option<&Path>,
    experiment: Option<&str>,
    output_dir: Option<&Path>,
    workers: Option<usize>,
    master_seed: Option<u64>,
) -> Result<u8> {
    let mut config = match (config_path, experiment) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::for_experiment(name.parse()?),
        (Some(_), Some(_)) => return Err(Error::Config("give either --config or --experiment, not both".into())),
        (None, None) => return Err(Error::Config("sweep needs --config or --experiment".into())),
    };
    if let Some(seed) = master_seed {
        config.master_seed = seed;
    }
    if workers.is_some() {
        config.workers = workers;
    }
    let report = resolve_output(&config, output_dir);
    config.output_path = Some(report.clone());
    let rows = run_experiment(&config)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    print_json(&json!({
        "experiment": config.experiment,
        "report": report,
        "summary": summary_path(&report),
        "rows": rows.len(),
        "failed": failed,
    }))?;
    Ok(0)
}

pub fn selftest() -> Result<u8> {
    let checks = run_selftest();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 4 })
}
