use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::render_report;
use super::run::sweep;
use super::synthetic::generate_synthetic;
use super::{Bounds, SyntheticKind};
use crate::active::{recover_hessian, unlearn_d2d, Calibration, UnlearnRequest};
use crate::erm::{curvature, gs_erm, rs_erm, train, LossSpec, TrainOptions};
use crate::error::Result;
use crate::mechanism::{analytic_epsilon, max_shift, shift_multiplier, PrivacyParams};
use crate::median::{oracle_rs_median, rs_median, ScalarSample};
use crate::mst::{oracle_rs_mst, random_connected_graph, rs_mst_edge};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Fast consistency checks of the installed build; each takes well under a
/// second.
pub fn selftest() -> Vec<Check> {
    vec![
        check("mechanism_round_trip", round_trip()),
        check("median_oracle", median_oracle()),
        check("mst_oracle", mst_oracle()),
        check("erm_ratio_identity", erm_ratio()),
        check("hessian_recovery", hessian_recovery()),
        check("d2d_certificate", d2d_certificate()),
        check("sweep_determinism", determinism()),
    ]
}

fn round_trip() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for eps in [0.1, 0.5, 1.0] {
        for delta in [1e-3, 1e-5, 1e-8] {
            for sigma in [0.05, 1.0, 20.0] {
                let p = PrivacyParams::new(eps, delta)?;
                let back = analytic_epsilon(max_shift(&p, sigma)?, sigma, delta)?;
                worst = worst.max((back / eps - 1.0).abs());
            }
        }
    }
    Ok((worst <= 1e-9, format!("max relative error {worst:.2e}")))
}

fn median_oracle() -> Result<(bool, String)> {
    let mut r = rng::seeded(1);
    for trial in 0..50 {
        let n = 2 * rand::Rng::random_range(&mut r, 1..30usize) + 1;
        let values = (0..n).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        let s = ScalarSample::new(values, 1.0)?;
        let (a, b) = (rs_median(&s)?.value, oracle_rs_median(&s, 3)?.value);
        if a != b {
            return Ok((false, format!("trial {trial}: closed form {a} vs oracle {b}")));
        }
    }
    Ok((true, "50 samples agree".into()))
}

fn mst_oracle() -> Result<(bool, String)> {
    let mut r = rng::seeded(2);
    for trial in 0..50 {
        let n = rand::Rng::random_range(&mut r, 2..8usize);
        let g = random_connected_graph(n, 0.5, 1.0, trial % 2 == 0, &mut r)?;
        let (a, b) = (rs_mst_edge(&g)?.value, oracle_rs_mst(&g)?.value);
        if a != b {
            return Ok((false, format!("trial {trial}: bottleneck {a} vs oracle {b}")));
        }
    }
    Ok((true, "50 graphs agree".into()))
}

fn erm_ratio() -> Result<(bool, String)> {
    let kind = SyntheticKind::GaussianBlob { d: 5, separation: 1.0 };
    let data = generate_synthetic(&kind, 200, &Bounds::default(), 3)?.into_dataset()?;
    let loss = LossSpec::mse(1e-3)?;
    let report = curvature(&data, &loss)?;
    let rs = rs_erm(&report, 200)?.value;
    let gs = gs_erm(report.lipschitz, 200, loss.lambda)?.value;
    let err = ((rs / gs) / (loss.lambda / report.lambda_r) - 1.0).abs();
    Ok((err <= 1e-12, format!("relative error {err:.2e}")))
}

fn hessian_recovery() -> Result<(bool, String)> {
    let kind = SyntheticKind::GaussianBlob { d: 4, separation: 1.0 };
    let full = generate_synthetic(&kind, 101, &Bounds::default(), 4)?.into_dataset()?;
    let loss = LossSpec::logistic(0.01)?;
    let w = train(&full, &loss, &TrainOptions::default())?;
    let retain = full.without(100)?;
    let recovered = recover_hessian(&loss.hessian(&full, &w), &loss.sample_hessian(&w, &full.row(100), full.label(100)), 100);
    let err = (recovered - loss.hessian(&retain, &w)).abs().max();
    Ok((err <= 1e-10, format!("max entry error {err:.2e}")))
}

fn d2d_certificate() -> Result<(bool, String)> {
    let kind = SyntheticKind::GaussianBlob { d: 5, separation: 1.0 };
    let full = generate_synthetic(&kind, 51, &Bounds::default(), 5)?.into_dataset()?;
    let params = PrivacyParams::new(1.0, 1e-5)?;
    let request = UnlearnRequest::new(full, 7, LossSpec::logistic(0.05)?, params, 5)?.with_sigma(0.1);
    let result = unlearn_d2d(&request, Calibration::Retain)?;
    let exact = train(&request.retain_set()?, &request.loss, &TrainOptions::default())?;
    let distance = (&result.w_pre_noise - exact).norm();
    let target = 0.1 * shift_multiplier(1.0, 1e-5);
    Ok((
        distance <= target,
        format!(
            "{} steps, distance {distance:.3e} <= {target:.3e}",
            result.audit.iterations.unwrap_or(0)
        ),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let mut c = ExperimentConfig::for_experiment(ExperimentKind::PassiveMse);
    c.n_grid = vec![40];
    c.lambda_grid = vec![1e-3, 1.0];
    c.seeds = vec![1, 2];
    let a = render_report(&sweep(&c)?)?;
    let b = render_report(&sweep(&c)?)?;
    Ok((a == b, format!("{} bytes", a.len())))
}
