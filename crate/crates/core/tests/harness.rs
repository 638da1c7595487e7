use std::path::Path;

use unlearn_core::harness::{
    read_report, read_summary, run_experiment, summarize, summary_path, CsvSource, DatasetSpec, ExperimentConfig,
    ExperimentKind, SCHEMA_LINE,
};

fn small(kind: ExperimentKind, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_experiment(kind);
    c.n_grid = vec![30, 60];
    c.lambda_grid = vec![1e-3, 1.0];
    c.seeds = vec![1, 2];
    c.oracle_trials = 2;
    c.test_size = 50;
    c.output_path = Some(out.join(format!("{kind}.csv")));
    c
}

#[test]
fn reports_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ExperimentKind::ALL {
        let config = small(kind, dir.path());
        let rows = run_experiment(&config).unwrap();
        let report = config.output_path.unwrap();
        let text = std::fs::read_to_string(&report).unwrap();
        assert!(text.starts_with(SCHEMA_LINE), "{kind}");
        assert_eq!(read_report(&report).unwrap(), rows, "{kind}");
        assert_eq!(read_summary(&summary_path(&report)).unwrap(), summarize(&rows), "{kind}");
    }
}

#[test]
fn config_survives_toml() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ExperimentKind::ALL {
        let config = small(kind, dir.path());
        let text = config.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), config);
    }
    assert!(ExperimentConfig::from_toml_str("experiment = \"passive_mse\"\nbogus = 1\n").is_err());
}

#[test]
fn csv_dataset_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("points.csv");
    let mut text = String::from("f1,f2,f3,label\n");
    for i in 0..120 {
        let t = i as f64;
        text.push_str(&format!("{},{},{},{}\n", (t * 0.37).sin() * 4.0, (t * 0.11).cos(), t / 120.0, i % 2));
    }
    std::fs::write(&data, text).unwrap();
    let mut config = small(ExperimentKind::PassiveLogloss, dir.path());
    config.dataset = DatasetSpec::Csv(CsvSource {
        path: data,
        label_column: Some("label".into()),
        standardize: true,
        project_to_b: true,
        jl_target_dim: None,
        projection_seed: 0,
        binary_labels: true,
    });
    config.n_grid = vec![50, 100];
    let rows = run_experiment(&config).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r.is_ok(), "{:?}", r.error);
        assert!(r.ratio.unwrap() <= 1.0 + 1e-12);
    }
    // A request for more rows than the file holds is a recorded cell error.
    config.n_grid = vec![500];
    let rows = run_experiment(&config).unwrap();
    assert!(rows.iter().all(|r| !r.is_ok()));
}
