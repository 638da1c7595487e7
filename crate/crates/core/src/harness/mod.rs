//! Batch front end: configuration, data ingestion, synthetic generators,
//! parameter sweeps and their CSV reports.

mod config;
mod ingest;
mod report;
mod run;
mod selftest;
mod synthetic;

pub use config::{
    Bounds, CsvSource, DatasetSpec, ExperimentConfig, ExperimentKind, MstSettings, SvmSettings, SyntheticKind,
};
pub use ingest::{
    ingest_csv, ingest_edges, ingest_scalars, preprocess, random_projection, scale_into_ball, standardize,
    IngestOptions,
};
pub use report::{
    read_report, read_summary, render_report, render_summary, summarize, summary_path, write_atomic, write_report,
    write_summary, ReportRow, Stat, SummaryRow, REPORT_COLUMNS, SCHEMA_LINE, SCHEMA_VERSION, SUMMARY_COLUMNS,
};
pub use run::{
    cell_seed, cells, center_for_pca, data_seed, load_source, run_cell, run_experiment, sweep, Cell, Source,
};
pub use selftest::{selftest, Check};
pub use synthetic::{generate_synthetic, Synthetic};
