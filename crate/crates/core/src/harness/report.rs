//! Report rows and the two CSV files a sweep writes.
//!
//! Both files start with the comment line `# schema: v1`; column order is
//! fixed by [`REPORT_COLUMNS`] and [`SUMMARY_COLUMNS`]. Missing values are
//! empty cells, infinities are written `inf`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentKind;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "v1";
pub const SCHEMA_LINE: &str = "# schema: v1";

pub const REPORT_COLUMNS: [&str; 15] = [
    "experiment",
    "dataset",
    "n",
    "lambda",
    "seed",
    "cell_seed",
    "rs",
    "gs",
    "ratio",
    "oracle",
    "iterations",
    "sigma",
    "accuracy",
    "wall_time",
    "error",
];

pub const SUMMARY_COLUMNS: [&str; 20] = [
    "experiment",
    "dataset",
    "n",
    "lambda",
    "count",
    "errors",
    "rs_mean",
    "rs_std",
    "gs_mean",
    "gs_std",
    "ratio_mean",
    "ratio_std",
    "oracle_mean",
    "oracle_std",
    "iterations_mean",
    "iterations_std",
    "sigma_mean",
    "sigma_std",
    "accuracy_mean",
    "accuracy_std",
];

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: ExperimentKind,
    pub dataset: String,
    /// Retained sample size (vertices for MST).
    pub n: usize,
    pub lambda: Option<f64>,
    /// Seed from the config grid.
    pub seed: u64,
    /// Seed actually used, derived from the master seed and the cell key.
    pub cell_seed: u64,
    pub rs: Option<f64>,
    pub gs: Option<f64>,
    /// `rs/gs`; for Descent-to-Delete the iteration ratio, 1 when neither
    /// calibration needs a step.
    pub ratio: Option<f64>,
    pub oracle: Option<f64>,
    pub iterations: Option<usize>,
    pub sigma: Option<f64>,
    pub accuracy: Option<f64>,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl ReportRow {
    pub fn empty(experiment: ExperimentKind, dataset: &str, n: usize, lambda: Option<f64>, seed: u64, cell_seed: u64) -> Self {
        Self {
            experiment,
            dataset: dataset.to_owned(),
            n,
            lambda,
            seed,
            cell_seed,
            rs: None,
            gs: None,
            ratio: None,
            oracle: None,
            iterations: None,
            sigma: None,
            accuracy: None,
            wall_time: 0.0,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.to_string(),
            self.dataset.clone(),
            self.n.to_string(),
            fmt_opt(self.lambda),
            self.seed.to_string(),
            self.cell_seed.to_string(),
            fmt_opt(self.rs),
            fmt_opt(self.gs),
            fmt_opt(self.ratio),
            fmt_opt(self.oracle),
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            fmt_opt(self.sigma),
            fmt_opt(self.accuracy),
            fmt_f64(self.wall_time),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // Shortest round-trip representation.
        format!("{v:?}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_opt(s: &str, column: &str, line: u64) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        location: format!("line {line}"),
        message: format!("column {column}: `{s}` is not a number"),
    })
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn render(columns: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(columns)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn render_report(rows: &[ReportRow]) -> Result<Vec<u8>> {
    render(&REPORT_COLUMNS, rows.iter().map(ReportRow::fields))
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_atomic(path, &render_report(rows)?)
}

fn check_schema(text: &str, path: &Path) -> Result<()> {
    match text.lines().next() {
        Some(line) if line.trim() == SCHEMA_LINE => Ok(()),
        other => Err(Error::Parse {
            location: path.display().to_string(),
            message: format!(
                "expected `{SCHEMA_LINE}` as first line, found `{}`",
                other.unwrap_or("")
            ),
        }),
    }
}

/// Reads a report written by [`write_report`].
pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)?;
    check_schema(&text, path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(REPORT_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            location: path.display().to_string(),
            message: "report columns do not match schema v1".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let line = r.position().map_or(0, |p| p.line());
        let int = |i: usize| -> Result<u64> {
            r[i].parse().map_err(|_| Error::Parse {
                location: format!("{}:{line}", path.display()),
                message: format!("column {}: `{}` is not an integer", REPORT_COLUMNS[i], &r[i]),
            })
        };
        let opt = |i: usize| parse_opt(&r[i], REPORT_COLUMNS[i], line);
        rows.push(ReportRow {
            experiment: r[0].parse()?,
            dataset: r[1].to_owned(),
            n: int(2)? as usize,
            lambda: opt(3)?,
            seed: int(4)?,
            cell_seed: int(5)?,
            rs: opt(6)?,
            gs: opt(7)?,
            ratio: opt(8)?,
            oracle: opt(9)?,
            iterations: if r[10].is_empty() { None } else { Some(int(10)? as usize) },
            sigma: opt(11)?,
            accuracy: opt(12)?,
            wall_time: opt(13)?.unwrap_or(0.0),
            error: if r[14].is_empty() { None } else { Some(r[14].to_owned()) },
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation (0 for a single value) over the
/// finite entries; `None` when there are none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

/// Aggregate over the seeds of one `(experiment, dataset, n, λ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: ExperimentKind,
    pub dataset: String,
    pub n: usize,
    pub lambda: Option<f64>,
    /// Rows without an error.
    pub count: usize,
    pub errors: usize,
    pub rs: Option<Stat>,
    pub gs: Option<Stat>,
    pub ratio: Option<Stat>,
    pub oracle: Option<Stat>,
    pub iterations: Option<Stat>,
    pub sigma: Option<Stat>,
    pub accuracy: Option<Stat>,
}

/// Groups rows by cell in order of first appearance. An infinite `gs`
/// (PCA) is summarised as `inf`.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(ExperimentKind, String, usize, Option<u64>)> = Vec::new();
    let key_of = |r: &ReportRow| (r.experiment, r.dataset.clone(), r.n, r.lambda.map(f64::to_bits));
    for r in rows {
        let k = key_of(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&ReportRow> = rows.iter().filter(|r| key_of(r) == k).collect();
            let ok: Vec<&&ReportRow> = group.iter().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&ReportRow) -> Option<f64>| Stat::of(ok.iter().filter_map(|r| f(r)));
            let gs = match col(|r| r.gs) {
                None if ok.iter().any(|r| r.gs == Some(f64::INFINITY)) => Some(Stat {
                    mean: f64::INFINITY,
                    std: 0.0,
                }),
                s => s,
            };
            SummaryRow {
                experiment: k.0,
                dataset: k.1,
                n: k.2,
                lambda: k.3.map(f64::from_bits),
                count: ok.len(),
                errors: group.len() - ok.len(),
                rs: col(|r| r.rs),
                gs,
                ratio: col(|r| r.ratio),
                oracle: col(|r| r.oracle),
                iterations: col(|r| r.iterations.map(|i| i as f64)),
                sigma: col(|r| r.sigma),
                accuracy: col(|r| r.accuracy),
            }
        })
        .collect()
}

impl SummaryRow {
    fn fields(&self) -> Vec<String> {
        let mut out = vec![
            self.experiment.to_string(),
            self.dataset.clone(),
            self.n.to_string(),
            fmt_opt(self.lambda),
            self.count.to_string(),
            self.errors.to_string(),
        ];
        for s in [
            self.rs,
            self.gs,
            self.ratio,
            self.oracle,
            self.iterations,
            self.sigma,
            self.accuracy,
        ] {
            out.push(fmt_opt(s.map(|s| s.mean)));
            out.push(fmt_opt(s.map(|s| s.std)));
        }
        out
    }
}

pub fn render_summary(summary: &[SummaryRow]) -> Result<Vec<u8>> {
    render(&SUMMARY_COLUMNS, summary.iter().map(SummaryRow::fields))
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    write_atomic(path, &render_summary(summary)?)
}

/// Reads a summary written by [`write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = std::fs::read_to_string(path)?;
    check_schema(&text, path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SUMMARY_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            location: path.display().to_string(),
            message: "summary columns do not match schema v1".into(),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record?;
        let line = r.position().map_or(0, |p| p.line());
        let int = |i: usize| -> Result<usize> {
            r[i].parse().map_err(|_| Error::Parse {
                location: format!("{}:{line}", path.display()),
                message: format!("column {}: `{}` is not an integer", SUMMARY_COLUMNS[i], &r[i]),
            })
        };
        let stat = |i: usize| -> Result<Option<Stat>> {
            Ok(match (parse_opt(&r[i], SUMMARY_COLUMNS[i], line)?, parse_opt(&r[i + 1], SUMMARY_COLUMNS[i + 1], line)?) {
                (Some(mean), Some(std)) => Some(Stat { mean, std }),
                _ => None,
            })
        };
        out.push(SummaryRow {
            experiment: r[0].parse()?,
            dataset: r[1].to_owned(),
            n: int(2)?,
            lambda: parse_opt(&r[3], "lambda", line)?,
            count: int(4)?,
            errors: int(5)?,
            rs: stat(6)?,
            gs: stat(8)?,
            ratio: stat(10)?,
            oracle: stat(12)?,
            iterations: stat(14)?,
            sigma: stat(16)?,
            accuracy: stat(18)?,
        });
    }
    Ok(out)
}

/// `<stem>.summary.csv` next to the report.
pub fn summary_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.summary.csv"))
}
