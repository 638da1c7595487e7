use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::erm::LossKind;
use crate::error::{Error, Result};
use crate::mechanism::PrivacyParams;
use crate::svm::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PassiveMse,
    PassiveLogloss,
    PassiveSvm,
    PassiveMst,
    PassivePca,
    PassiveMedian,
    ActiveD2d,
    ActiveNewton,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::PassiveMse,
        ExperimentKind::PassiveLogloss,
        ExperimentKind::PassiveSvm,
        ExperimentKind::PassiveMst,
        ExperimentKind::PassivePca,
        ExperimentKind::PassiveMedian,
        ExperimentKind::ActiveD2d,
        ExperimentKind::ActiveNewton,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::PassiveMse => "passive_mse",
            ExperimentKind::PassiveLogloss => "passive_logloss",
            ExperimentKind::PassiveSvm => "passive_svm",
            ExperimentKind::PassiveMst => "passive_mst",
            ExperimentKind::PassivePca => "passive_pca",
            ExperimentKind::PassiveMedian => "passive_median",
            ExperimentKind::ActiveD2d => "active_d2d",
            ExperimentKind::ActiveNewton => "active_newton",
        }
    }

    /// Whether the sweep runs over the λ grid.
    pub fn uses_lambda(&self) -> bool {
        matches!(
            self,
            ExperimentKind::PassiveMse
                | ExperimentKind::PassiveLogloss
                | ExperimentKind::ActiveD2d
                | ExperimentKind::ActiveNewton
        )
    }

    /// Loss used when the config does not name one.
    pub fn default_loss(&self) -> Option<LossKind> {
        match self {
            ExperimentKind::PassiveMse | ExperimentKind::ActiveD2d => Some(LossKind::Mse),
            ExperimentKind::PassiveLogloss | ExperimentKind::ActiveNewton => Some(LossKind::Logistic),
            _ => None,
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Desk-scale data generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Two unit-variance Gaussian clusters at `±separation·e₁`, labels ±1,
    /// scaled into the B-ball by one common factor.
    GaussianBlob {
        #[serde(default = "default_dim")]
        d: usize,
        #[serde(default = "default_separation")]
        separation: f64,
    },
    /// Points with `y⟨e₁, x⟩ ≥ γ` and infimum exactly `γ`.
    MarginSeparable {
        #[serde(default = "default_dim")]
        d: usize,
        gamma: f64,
    },
    /// `n` values uniform on `[0, B]`.
    UniformScalar,
    /// Erdős–Rényi graph on `n` vertices with uniform weights on `[0, B]`,
    /// resampled until connected.
    RandomGraph {
        p: f64,
        #[serde(default)]
        integer_weights: bool,
    },
}

fn default_dim() -> usize {
    10
}

fn default_separation() -> f64 {
    1.0
}

/// Where the data for a sweep comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticKind),
    /// Numeric CSV with a header row.
    Csv(CsvSource),
    /// Edge list, one `u v w` per line.
    Edges {
        path: PathBuf,
        /// Defaults to the largest observed weight.
        #[serde(default)]
        bound_b: Option<f64>,
    },
    /// Single-column CSV of values in `[0, B]`.
    Scalars { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Column name holding the label; absent for unlabeled data.
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default = "yes")]
    pub project_to_b: bool,
    #[serde(default)]
    pub jl_target_dim: Option<usize>,
    #[serde(default)]
    pub projection_seed: u64,
    /// Map a two-valued label column onto ±1.
    #[serde(default = "yes")]
    pub binary_labels: bool,
}

fn yes() -> bool {
    true
}

impl DatasetSpec {
    /// Short identifier written into every report row.
    pub fn id(&self) -> String {
        let stem = |p: &Path| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        };
        match self {
            DatasetSpec::Synthetic(kind) => match kind {
                SyntheticKind::GaussianBlob { d, .. } => format!("gaussian_blob_d{d}"),
                SyntheticKind::MarginSeparable { d, gamma } => format!("margin_separable_d{d}_g{gamma}"),
                SyntheticKind::UniformScalar => "uniform_scalar".into(),
                SyntheticKind::RandomGraph { p, .. } => format!("random_graph_p{p}"),
            },
            DatasetSpec::Csv(c) => stem(&c.path),
            DatasetSpec::Edges { path, .. } | DatasetSpec::Scalars { path } => stem(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    /// Row-norm bound `B`.
    pub b: f64,
    /// Parameter-norm cap `R_w`.
    pub r_w: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { b: 1.0, r_w: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    /// True margin of the data distribution. Taken from the generator for
    /// `margin_separable` data and required otherwise.
    pub gamma: Option<f64>,
    pub kernel: KernelSpec,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            gamma: None,
            kernel: KernelSpec::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MstSettings {
    /// Minimum edge density of sampled subgraphs (edge-list data only).
    pub min_density: f64,
    /// Graphs with at most this many vertices also get the exhaustive oracle
    /// when `oracle_trials > 0`.
    pub oracle_max_vertices: usize,
}

impl Default for MstSettings {
    fn default() -> Self {
        Self {
            min_density: 0.1,
            oracle_max_vertices: 200,
        }
    }
}

/// One sweep. Every field has a default; a config file only overrides what
/// it names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetSpec,
    pub n_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Root of every per-cell seed.
    pub master_seed: u64,
    pub privacy: PrivacyParams,
    /// Noise scale for Descent-to-Delete.
    pub sigma: Option<f64>,
    pub bounds: Bounds,
    /// Overrides the experiment's default loss (ERM experiments only).
    pub loss: Option<LossKind>,
    /// Trials of the empirical oracle per cell; 0 skips it.
    pub oracle_trials: usize,
    /// Rank for PCA.
    pub k: usize,
    pub svm: SvmSettings,
    pub mst: MstSettings,
    /// Held-out points for the Newton accuracy column.
    pub test_size: usize,
    pub output_path: Option<PathBuf>,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    /// Fill the `wall_time` column. Off by default so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::PassiveMse,
            dataset: DatasetSpec::Synthetic(SyntheticKind::GaussianBlob {
                d: default_dim(),
                separation: default_separation(),
            }),
            n_grid: vec![200, 500, 700, 1000, 1500],
            lambda_grid: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1],
            seeds: vec![1, 2, 3, 4, 5],
            master_seed: 0,
            privacy: PrivacyParams {
                epsilon: 1.0,
                delta: 1e-5,
            },
            sigma: Some(0.1),
            bounds: Bounds::default(),
            loss: None,
            oracle_trials: 0,
            k: 1,
            svm: SvmSettings::default(),
            mst: MstSettings::default(),
            test_size: 1000,
            output_path: None,
            workers: None,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `experiment` with a matching synthetic dataset.
    pub fn for_experiment(experiment: ExperimentKind) -> Self {
        let dataset = match experiment {
            ExperimentKind::PassiveSvm => SyntheticKind::MarginSeparable { d: 10, gamma: 0.1 },
            ExperimentKind::PassiveMst => SyntheticKind::RandomGraph {
                p: 0.1,
                integer_weights: false,
            },
            ExperimentKind::PassiveMedian => SyntheticKind::UniformScalar,
            _ => SyntheticKind::GaussianBlob {
                d: default_dim(),
                separation: default_separation(),
            },
        };
        Self {
            experiment,
            dataset: DatasetSpec::Synthetic(dataset),
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_grid.is_empty() {
            return fail("n_grid is empty".into());
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return fail("every n in n_grid must be at least 2".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds is empty".into());
        }
        if self.experiment.uses_lambda() {
            if self.lambda_grid.is_empty() {
                return fail("lambda_grid is empty".into());
            }
            if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                return fail(format!("lambda {l} must be finite and nonnegative"));
            }
        }
        PrivacyParams::new(self.privacy.epsilon, self.privacy.delta).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.bounds.b > 0.0 && self.bounds.b.is_finite()) {
            return fail(format!("bounds.b must be positive, got {}", self.bounds.b));
        }
        if !(self.bounds.r_w > 0.0 && self.bounds.r_w.is_finite()) {
            return fail(format!("bounds.r_w must be positive, got {}", self.bounds.r_w));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return fail(format!("sigma must be positive, got {s}"));
            }
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1".into());
        }
        if self.experiment == ExperimentKind::ActiveNewton && self.test_size == 0 {
            return fail("active_newton needs test_size > 0".into());
        }
        if let (Some(loss), Some(default)) = (self.loss, self.experiment.default_loss()) {
            let fixed = matches!(
                self.experiment,
                ExperimentKind::PassiveMse | ExperimentKind::PassiveLogloss
            );
            if fixed && loss != default {
                return fail(format!("{} always uses the {default} loss", self.experiment));
            }
        } else if self.loss.is_some() {
            return fail(format!("{} does not take a loss", self.experiment));
        }
        if self.experiment == ExperimentKind::PassivePca && self.k == 0 {
            return fail("k must be at least 1".into());
        }
        self.svm.kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.check_dataset()
    }

    fn check_dataset(&self) -> Result<()> {
        use ExperimentKind as E;
        let fail = |msg: String| Err(Error::Config(msg));
        let expected = match self.experiment {
            E::PassiveMst => "random_graph or an edge list",
            E::PassiveMedian => "uniform_scalar or a scalar CSV",
            _ => "gaussian_blob, margin_separable or a CSV",
        };
        let ok = match (&self.dataset, self.experiment) {
            (DatasetSpec::Synthetic(SyntheticKind::RandomGraph { .. }) | DatasetSpec::Edges { .. }, E::PassiveMst) => {
                true
            }
            (DatasetSpec::Synthetic(SyntheticKind::UniformScalar) | DatasetSpec::Scalars { .. }, E::PassiveMedian) => {
                true
            }
            (
                DatasetSpec::Synthetic(SyntheticKind::GaussianBlob { .. } | SyntheticKind::MarginSeparable { .. })
                | DatasetSpec::Csv(_),
                e,
            ) => !matches!(e, E::PassiveMst | E::PassiveMedian),
            _ => false,
        };
        if !ok {
            return fail(format!("{} needs {expected} as dataset", self.experiment));
        }
        match self.dataset {
            DatasetSpec::Synthetic(SyntheticKind::GaussianBlob { d, separation }) => {
                if d == 0 || !(separation >= 0.0 && separation.is_finite()) {
                    return fail("gaussian_blob needs d >= 1 and a finite separation >= 0".into());
                }
                if self.experiment == E::PassivePca && self.k >= d {
                    return fail(format!("k = {} must be below d = {d}", self.k));
                }
            }
            DatasetSpec::Synthetic(SyntheticKind::MarginSeparable { d, gamma }) => {
                if d < 2 || !(gamma > 0.0 && gamma <= self.bounds.b) {
                    return fail(format!(
                        "margin_separable needs d >= 2 and 0 < gamma <= B, got d = {d}, gamma = {gamma}"
                    ));
                }
            }
            DatasetSpec::Synthetic(SyntheticKind::RandomGraph { p, .. }) => {
                if !(p > 0.0 && p <= 1.0) {
                    return fail(format!("random_graph needs p in (0, 1], got {p}"));
                }
            }
            _ => {}
        }
        if self.experiment == E::PassiveSvm
            && self.svm.gamma.is_none()
            && !matches!(self.dataset, DatasetSpec::Synthetic(SyntheticKind::MarginSeparable { .. }))
        {
            return fail("passive_svm on external data needs svm.gamma (the true margin)".into());
        }
        Ok(())
    }

    /// Resolved ERM loss for this experiment.
    pub fn loss_kind(&self) -> Option<LossKind> {
        self.loss.or(self.experiment.default_loss())
    }

    /// Noise scale for Descent-to-Delete.
    pub fn d2d_sigma(&self) -> f64 {
        self.sigma.unwrap_or(crate::active::DEFAULT_D2D_SIGMA)
    }

    /// The true SVM margin: configured, else the generator's.
    pub fn svm_gamma(&self) -> Option<f64> {
        self.svm.gamma.or(match self.dataset {
            DatasetSpec::Synthetic(SyntheticKind::MarginSeparable { gamma, .. }) => Some(gamma),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_grid, vec![200, 500, 700, 1000, 1500]);
        assert_eq!(c.lambda_grid.len(), 7);
        assert_eq!(c.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!((c.bounds.b, c.bounds.r_w), (1.0, 1.0));
        assert_eq!((c.privacy.epsilon, c.privacy.delta, c.sigma), (1.0, 1e-5, Some(0.1)));
        c.validate().unwrap();
        for kind in ExperimentKind::ALL {
            ExperimentConfig::for_experiment(kind).validate().unwrap();
            assert_eq!(kind.as_str().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn parses_partial_toml() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            experiment = "passive_svm"
            n_grid = [50, 100]
            seeds = [7]

            [dataset]
            source = "synthetic"
            generator = "margin_separable"
            d = 5
            gamma = 0.2

            [privacy]
            epsilon = 0.5
            delta = 1e-6
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment, ExperimentKind::PassiveSvm);
        assert_eq!(c.n_grid, vec![50, 100]);
        assert_eq!(c.svm_gamma(), Some(0.2));
        assert_eq!(c.privacy.delta, 1e-6);
        assert_eq!(c.lambda_grid.len(), 7);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::for_experiment(ExperimentKind::PassiveMst);
        c.output_path = Some("out/mst.csv".into());
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "n_grid = []",
            "seeds = []",
            "lambda_grid = [-1.0]",
            "unknown_key = 3",
            "experiment = \"passive_mst\"",
            "experiment = \"passive_svm\"\n[dataset]\nsource = \"csv\"\npath = \"x.csv\"",
            "[privacy]\nepsilon = 0.0\ndelta = 1e-5",
            "loss = \"logistic\"",
            "experiment = \"nope\"",
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }
}
