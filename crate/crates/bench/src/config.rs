//! TOML experiment description.
//!
//! ```toml
//! version = 1
//! replicates = 100
//! seed_base = 7
//! deltas = [0.5, 0.1, 0.05]
//!
//! [generator]
//! family = { kind = "student_t", dof = 2.5 }
//! mean = { kind = "zero" }
//! covariance = { kind = "identity" }
//!
//! [adversary]
//! kind = "shift"
//! magnitude = 1e6
//!
//! [estimator]
//! kind = "mean_euclidean"
//!
//! [grid]
//! n = [2000]
//! d = [5]
//! k = [400]
//! epsilon = [0.05]
//! ```

use std::path::{Path, PathBuf};

use momvc::data_lab::{AdversaryModel, CovarianceFactory, Family, GeneratorSpec, OutlierLaw};
use momvc::eigensplit::LogBase;
use momvc::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::{BenchError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub replicates: usize,
    pub seed_base: u64,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub bounds: BoundOverrides,
    pub grid: Grid,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "gaussian")]
    pub family: Family,
    #[serde(default)]
    pub mean: VectorConfig,
    #[serde(default = "identity")]
    pub covariance: CovarianceFactory,
}

fn gaussian() -> Family {
    Family::Gaussian
}

fn identity() -> CovarianceFactory {
    CovarianceFactory::Identity
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            family: gaussian(),
            mean: VectorConfig::Zero,
            covariance: identity(),
        }
    }
}

impl GeneratorConfig {
    pub fn spec(&self, d: usize, s: usize) -> Result<GeneratorSpec> {
        let spec = GeneratorSpec {
            family: self.family.clone(),
            mean: self.mean.build(d, s)?,
            covariance: self.covariance.clone(),
            sparsity: None,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A length-`d` vector described independently of `d`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorConfig {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `value` in the first `count` coordinates (the grid `s` when omitted).
    Leading { value: f64, count: Option<usize> },
    Explicit { values: Vec<f64> },
}

impl VectorConfig {
    pub fn build(&self, d: usize, s: usize) -> Result<Vec<f64>> {
        let v = match self {
            Self::Zero => vec![0.0; d],
            Self::Constant { value } => vec![*value; d],
            Self::Leading { value, count } => {
                let c = count.unwrap_or(s);
                if c > d {
                    return Err(BenchError::Config(format!("leading count {c} exceeds d={d}")));
                }
                let mut v = vec![0.0; d];
                v[..c].fill(*value);
                v
            }
            Self::Explicit { values } => {
                if values.len() != d {
                    return Err(BenchError::Config(format!("explicit vector has {} entries, d={d}", values.len())));
                }
                values.clone()
            }
        };
        Ok(v)
    }
}

/// Corruption applied to each replicate; its fraction comes from the grid.
/// Directions default to `e_1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryConfig {
    #[default]
    None,
    /// Outliers at `magnitude * e_1`, blurred by `spread * N(0, I)` when positive.
    Huber {
        magnitude: f64,
        #[serde(default)]
        spread: f64,
    },
    Shift { magnitude: f64, direction: Option<Vec<f64>> },
    KeepLargest { direction: Option<Vec<f64>> },
    ResponsePoison { magnitude: f64 },
}

fn direction_or_e1(direction: &Option<Vec<f64>>, d: usize) -> Vec<f64> {
    direction.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    })
}

impl AdversaryConfig {
    pub fn model(&self, d: usize, epsilon: f64) -> AdversaryModel {
        let e1 = |scale: f64| {
            let mut e = vec![0.0; d];
            e[0] = scale;
            e
        };
        match self {
            _ if epsilon == 0.0 => AdversaryModel::None,
            Self::None => AdversaryModel::None,
            Self::Huber { magnitude, spread } => AdversaryModel::Huber {
                epsilon,
                outlier: if *spread > 0.0 {
                    OutlierLaw::Gaussian {
                        center: e1(*magnitude),
                        scale: *spread,
                    }
                } else {
                    OutlierLaw::PointMass { location: e1(*magnitude) }
                },
            },
            Self::Shift { magnitude, direction } => AdversaryModel::AdversarialShift {
                epsilon,
                direction: direction_or_e1(direction, d),
                magnitude: *magnitude,
            },
            Self::KeepLargest { direction } => AdversaryModel::KeepLargest {
                epsilon,
                direction: direction_or_e1(direction, d),
            },
            Self::ResponsePoison { magnitude } => AdversaryModel::ResponsePoison {
                epsilon,
                magnitude: *magnitude,
            },
        }
    }
}

/// Linear model for the regression estimators. The noise is one-dimensional,
/// centered and of unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub beta: VectorConfig,
    #[serde(default = "gaussian")]
    pub noise: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    EmpiricalMean,
    /// Univariate median of means; needs `d = 1`.
    #[serde(rename = "mom_1d")]
    Mom1d,
    MeanSupnorm,
    MeanEuclidean,
    MeanSparse,
    Eigensplit {
        #[serde(default)]
        log_base: LogBase,
    },
    Regression {
        model: LinearModel,
        #[serde(default)]
        sparse: bool,
    },
    Ols { model: LinearModel },
    CovSpectral,
    CovLowrank { rank: usize },
    SampleCovariance,
}

impl EstimatorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::EmpiricalMean => "empirical_mean",
            Self::Mom1d => "mom_1d",
            Self::MeanSupnorm => "mean_supnorm",
            Self::MeanEuclidean => "mean_euclidean",
            Self::MeanSparse => "mean_sparse",
            Self::Eigensplit { .. } => "eigensplit",
            Self::Regression { .. } => "regression",
            Self::Ols { .. } => "ols",
            Self::CovSpectral => "cov_spectral",
            Self::CovLowrank { .. } => "cov_lowrank",
            Self::SampleCovariance => "sample_covariance",
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, Self::Regression { .. } | Self::Ols { .. })
    }
}

/// Scale constants that cannot be read off the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverrides {
    pub weak_sigma: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(default = "one")]
    pub multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for BoundOverrides {
    fn default() -> Self {
        Self {
            weak_sigma: None,
            gamma: None,
            multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    #[serde(default = "default_s")]
    pub s: Vec<usize>,
    pub k: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
}

fn default_s() -> Vec<usize> {
    vec![1]
}

fn default_epsilon() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub k: usize,
    pub epsilon: f64,
}

impl Grid {
    /// Cartesian product in `n, d, s, k, epsilon` order, last axis fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &d in &self.d {
                for &s in &self.s {
                    for &k in &self.k {
                        for &epsilon in &self.epsilon {
                            out.push(Cell { n, d, s, k, epsilon });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version));
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        let g = &self.grid;
        for (name, len) in [("n", g.n.len()), ("d", g.d.len()), ("s", g.s.len()), ("k", g.k.len()), ("epsilon", g.epsilon.len())] {
            if len == 0 {
                return fail(format!("grid axis {name} is empty"));
            }
        }
        if g.n.contains(&0) || g.d.contains(&0) || g.s.contains(&0) || g.k.contains(&0) {
            return fail("grid n, d, s and k must be positive".into());
        }
        if let Some(e) = g.epsilon.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
            return fail(format!("epsilon {e} outside [0, 1)"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return fail(format!("delta {d} outside (0, 1)"));
        }
        if matches!(self.estimator, EstimatorConfig::Mom1d) && g.d.iter().any(|&d| d != 1) {
            return fail("mom_1d needs d = 1".into());
        }
        if matches!(self.adversary, AdversaryConfig::ResponsePoison { .. }) && !self.estimator.is_regression() {
            return fail("response_poison needs a regression estimator".into());
        }
        for cell in g.cells() {
            if cell.s > cell.d {
                return fail(format!("s={} exceeds d={}", cell.s, cell.d));
            }
            self.generator.spec(cell.d, cell.s)?;
            if let EstimatorConfig::Regression { model, .. } | EstimatorConfig::Ols { model } = &self.estimator {
                model.beta.build(cell.d, cell.s)?;
            }
            if let EstimatorConfig::CovLowrank { rank } = self.estimator {
                if rank == 0 || rank > cell.d {
                    return fail(format!("rank {rank} outside 1..={}", cell.d));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        version = 1
        replicates = 3
        seed_base = 1
        estimator = { kind = "mean_euclidean" }
        [grid]
        n = [100]
        d = [2, 3]
        k = [5]
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.generator, GeneratorConfig::default());
        assert_eq!(cfg.grid.cells().len(), 2);
        assert_eq!(cfg.solver, SolverOptions::default());
        assert!(cfg.deltas.is_empty());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            MINIMAL.replace("version = 1", "version = 2"),
            MINIMAL.replace("replicates = 3", "replicates = 0"),
            MINIMAL.replace("d = [2, 3]", "d = []"),
            MINIMAL.replace("seed_base = 1", "seed_base = 1\ndeltas = [1.5]"),
            MINIMAL.replace("seed_base = 1", "seed_base = 1\nbogus = 2"),
            MINIMAL.replace("mean_euclidean", "mom_1d"),
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(BenchError::Config(_))), "{text}");
        }
    }

    #[test]
    fn leading_mean_uses_grid_sparsity() {
        let v = VectorConfig::Leading { value: 2.0, count: None };
        assert_eq!(v.build(4, 2).unwrap(), vec![2.0, 2.0, 0.0, 0.0]);
        assert!(v.build(2, 3).is_err());
    }
}
