use std::time::{Duration, Instant};

use momvc::cov_est::{mom_cov_lowrank, mom_cov_spectral};
use momvc::data_lab::{
    corrupt, derive_seed, generate, regression_generate, AdversarySpec, CovarianceFactory, Family, GeneratorSpec,
    GAUSSIAN_SMALL_BALL,
};
use momvc::eigensplit::{spectral_grouping, split_estimate, SplitOptions};
use momvc::linalg::{sorted_eigen, spectral_norm_sym};
use momvc::mean_est::{mom_mean_euclidean, mom_mean_sparse, mom_mean_supnorm};
use momvc::mom_core::mom_mean_1d;
use momvc::reg_est::{excess_risk, mom_regression, ols, ModelSet, RegressionProblem};
use momvc::vc_calculus::{gaussian_weak_sigma, risk_radius, BoundContext, BoundParams, BoundSheet};
use momvc::{MomError, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Cell, EstimatorConfig, ExperimentConfig, LinearModel};
use crate::{BenchError, Result};

const DATA_STREAM: u64 = 1;
const ADVERSARY_STREAM: u64 = 2;
const ESTIMATOR_STREAM: u64 = 3;

/// How a replicate's estimate is scored against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Euclidean,
    Sup,
    Spectral,
    Frobenius,
    /// `<Delta, Sigma Delta>`, compared against the squared radius.
    ExcessRisk,
}

impl Loss {
    pub fn within(self, loss: f64, radius: f64) -> bool {
        match self {
            Self::ExcessRisk => loss <= radius * radius,
            _ => loss <= radius,
        }
    }
}

pub fn task_of(est: &EstimatorConfig) -> (BoundContext, Loss) {
    match est {
        EstimatorConfig::EmpiricalMean | EstimatorConfig::Mom1d | EstimatorConfig::MeanEuclidean => {
            (BoundContext::MeanAnyNorm, Loss::Euclidean)
        }
        EstimatorConfig::MeanSupnorm => (BoundContext::MeanAnyNorm, Loss::Sup),
        EstimatorConfig::MeanSparse => (BoundContext::SparseMean, Loss::Euclidean),
        EstimatorConfig::Eigensplit { .. } => (BoundContext::Eigensplit, Loss::Euclidean),
        EstimatorConfig::Regression { .. } | EstimatorConfig::Ols { .. } => (BoundContext::Regression, Loss::ExcessRisk),
        EstimatorConfig::CovSpectral | EstimatorConfig::SampleCovariance => (BoundContext::CovSpectral, Loss::Spectral),
        EstimatorConfig::CovLowrank { .. } => (BoundContext::CovLowrank, Loss::Frobenius),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub seed: u64,
    pub loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantilePoint {
    pub delta: f64,
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub records: Vec<ReplicateRecord>,
    pub bound_params: BoundParams,
    pub bound: BoundSheet,
    pub quantiles: Vec<QuantilePoint>,
    /// Fraction of all replicates (failed ones count as misses) within the radius.
    pub coverage: f64,
    pub nominal_coverage: f64,
    pub wall_time: Duration,
}

impl CellResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.loss.is_none()).count()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.loss).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub task: String,
    pub loss: Loss,
    pub replicates: usize,
    pub deltas: Vec<f64>,
    pub cells: Vec<CellResult>,
    pub wall_time: Duration,
}

/// Order statistic `ceil((1 - delta) m)` of the sorted sample, clamped to `1..=m`.
pub fn empirical_quantile(sorted: &[f64], delta: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let m = sorted.len();
    // The slack keeps products like 0.95 * 100 from rounding up a rank.
    let rank = (((1.0 - delta) * m as f64) - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, m) - 1]
}

/// Everything about a cell that does not depend on the replicate.
struct CellSetup {
    cell: Cell,
    spec: GeneratorSpec,
    beta: Option<DVector<f64>>,
    sigma: DMatrix<f64>,
    bound_params: BoundParams,
    bound: BoundSheet,
}

fn scale_of(cfg: &ExperimentConfig, name: &str, value: Option<f64>) -> Result<f64> {
    value.ok_or_else(|| {
        BenchError::Config(format!(
            "{}: no analytic {name} for this generator; set bounds.{name}",
            cfg.estimator.name()
        ))
    })
}

fn setup_cell(cfg: &ExperimentConfig, cell: Cell) -> Result<CellSetup> {
    let spec = cfg.generator.spec(cell.d, cell.s)?;
    // Two-point moments depend on n, so probe at the cell size.
    let probe_n = match spec.family {
        Family::TwoPointCounterexample => cell.n,
        _ => 1,
    };
    let probe = generate(&spec, probe_n, 0)?;
    let truth = probe.truth.expect("generator records truth");
    let sigma = truth.covariance.expect("generator records covariance");
    let (eig, _) = sorted_eigen(&sigma);
    let lambda1 = eig[0].max(0.0);
    let gaussian = matches!(spec.family, Family::Gaussian);

    let (context, loss) = task_of(&cfg.estimator);
    let mut p = BoundParams::new(cell.k, cell.n, cell.d);
    p.corrupted = (cell.epsilon * cell.n as f64).floor() as usize;
    p.multiplier = cfg.bounds.multiplier;
    p.lambda1 = Some(lambda1);
    p.sigma_half_norm = Some(match loss {
        Loss::Sup => sigma.diagonal().iter().fold(0.0f64, |a, v| a.max(v.max(0.0).sqrt())),
        _ => lambda1.sqrt(),
    });
    let mut beta = None;
    match &cfg.estimator {
        EstimatorConfig::MeanSparse => p.s = Some(cell.s),
        EstimatorConfig::Eigensplit { .. } => {
            p.s = Some(cell.s);
            p.band_dims = Some(spectral_grouping(&sigma)?.band_dims());
        }
        EstimatorConfig::Regression { model, .. } | EstimatorConfig::Ols { model } => {
            if let EstimatorConfig::Regression { sparse: true, .. } = cfg.estimator {
                p.s = Some(cell.s);
            }
            beta = Some(DVector::from_vec(model.beta.build(cell.d, cell.s)?));
            // Unit-variance noise independent of the design.
            p.weak_sigma = Some(cfg.bounds.weak_sigma.unwrap_or(1.0));
            p.gamma = Some(scale_of(cfg, "gamma", cfg.bounds.gamma.or(gaussian.then_some(GAUSSIAN_SMALL_BALL)))?);
        }
        EstimatorConfig::CovSpectral | EstimatorConfig::SampleCovariance | EstimatorConfig::CovLowrank { .. } => {
            let analytic = gaussian.then(|| gaussian_weak_sigma(lambda1));
            p.weak_sigma = Some(scale_of(cfg, "weak_sigma", cfg.bounds.weak_sigma.or(analytic))?);
            if let EstimatorConfig::CovLowrank { rank } = cfg.estimator {
                p.rank = Some(rank);
            }
        }
        _ => {}
    }
    let bound = risk_radius(context, &p)?;
    Ok(CellSetup {
        cell,
        spec,
        beta,
        sigma,
        bound_params: p,
        bound,
    })
}

fn noise_spec(model: &LinearModel) -> GeneratorSpec {
    GeneratorSpec {
        family: model.noise.clone(),
        mean: vec![0.0],
        covariance: CovarianceFactory::Identity,
        sparsity: None,
    }
}

fn vector_loss(loss: Loss, est: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let diff = est - truth;
    match loss {
        Loss::Sup => diff.amax(),
        _ => diff.norm(),
    }
}

fn run_replicate(cfg: &ExperimentConfig, setup: &CellSetup, opts: &SolverOptions, seed: u64) -> momvc::Result<f64> {
    let cell = setup.cell;
    let (_, loss) = task_of(&cfg.estimator);
    let data_seed = derive_seed(seed, DATA_STREAM);
    let clean = match &cfg.estimator {
        EstimatorConfig::Regression { model, .. } | EstimatorConfig::Ols { model } => {
            let beta = setup.beta.as_ref().expect("regression cells carry beta");
            regression_generate(&setup.spec, beta, &noise_spec(model), cell.n, data_seed)?
        }
        _ => generate(&setup.spec, cell.n, data_seed)?,
    };
    let adversary = AdversarySpec {
        model: cfg.adversary.model(cell.d, cell.epsilon),
        seed: derive_seed(seed, ADVERSARY_STREAM),
    };
    let data = corrupt(&clean, &adversary)?;
    let truth = data.truth.clone().expect("generator records truth");
    let mu = truth.mean.clone().expect("generator records mean");
    let est_seed = derive_seed(seed, ESTIMATOR_STREAM);
    let (k, s) = (cell.k, cell.s);

    let value = match &cfg.estimator {
        EstimatorConfig::EmpiricalMean => vector_loss(loss, &data.empirical_mean(), &mu),
        EstimatorConfig::Mom1d => {
            let col: Vec<f64> = data.points.iter().map(|p| p[0]).collect();
            (mom_mean_1d(&col, k, est_seed)? - mu[0]).abs()
        }
        EstimatorConfig::MeanSupnorm => vector_loss(loss, &mom_mean_supnorm(&data, k, est_seed)?.estimate, &mu),
        EstimatorConfig::MeanEuclidean => vector_loss(loss, &mom_mean_euclidean(&data, k, est_seed, opts)?.estimate, &mu),
        EstimatorConfig::MeanSparse => vector_loss(loss, &mom_mean_sparse(&data, k, s, est_seed, opts)?.estimate, &mu),
        EstimatorConfig::Eigensplit { log_base } => {
            let split_opts = SplitOptions {
                solver: opts.clone(),
                log_base: *log_base,
            };
            let r = split_estimate(&data, &setup.sigma, k, s, est_seed, &split_opts)?;
            vector_loss(loss, &r.report.estimate, &mu)
        }
        EstimatorConfig::Regression { sparse, .. } => {
            let model_set = if *sparse { ModelSet::Sparse { s } } else { ModelSet::Full };
            let mut problem = RegressionProblem::new(data, model_set)?;
            if let Some(g) = cfg.bounds.gamma {
                problem = problem.with_gamma(g)?;
            }
            let beta_hat = mom_regression(&problem, k, est_seed, opts)?.estimate;
            regression_risk(&truth, &beta_hat)?
        }
        EstimatorConfig::Ols { .. } => regression_risk(&truth, &ols(&data)?)?,
        EstimatorConfig::CovSpectral => {
            let target = truth.second_moment().expect("generator records covariance");
            spectral_norm_sym(&(mom_cov_spectral(&data, k, est_seed, opts)?.estimate - target))
        }
        EstimatorConfig::CovLowrank { rank } => {
            let target = truth.second_moment().expect("generator records covariance");
            (mom_cov_lowrank(&data, k, *rank, est_seed, opts)?.estimate - target).norm()
        }
        EstimatorConfig::SampleCovariance => spectral_norm_sym(&(data.sample_covariance() - &setup.sigma)),
    };
    Ok(value)
}

fn regression_risk(truth: &momvc::Truth, beta_hat: &DVector<f64>) -> momvc::Result<f64> {
    let beta_star = truth
        .beta_star
        .as_ref()
        .ok_or_else(|| MomError::InvalidArgument("regression data lacks beta*".into()))?;
    let weight = truth.second_moment().expect("design records covariance");
    Ok(excess_risk(beta_hat, beta_star, &weight))
}

/// Sweeps every grid cell. Replicate `r` of cell `c` uses seed
/// `seed_base + c * replicates + r`; estimator errors are recorded, not raised.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let (_, loss) = task_of(&cfg.estimator);
    let opts = SolverOptions {
        record_trace: false,
        ..cfg.solver.clone()
    };
    let mut cells = Vec::new();
    for (c, cell) in cfg.grid.cells().into_iter().enumerate() {
        let cell_start = Instant::now();
        let setup = setup_cell(cfg, cell)?;
        let first = cfg.seed_base.wrapping_add((c * cfg.replicates) as u64);
        let records: Vec<ReplicateRecord> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = first.wrapping_add(r as u64);
                match run_replicate(cfg, &setup, &opts, seed) {
                    Ok(v) if v.is_finite() => ReplicateRecord {
                        seed,
                        loss: Some(v),
                        error: None,
                    },
                    Ok(v) => ReplicateRecord {
                        seed,
                        loss: None,
                        error: Some(format!("non-finite loss {v}")),
                    },
                    Err(e) => ReplicateRecord {
                        seed,
                        loss: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();

        let mut sorted: Vec<f64> = records.iter().filter_map(|r| r.loss).collect();
        sorted.sort_by(f64::total_cmp);
        let quantiles = cfg
            .deltas
            .iter()
            .map(|&delta| QuantilePoint {
                delta,
                level: 1.0 - delta,
                value: empirical_quantile(&sorted, delta),
            })
            .collect();
        let radius = setup.bound.risk_radius;
        let covered = sorted.iter().filter(|&&v| loss.within(v, radius)).count();
        cells.push(CellResult {
            cell,
            records,
            coverage: covered as f64 / cfg.replicates as f64,
            nominal_coverage: 1.0 - setup.bound.failure_prob,
            bound_params: setup.bound_params,
            bound: setup.bound,
            quantiles,
            wall_time: cell_start.elapsed(),
        });
    }
    Ok(ExperimentResult {
        task: cfg.estimator.name().to_string(),
        loss,
        replicates: cfg.replicates,
        deltas: cfg.deltas.clone(),
        cells,
        wall_time: start.elapsed(),
    })
}
