//! Mean estimation with a known covariance by splitting its spectrum into
//! dyadic eigenvalue bands.
//!
//! Band `n` collects the eigenvectors with eigenvalues in
//! `[lambda_1 / 2^n, lambda_1 / 2^(n-1))`, the last band taking the whole tail.
//! Each band is estimated on the projected sample with `K_i = K 2^(i-1)`
//! blocks: a Euclidean min-max estimate when the band is small
//! (`d_i < s ln(d/s)`), otherwise a sparse estimate over the projected
//! canonical dictionary with greedy atom selection. Bands are orthogonal, so
//! the estimates add up.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{is_symmetric, sorted_eigen};
use crate::mean_est::{
    coordinatewise_median, solve_on_means, Diagnostics, DictionarySparse, EstimatorReport, Euclidean,
    Geometry, SolverOptions,
};
use crate::mom_core::{block_means, partition_blocks, Dataset};
use crate::vc_calculus::failure_prob;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrouping {
    /// Descending.
    pub eigenvalues: DVector<f64>,
    /// Columns match `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// `s_0 = 0 <= s_1 <= ... <= s_{n_l} = d`. Band `n` (1-based) holds the
    /// eigenvector indices `s_{n-1}..s_n`; some bands may be empty.
    pub boundaries: Vec<usize>,
    pub n_l: usize,
}

impl SpectralGrouping {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_bands(&self) -> usize {
        self.n_l
    }

    /// Eigenvector index range of band `i` (1-based).
    pub fn band(&self, i: usize) -> Range<usize> {
        self.boundaries[i - 1]..self.boundaries[i]
    }

    pub fn band_dims(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Orthonormal basis of band `i` as a `d x d_i` matrix.
    pub fn band_basis(&self, i: usize) -> DMatrix<f64> {
        let r = self.band(i);
        self.eigenvectors.columns(r.start, r.len()).into_owned()
    }

    /// Orthogonal projection of `x` onto band `i`.
    pub fn project(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let v = self.band_basis(i);
        &v * (v.transpose() * x)
    }
}

/// Number of bands, `max(1, floor(log2 d))`.
pub fn band_cap(d: usize) -> usize {
    (usize::BITS - 1 - d.leading_zeros()).max(1) as usize
}

pub fn spectral_grouping(sigma: &DMatrix<f64>) -> Result<SpectralGrouping> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return invalid("covariance must be a nonempty square matrix");
    }
    let scale = sigma.amax();
    if scale == 0.0 {
        return invalid("covariance is zero");
    }
    if !is_symmetric(sigma, 1e-10 * scale) {
        return invalid("covariance is not symmetric");
    }
    let (eigenvalues, eigenvectors) = sorted_eigen(sigma);
    let lambda1 = eigenvalues[0];
    if !(lambda1 > 0.0) || eigenvalues.iter().any(|&l| l < -1e-10 * lambda1) {
        return invalid("covariance is not positive semidefinite with lambda_1 > 0");
    }
    let d = sigma.nrows();
    let n_l = band_cap(d);
    let mut boundaries = vec![0];
    for n in 1..n_l {
        let threshold = lambda1 / 2f64.powi(n as i32);
        boundaries.push(eigenvalues.iter().take_while(|&&l| l >= threshold).count());
    }
    boundaries.push(d);
    Ok(SpectralGrouping {
        eigenvalues,
        eigenvectors,
        boundaries,
        n_l,
    })
}

/// `K_i = K 2^(i-1)` for bands `1..=n`; `None` past `usize`.
pub fn block_schedule(k: usize, n: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|i| 1usize.checked_shl(i as u32).and_then(|p| p.checked_mul(k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub solver: SolverOptions,
    /// Base of the logarithm in the routing threshold `s log(d/s)`.
    pub log_base: LogBase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandPath {
    Dense,
    Sparse,
    Empty,
    /// `K_i` exceeded the sample size; the band estimate is zero.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    /// 1-based.
    pub band: usize,
    pub dim: usize,
    pub k: Option<usize>,
    pub path: BandPath,
    /// `s log(d/s)`; the dense path is taken iff `dim < routing_threshold`.
    pub routing_threshold: f64,
    /// Band estimate in ambient coordinates.
    pub estimate: DVector<f64>,
    pub objective_final: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub report: EstimatorReport<DVector<f64>>,
    pub bands: Vec<BandReport>,
    pub grouping: SpectralGrouping,
    /// `sum_i exp(-K_i / 128)` over the estimated bands.
    pub failure_bound: f64,
}

fn solve_band<G: Geometry>(
    projected: &Dataset,
    k: usize,
    geom: &G,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DVector<f64>>> {
    let part = partition_blocks(projected.len(), k, seed)?;
    let means = block_means(projected, &part)?;
    let init = coordinatewise_median(&means);
    solve_on_means(&means, init, geom, seed, opts)
}

/// Band-split estimate of the mean of `data` given its covariance.
pub fn split_estimate(
    data: &Dataset,
    sigma_known: &DMatrix<f64>,
    k: usize,
    s: usize,
    seed: u64,
    opts: &SplitOptions,
) -> Result<SplitReport> {
    data.validate()?;
    let d = data.dim();
    if sigma_known.nrows() != d {
        return invalid("covariance dimension differs from the data dimension");
    }
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if s == 0 || s > d {
        return invalid(format!("sparsity s={s} must lie in 1..={d}"));
    }
    let grouping = spectral_grouping(sigma_known)?;
    let n = data.len();
    let threshold = s as f64 * opts.log_base.log(d as f64 / s as f64);
    let schedule = block_schedule(k, grouping.n_bands());

    let mut estimate = DVector::zeros(d);
    let mut bands = Vec::with_capacity(grouping.n_bands());
    let mut diag = Diagnostics::default();
    let mut failure_bound = 0.0;
    let (mut iterations, mut converged, mut objective) = (0, true, 0.0f64);

    for (idx, &k_i) in schedule.iter().enumerate() {
        let band = idx + 1;
        let dim = grouping.band(band).len();
        let mut record = BandReport {
            band,
            dim,
            k: k_i,
            path: BandPath::Empty,
            routing_threshold: threshold,
            estimate: DVector::zeros(d),
            objective_final: 0.0,
            iterations: 0,
            converged: true,
        };
        if dim == 0 {
            bands.push(record);
            continue;
        }
        let k_i = match k_i {
            Some(k_i) if k_i <= n => k_i,
            _ => {
                record.path = BandPath::Skipped;
                diag.warnings.push(format!(
                    "band {band} skipped: K_i = {k} * 2^{idx} exceeds N = {n}"
                ));
                bands.push(record);
                continue;
            }
        };
        let basis = grouping.band_basis(band);
        let basis_t = basis.transpose();
        let projected = data.map_points(|x| &basis_t * x);
        let (path, report) = if (dim as f64) < threshold {
            (BandPath::Dense, solve_band(&projected, k_i, &Euclidean, seed, &opts.solver)?)
        } else {
            let geom = DictionarySparse::new(basis_t.clone(), s);
            (BandPath::Sparse, solve_band(&projected, k_i, &geom, seed, &opts.solver)?)
        };
        record.path = path;
        record.estimate = &basis * &report.estimate;
        record.objective_final = report.objective_final;
        record.iterations = report.iterations;
        record.converged = report.converged;
        estimate += &record.estimate;
        failure_bound += failure_prob(k_i);
        iterations += report.iterations;
        converged &= report.converged;
        objective = objective.max(report.objective_final);
        diag.rejected_steps += report.diagnostics.rejected_steps;
        diag.degenerate_directions += report.diagnostics.degenerate_directions;
        diag.pool_size = diag.pool_size.max(report.diagnostics.pool_size);
        bands.push(record);
    }

    Ok(SplitReport {
        report: EstimatorReport {
            estimate,
            objective_final: objective,
            iterations,
            converged,
            trace: None,
            diagnostics: diag,
        },
        bands,
        grouping,
        failure_bound,
    })
}
