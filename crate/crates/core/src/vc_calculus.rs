//! Closed-form VC-dimension bounds, block-count thresholds and theoretical
//! deviation radii.
//!
//! Universal constants are never made explicit; every threshold is reported
//! with the constant set to 1 times a user multiplier and is informative only.

use std::f64::consts::{E, LOG2_E};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MomError, Result};

/// Union of `n_classes` Boolean classes of VC dimension at most `nu`:
/// `2 nu log2(e n^(1/nu)) = 2 nu log2(e) + 2 log2(n)`.
///
/// This is the value the counting argument through Sauer's lemma actually
/// yields; see [`vc_union_bound_stated`] for the shorter advertised form.
pub fn vc_union_bound(nu: f64, n_classes: usize) -> Result<f64> {
    check_union(nu, n_classes)?;
    Ok(2.0 * nu * LOG2_E + 2.0 * (n_classes as f64).log2())
}

/// The advertised form `2 nu + 2 ln(n)`. It is smaller than the counting
/// bound and is kept only for comparison.
pub fn vc_union_bound_stated(nu: f64, n_classes: usize) -> Result<f64> {
    check_union(nu, n_classes)?;
    Ok(2.0 * nu + 2.0 * (n_classes as f64).ln())
}

fn check_union(nu: f64, n_classes: usize) -> Result<()> {
    if !(nu >= 1.0) || !nu.is_finite() || n_classes == 0 {
        return invalid("union bound needs nu >= 1 and at least one class");
    }
    Ok(())
}

fn check_sparse(s: usize, d: usize) -> Result<()> {
    if s == 0 || s > d {
        return invalid(format!("sparsity s={s} must lie in 1..={d}"));
    }
    Ok(())
}

/// Half-spaces generated by s-sparse vectors over d atoms: `4 s log2(e d / s)`.
pub fn vc_sparse_bound(s: usize, d: usize) -> Result<f64> {
    check_sparse(s, d)?;
    let s = s as f64;
    Ok(4.0 * s * (E * d as f64 / s).log2())
}

/// Sign patterns of degree-`degree` polynomials in `n_vars` parameters:
/// `2 n log2(4 e nu)`.
pub fn vc_poly_bound(n_vars: usize, degree: usize) -> Result<f64> {
    if n_vars == 0 || degree == 0 {
        return invalid("polynomial bound needs n_vars >= 1 and degree >= 1");
    }
    Ok(2.0 * n_vars as f64 * (4.0 * E * degree as f64).log2())
}

/// Rank-`k_rank` symmetric d x d test matrices: `2 (d+1) k log2(12 e)`.
pub fn vc_lowrank_bound(d: usize, k_rank: usize) -> Result<f64> {
    if k_rank == 0 || k_rank > d {
        return invalid(format!("rank {k_rank} must lie in 1..={d}"));
    }
    Ok(2.0 * (d as f64 + 1.0) * k_rank as f64 * (12.0 * E).log2())
}

/// Rank-one matrices `x x^T` with s-sparse `x`: `16 s log2(e d / s)`.
pub fn vc_sparse_rank1_bound(s: usize, d: usize) -> Result<f64> {
    check_sparse(s, d)?;
    let s = s as f64;
    Ok(16.0 * s * (E * d as f64 / s).log2())
}

/// Deviation bound `exp(-K/128)`.
pub fn failure_prob(k: usize) -> f64 {
    (-(k as f64) / 128.0).exp()
}

/// Weak variance `sup_u sqrt(Var <u, Y>^2)` of a Gaussian with top eigenvalue
/// `lambda1`, which is `sqrt(2) * lambda1`.
pub fn gaussian_weak_sigma(lambda1: f64) -> f64 {
    std::f64::consts::SQRT_2 * lambda1
}

/// Covariance radius under bounded kurtosis `R`: `8 R |||Sigma||| sqrt(K/N)`.
pub fn kurtosis_radius(kurtosis_r: f64, op_norm: f64, k: usize, n: usize) -> f64 {
    8.0 * kurtosis_r * op_norm * (k as f64 / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundContext {
    MeanAnyNorm,
    SparseMean,
    Regression,
    CovSpectral,
    CovLowrank,
    Eigensplit,
}

impl BoundContext {
    pub const ALL: [BoundContext; 6] = [
        Self::MeanAnyNorm,
        Self::SparseMean,
        Self::Regression,
        Self::CovSpectral,
        Self::CovLowrank,
        Self::Eigensplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MeanAnyNorm => "mean_any_norm",
            Self::SparseMean => "sparse_mean",
            Self::Regression => "regression",
            Self::CovSpectral => "cov_spectral",
            Self::CovLowrank => "cov_lowrank",
            Self::Eigensplit => "eigensplit",
        }
    }
}

impl fmt::Display for BoundContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundContext {
    type Err = MomError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MomError::InvalidArgument(format!("unknown bound context {s:?}")))
    }
}

/// Inputs to [`risk_radius`]. `k`, `n` and `d` are always needed; the scale
/// parameter depends on the context:
///
/// | context         | scale                         | extra        |
/// |-----------------|-------------------------------|--------------|
/// | `mean_any_norm` | `sigma_half_norm`             |              |
/// | `sparse_mean`   | `lambda1`                     | `s`          |
/// | `regression`    | `weak_sigma`, `gamma`         | `s` optional |
/// | `cov_spectral`  | `weak_sigma`                  |              |
/// | `cov_lowrank`   | `weak_sigma`                  | `rank`       |
/// | `eigensplit`    | `lambda1`                     | `s`, `band_dims` optional |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub s: Option<usize>,
    pub rank: Option<usize>,
    /// `|O|`, the number of corrupted samples.
    pub corrupted: usize,
    /// `|||Sigma^{1/2}|||` for the norm in use.
    pub sigma_half_norm: Option<f64>,
    pub lambda1: Option<f64>,
    pub weak_sigma: Option<f64>,
    pub gamma: Option<f64>,
    /// Eigenvalue band dimensions; a single band of size `d` when absent.
    pub band_dims: Option<Vec<usize>>,
    /// Stand-in for the universal constant in block-count thresholds.
    pub multiplier: f64,
}

impl BoundParams {
    pub fn new(k: usize, n: usize, d: usize) -> Self {
        Self {
            k,
            n,
            d,
            s: None,
            rank: None,
            corrupted: 0,
            sigma_half_norm: None,
            lambda1: None,
            weak_sigma: None,
            gamma: None,
            band_dims: None,
            multiplier: 1.0,
        }
    }
}

/// VC bound, block threshold and radius for one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSheet {
    pub context: BoundContext,
    pub vc_bound: f64,
    /// `multiplier * max(complexity, |O|)`.
    pub k_threshold: f64,
    pub risk_radius: f64,
    pub failure_prob: f64,
}

fn need(value: Option<f64>, name: &str, ctx: BoundContext) -> Result<f64> {
    match value {
        Some(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Some(v) => invalid(format!("{ctx}: parameter {name}={v} must be finite and >= 0")),
        None => invalid(format!("{ctx}: missing parameter {name}")),
    }
}

fn need_count(value: Option<usize>, name: &str, ctx: BoundContext) -> Result<usize> {
    value.ok_or_else(|| MomError::InvalidArgument(format!("{ctx}: missing parameter {name}")))
}

/// Natural-log routing threshold `s ln(d/s)` of the sparse bounds.
pub fn sparse_complexity(s: usize, d: usize) -> f64 {
    s as f64 * (d as f64 / s as f64).ln()
}

/// `sum_i 2^{-i} min(d_i, s ln(d/s))` over bands `i = 1, 2, ...`.
pub fn eigensplit_complexity(band_dims: &[usize], s: usize, d: usize) -> f64 {
    let cap = sparse_complexity(s, d);
    band_dims
        .iter()
        .enumerate()
        .map(|(i, &di)| (di as f64).min(cap) * 0.5f64.powi(i as i32 + 1))
        .sum()
}

pub fn risk_radius(context: BoundContext, p: &BoundParams) -> Result<BoundSheet> {
    if p.k == 0 || p.n == 0 || p.d == 0 {
        return invalid(format!("{context}: k, n and d must be positive"));
    }
    if !(p.multiplier.is_finite() && p.multiplier >= 0.0) {
        return invalid("threshold multiplier must be finite and >= 0");
    }
    let ratio = (p.k as f64 / p.n as f64).sqrt();
    let d = p.d;
    let (vc_bound, complexity, radius) = match context {
        BoundContext::MeanAnyNorm => {
            let scale = need(p.sigma_half_norm, "sigma_half_norm", context)?;
            let vc = (d + 1) as f64;
            (vc, vc, 8.0 * scale * ratio)
        }
        BoundContext::SparseMean => {
            let lambda1 = need(p.lambda1, "lambda1", context)?;
            let s = need_count(p.s, "s", context)?;
            let vc = vc_sparse_bound((2 * s).min(d), d)?;
            (vc, sparse_complexity(s, d), 8.0 * (lambda1).sqrt() * ratio)
        }
        BoundContext::Regression => {
            let sigma = need(p.weak_sigma, "weak_sigma", context)?;
            let gamma = need(p.gamma, "gamma", context)?;
            if !(gamma > 0.0 && gamma <= 1.0) {
                return invalid("regression: gamma must lie in (0, 1]");
            }
            let vc = match p.s {
                Some(s) => vc_sparse_bound((2 * s).min(d), d)?,
                None => (d + 1) as f64,
            };
            // Square root of the excess-risk bound 128 sigma^2 K / (N gamma^4).
            (vc, vc, 128f64.sqrt() * sigma * ratio / (gamma * gamma))
        }
        BoundContext::CovSpectral => {
            let sigma = need(p.weak_sigma, "weak_sigma", context)?;
            (vc_lowrank_bound(d, 1)?, d as f64, 8.0 * sigma * ratio)
        }
        BoundContext::CovLowrank => {
            let sigma = need(p.weak_sigma, "weak_sigma", context)?;
            let r = need_count(p.rank, "rank", context)?;
            if r == 0 || r > d {
                return invalid(format!("cov_lowrank: rank {r} must lie in 1..={d}"));
            }
            let vc = vc_lowrank_bound(d, (2 * r).min(d))?;
            (vc, (d * r) as f64, 8.0 * sigma * ratio)
        }
        BoundContext::Eigensplit => {
            let lambda1 = need(p.lambda1, "lambda1", context)?;
            let s = need_count(p.s, "s", context)?;
            check_sparse(s, d)?;
            let dims = p.band_dims.clone().unwrap_or_else(|| vec![d]);
            if dims.iter().sum::<usize>() != d {
                return invalid("eigensplit: band dimensions must sum to d");
            }
            let vc = vc_sparse_bound(s, d)?;
            let complexity = eigensplit_complexity(&dims, s, d);
            (vc, complexity, 8.0 * (d as f64).ln() * lambda1.sqrt() * ratio)
        }
    };
    Ok(BoundSheet {
        context,
        vc_bound,
        k_threshold: p.multiplier * complexity.max(p.corrupted as f64),
        risk_radius: radius,
        failure_prob: failure_prob(p.k),
    })
}
