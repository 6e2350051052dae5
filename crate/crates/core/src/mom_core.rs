//! Block partitions, block means and the order statistics shared by every
//! median-of-means estimator in the crate.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Seeded split of `n_total` sample indices into `k` disjoint blocks of size
/// `m = n_total / k`. The `n_total - k * m` leftover indices are unused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub n_total: usize,
    pub k: usize,
    pub m: usize,
    pub blocks: Vec<Vec<usize>>,
    pub seed: u64,
}

impl BlockPartition {
    /// Blocks taken as contiguous chunks of `0..n` without shuffling.
    pub fn contiguous(n: usize, k: usize) -> Result<Self> {
        check_sizes(n, k)?;
        let order: Vec<usize> = (0..n).collect();
        Ok(Self::from_order(n, k, &order, 0))
    }

    /// Builds a partition from explicit blocks, which must be disjoint, of equal
    /// nonzero length and index into `0..n`.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let k = blocks.len();
        check_sizes(n, k)?;
        let m = blocks[0].len();
        if m == 0 || blocks.iter().any(|b| b.len() != m) {
            return invalid("blocks must share one nonzero length");
        }
        let mut seen = HashSet::with_capacity(k * m);
        for &i in blocks.iter().flatten() {
            if i >= n || !seen.insert(i) {
                return invalid(format!("block index {i} out of range or repeated"));
            }
        }
        Ok(Self {
            n_total: n,
            k,
            m,
            blocks,
            seed: 0,
        })
    }

    fn from_order(n: usize, k: usize, order: &[usize], seed: u64) -> Self {
        let m = n / k;
        let blocks = order[..k * m].chunks(m).map(<[usize]>::to_vec).collect();
        Self {
            n_total: n,
            k,
            m,
            blocks,
            seed,
        }
    }

    /// Indices that belong to no block.
    pub fn unused(&self) -> Vec<usize> {
        let used: HashSet<usize> = self.blocks.iter().flatten().copied().collect();
        (0..self.n_total).filter(|i| !used.contains(i)).collect()
    }

    /// Number of blocks containing none of the `corrupted` indices.
    pub fn clean_blocks(&self, corrupted: &[usize]) -> usize {
        let bad: HashSet<usize> = corrupted.iter().copied().collect();
        self.blocks
            .iter()
            .filter(|b| b.iter().all(|i| !bad.contains(i)))
            .count()
    }
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return invalid(format!("block count k={k} must lie in 1..={n}"));
    }
    Ok(())
}

/// Seeded Fisher-Yates shuffle of `0..n` cut into `k` contiguous chunks; the
/// tail of the shuffle is discarded when `k` does not divide `n`.
pub fn partition_blocks(n: usize, k: usize, seed: u64) -> Result<BlockPartition> {
    check_sizes(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    Ok(BlockPartition::from_order(n, k, &order, seed))
}

/// Ground truth attached to synthetic data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub mean: Option<DVector<f64>>,
    pub covariance: Option<DMatrix<f64>>,
    pub beta_star: Option<DVector<f64>>,
    /// Indices rewritten by the adversary (the set O).
    pub corrupted: Vec<usize>,
    pub epsilon: f64,
    /// Maximum allowed `|O|`; `floor(epsilon * n)` for adversarial models and the
    /// realised count for Huber contamination.
    pub corruption_budget: usize,
    pub noise_variance: Option<f64>,
    /// Small-ball constant of the design when it is known analytically.
    pub small_ball: Option<f64>,
}

impl Truth {
    /// `E[Y Y^T] = Sigma + mu mu^T`, the matrix that weights regression excess risk.
    pub fn second_moment(&self) -> Option<DMatrix<f64>> {
        let cov = self.covariance.as_ref()?;
        Some(match &self.mean {
            Some(mu) => cov + mu * mu.transpose(),
            None => cov.clone(),
        })
    }
}

/// N observations in R^d, optional scalar responses and optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<DVector<f64>>,
    pub responses: Option<Vec<f64>>,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn new(points: Vec<DVector<f64>>, responses: Option<Vec<f64>>) -> Result<Self> {
        let data = Self {
            points,
            responses,
            truth: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn from_scalars(values: &[f64]) -> Self {
        Self {
            points: values.iter().map(|&v| DVector::from_element(1, v)).collect(),
            responses: None,
            truth: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return invalid("dataset has no points");
        }
        let d = self.dim();
        if d == 0 || self.points.iter().any(|p| p.len() != d) {
            return invalid("points must share one nonzero dimension");
        }
        if let Some(r) = &self.responses {
            if r.len() != self.points.len() {
                return invalid("response count differs from point count");
            }
        }
        if let Some(t) = &self.truth {
            if t.corrupted.len() > t.corruption_budget {
                return invalid(format!(
                    "|O| = {} exceeds the corruption budget {}",
                    t.corrupted.len(),
                    t.corruption_budget
                ));
            }
        }
        Ok(())
    }

    /// Copy with `f` applied to every point; responses and truth are kept.
    pub fn map_points(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            responses: self.responses.clone(),
            truth: self.truth.clone(),
        }
    }

    pub fn empirical_mean(&self) -> DVector<f64> {
        let mut sum = DVector::zeros(self.dim());
        for p in &self.points {
            sum += p;
        }
        sum / self.len() as f64
    }

    /// Centered sample covariance with divisor N.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let mean = self.empirical_mean();
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for p in &self.points {
            let c = p - &mean;
            acc.ger(1.0, &c, &c, 1.0);
        }
        acc / self.len() as f64
    }

    /// Uncentered second-moment matrix (1/N) sum x x^T.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for p in &self.points {
            acc.ger(1.0, p, p, 1.0);
        }
        acc / self.len() as f64
    }
}

pub(crate) fn check_partition(data: &Dataset, part: &BlockPartition) -> Result<()> {
    if part.n_total != data.len() {
        return invalid(format!(
            "partition covers {} samples but dataset has {}",
            part.n_total,
            data.len()
        ));
    }
    Ok(())
}

/// Per-block empirical means `(1/m) * sum_{i in B_k} X_i`.
pub fn block_means(data: &Dataset, part: &BlockPartition) -> Result<Vec<DVector<f64>>> {
    data.validate()?;
    check_partition(data, part)?;
    let d = data.dim();
    let m = part.m as f64;
    Ok(part
        .blocks
        .iter()
        .map(|block| {
            let mut sum = DVector::zeros(d);
            for &i in block {
                sum += &data.points[i];
            }
            sum / m
        })
        .collect())
}

/// Block means of a scalar sample.
pub fn block_means_1d(values: &[f64], part: &BlockPartition) -> Result<Vec<f64>> {
    if part.n_total != values.len() {
        return invalid("partition size differs from sample size");
    }
    let m = part.m as f64;
    Ok(part
        .blocks
        .iter()
        .map(|b| b.iter().map(|&i| values[i]).sum::<f64>() / m)
        .collect())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median with the midpoint convention for even lengths, so that
/// `median(-x) == -median(x)` holds exactly.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return invalid("median of an empty list");
    }
    Ok(median_sorted(&sorted(values)))
}

pub(crate) fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of a nonempty scratch buffer, reordering it in place. Same value as
/// [`median_sorted`] on the sorted buffer, in linear time.
pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let (lower, hi, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = lower.iter().copied().max_by(f64::total_cmp).expect("n >= 2");
        0.5 * (lo + hi)
    }
}

/// First quartile of a scratch buffer with at least 4 values, reordering it.
pub(crate) fn quartile_in_place(v: &mut [f64]) -> f64 {
    let idx = v.len() / 4 - 1;
    *v.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// The `floor(n/4)`-th smallest value (1-based).
pub fn quantile_q14(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return invalid(format!(
            "first quartile needs at least 4 values, got {}",
            values.len()
        ));
    }
    Ok(quartile_sorted(&sorted(values)))
}

pub(crate) fn quartile_sorted(v: &[f64]) -> f64 {
    v[v.len() / 4 - 1]
}

/// Median of the block means of a seeded partition.
pub fn mom_mean_1d(values: &[f64], k: usize, seed: u64) -> Result<f64> {
    let part = partition_blocks(values.len(), k, seed)?;
    median(&block_means_1d(values, &part)?)
}
