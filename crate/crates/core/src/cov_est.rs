//! Median-of-means covariance estimators for centered data.
//!
//! Both solvers work on the block second moments `C_k = (1/m) sum X_i X_i^T`
//! and drive `max_P |Med_k <C_k - M, P>_F|` down over a finite probe pool.
//! Spectral probes are rank-one `u u^T` with `u` a unit vector, so the value is
//! `Med_k u^T (C_k - M) u`. Low-rank probes are unit-Frobenius symmetric
//! matrices of rank at most `2r`, and every iterate is truncated to rank `r`.
//! The update is `M += theta v* P*`, accepted only if the pool objective drops.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data_lab::derive_seed;
use crate::error::{invalid, Result};
use crate::linalg::{frob_dot, random_unit, sorted_eigen, symmetrize, truncate_rank};
use crate::mean_est::{Diagnostics, EstimatorReport, SolverOptions, DIRECTION_STREAM};
use crate::mom_core::{check_partition, median, median_in_place, partition_blocks, BlockPartition, Dataset};

/// Iterate of the covariance solvers. Spectral probes are stored as `u u^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovState {
    pub current_m: DMatrix<f64>,
    pub probe: DMatrix<f64>,
    pub objective: f64,
}

/// `C_k = (1/m) sum_{i in B_k} X_i X_i^T`; the mean is taken to be zero.
pub fn block_second_moments(data: &Dataset, part: &BlockPartition) -> Result<Vec<DMatrix<f64>>> {
    check_partition(data, part)?;
    let d = data.dim();
    let inv_m = 1.0 / part.m as f64;
    Ok(part
        .blocks
        .iter()
        .map(|b| {
            let mut c = DMatrix::zeros(d, d);
            for &i in b {
                c.ger(inv_m, &data.points[i], &data.points[i], 1.0);
            }
            symmetrize(&mut c);
            c
        })
        .collect())
}

/// Entrywise median of symmetric matrices (symmetric again).
pub fn elementwise_median(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = mats[0].shape();
    let mut buf = Vec::with_capacity(mats.len());
    DMatrix::from_fn(r, c, |i, j| {
        buf.clear();
        buf.extend(mats.iter().map(|m| m[(i, j)]));
        median_in_place(&mut buf)
    })
}

#[derive(Clone, Copy)]
enum Mode {
    Spectral,
    LowRank(usize),
}

fn rank_one(u: &DVector<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

fn unit_frobenius(mut p: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = p.norm();
    if n > 0.0 && n.is_finite() {
        p /= n;
        Some(p)
    } else {
        None
    }
}

fn value(diffs: &[DMatrix<f64>], p: &DMatrix<f64>, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(diffs.iter().map(|dk| frob_dot(dk, p)));
    median_in_place(scratch)
}

fn best_probe(diffs: &[DMatrix<f64>], pool: &[DMatrix<f64>], scratch: &mut Vec<f64>) -> (f64, DMatrix<f64>) {
    let mut best = (f64::NEG_INFINITY, 0usize, 1.0);
    for (idx, p) in pool.iter().enumerate() {
        let v = value(diffs, p, scratch);
        if v.abs() > best.0 {
            best = (v.abs(), idx, if v < 0.0 { -1.0 } else { 1.0 });
        }
    }
    (best.0, &pool[best.1] * best.2)
}

fn probes(
    mode: Mode,
    diffs: &[DMatrix<f64>],
    memory: Option<&DMatrix<f64>>,
    n_random: usize,
    rng: &mut ChaCha8Rng,
    diag: &mut Diagnostics,
) -> Vec<DMatrix<f64>> {
    let d = diffs[0].nrows();
    let mut pool = Vec::new();
    match mode {
        Mode::Spectral => {
            let mut mean = DMatrix::zeros(d, d);
            for dk in diffs {
                mean += dk;
            }
            mean /= diffs.len() as f64;
            for target in [mean, elementwise_median(diffs)] {
                let (_, vecs) = sorted_eigen(&target);
                pool.push(rank_one(&vecs.column(0).into_owned()));
                pool.push(rank_one(&vecs.column(d - 1).into_owned()));
            }
        }
        Mode::LowRank(r) => {
            for dk in diffs {
                match unit_frobenius(truncate_rank(dk, (2 * r).min(d))) {
                    Some(p) => pool.push(p),
                    None => diag.degenerate_directions += 1,
                }
            }
        }
    }
    for _ in 0..n_random {
        pool.push(rank_one(&random_unit(rng, d)));
    }
    if let Some(p) = memory {
        pool.push(p.clone());
    }
    diag.pool_size = pool.len();
    pool
}

fn solve(
    moments: &[DMatrix<f64>],
    mode: Mode,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DMatrix<f64>>> {
    if !(opts.step > 0.0) || !(opts.min_step > 0.0) || !(opts.rtol >= 0.0) {
        return invalid("solver step, min_step and rtol must be positive");
    }
    let project = |mut m: DMatrix<f64>| {
        symmetrize(&mut m);
        match mode {
            Mode::LowRank(r) => truncate_rank(&m, r),
            Mode::Spectral => m,
        }
    };
    let differences = |m: &DMatrix<f64>| moments.iter().map(|c| c - m).collect::<Vec<_>>();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, DIRECTION_STREAM));
    let mut diag = Diagnostics::default();
    let mut scratch = Vec::with_capacity(moments.len());

    let m0 = project(elementwise_median(moments));
    let diffs = differences(&m0);
    let tol = opts.rtol * median(&diffs.iter().map(|dk| dk.norm()).collect::<Vec<_>>())?;
    let pool = probes(mode, &diffs, None, opts.n_random, &mut rng, &mut diag);
    let (objective, probe) = best_probe(&diffs, &pool, &mut scratch);
    let mut state = CovState {
        current_m: m0,
        probe,
        objective,
    };
    let mut trace = vec![state.objective];
    let mut converged = state.objective <= tol;
    let mut theta = opts.step;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let candidate = project(&state.current_m + &state.probe * (theta * state.objective));
        let diffs = differences(&candidate);
        let memory = opts.use_memory.then_some(&state.probe);
        let pool = probes(mode, &diffs, memory, opts.n_random, &mut rng, &mut diag);
        let (v, p) = best_probe(&diffs, &pool, &mut scratch);
        if v < state.objective {
            state = CovState {
                current_m: candidate,
                probe: p,
                objective: v,
            };
            theta = opts.step;
            trace.push(v);
            converged = v <= tol;
        } else {
            diag.rejected_steps += 1;
            theta *= 0.5;
            if theta < opts.min_step {
                converged = true;
            }
        }
    }

    Ok(EstimatorReport {
        estimate: state.current_m,
        objective_final: state.objective,
        iterations,
        converged,
        trace: opts.record_trace.then_some(trace),
        diagnostics: diag,
    })
}

/// Spectral-norm estimator. Starts at the entrywise median of the block
/// second moments, which is already the answer when `k = 1`.
pub fn mom_cov_spectral(
    data: &Dataset,
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DMatrix<f64>>> {
    let part = partition_blocks(data.len(), k, seed)?;
    let moments = block_second_moments(data, &part)?;
    solve(&moments, Mode::Spectral, seed, opts)
}

/// Rank-`r` estimator in Frobenius norm.
pub fn mom_cov_lowrank(
    data: &Dataset,
    k: usize,
    r: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DMatrix<f64>>> {
    let d = data.dim();
    if r == 0 || r > d {
        return invalid(format!("rank r={r} must lie in 1..={d}"));
    }
    let part = partition_blocks(data.len(), k, seed)?;
    let moments = block_second_moments(data, &part)?;
    solve(&moments, Mode::LowRank(r), seed, opts)
}

/// Centers with the Euclidean median-of-means estimate before a covariance
/// call. Not covered by the zero-mean guarantees.
pub fn precenter(data: &Dataset, k: usize, seed: u64, opts: &SolverOptions) -> Result<Dataset> {
    let mu = crate::mean_est::mom_mean_euclidean(data, k, seed, opts)?.estimate;
    Ok(data.map_points(|x| x - &mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;

    fn wavy(n: usize, d: usize) -> Dataset {
        let points = (0..n)
            .map(|i| DVector::from_iterator(d, (0..d).map(|j| ((i * (j + 3)) as f64 * 0.37).sin() * (j + 1) as f64)))
            .collect();
        Dataset::new(points, None).unwrap()
    }

    #[test]
    fn constant_points_give_outer_product() {
        let data = Dataset::new(vec![DVector::from_vec(vec![1.0, 0.0, 0.0]); 9], None).unwrap();
        let part = partition_blocks(9, 3, 0).unwrap();
        let e = DMatrix::from_fn(3, 3, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        for c in block_second_moments(&data, &part).unwrap() {
            assert_eq!(c, e);
        }
    }

    #[test]
    fn hand_block_of_two() {
        let data = Dataset::new(
            vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, -1.0])],
            None,
        )
        .unwrap();
        let part = BlockPartition::contiguous(2, 1).unwrap();
        let c = &block_second_moments(&data, &part).unwrap()[0];
        assert_eq!(*c, DMatrix::from_row_slice(2, 2, &[5.0, -0.5, -0.5, 2.5]));
    }

    #[test]
    fn single_block_fixed_point() {
        let data = wavy(40, 4);
        let part = partition_blocks(40, 1, 5).unwrap();
        let c = block_second_moments(&data, &part).unwrap().remove(0);
        let s = mom_cov_spectral(&data, 1, 5, &SolverOptions::default()).unwrap();
        assert!((&s.estimate - &c).abs().max() < 1e-9);
        assert_eq!(s.objective_final, 0.0);
        let l = mom_cov_lowrank(&data, 1, 4, 5, &SolverOptions::default()).unwrap();
        assert!((&l.estimate - &c).abs().max() < 1e-9);
    }

    #[test]
    fn outputs_are_symmetric_and_low_rank() {
        let data = wavy(300, 5);
        let s = mom_cov_spectral(&data, 15, 1, &SolverOptions::default()).unwrap();
        assert_eq!(s.estimate, s.estimate.transpose());
        for r in 1..=3 {
            let l = mom_cov_lowrank(&data, 15, r, 1, &SolverOptions::default()).unwrap();
            assert_eq!(l.estimate, l.estimate.transpose());
            assert!(numerical_rank(&l.estimate, 1e-10) <= r);
            let t = l.trace.unwrap();
            assert!(t.windows(2).all(|w| w[1] < w[0]));
        }
        assert!(mom_cov_lowrank(&data, 15, 6, 1, &SolverOptions::default()).is_err());
    }
}
