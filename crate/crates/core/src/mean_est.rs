//! Median-of-means min-max mean estimators.
//!
//! All three estimators target
//!
//! ```text
//! argmin_a  max_{u in D}  Med_k <Xbar_k - a, u>
//! ```
//!
//! over a dual direction set `D`: `{+-e_i}` for the sup norm (solved exactly by
//! the coordinatewise median), the Euclidean unit sphere, or unit vectors with
//! at most `2s` nonzeros (sparse means, with `a` restricted to `s` nonzeros).
//!
//! The Euclidean and sparse problems are not computable exactly. They are
//! solved by a damped fixed-point iteration over a finite direction pool: at
//! `a_t` the pool holds the normalized block residuals `Xbar_k - a_t`, fresh
//! random directions and the previous maximizer; with `u*` the pool maximizer
//! and `v*` its value, the candidate is `a_t + theta v* u*`. A candidate is
//! accepted only if it lowers the pool objective, otherwise `theta` is halved.
//! In dimension one the pool collapses to `{+1, -1}` and the first step lands
//! on the median of block means, so the iteration reproduces the univariate
//! estimator.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_lab::derive_seed;
use crate::error::{invalid, Result};
use crate::linalg::{hard_threshold, random_unit, top_indices};
use crate::mom_core::{block_means, median, median_in_place, partition_blocks, Dataset};

/// Seed stream reserved for the random part of direction pools.
pub(crate) const DIRECTION_STREAM: u64 = 0xD1EC;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Convergence when the objective falls below `rtol * scale`, where
    /// `scale` is the median block-residual norm at the starting point.
    pub rtol: f64,
    /// Initial damping `theta`; restored after every accepted step.
    pub step: f64,
    /// Stop once repeated halving pushes `theta` below this.
    pub min_step: f64,
    /// Random directions added to every pool.
    pub n_random: usize,
    /// Keep the previous maximizer in the next pool.
    pub use_memory: bool,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            rtol: 1e-8,
            step: 1.0,
            min_step: 1e-6,
            n_random: 32,
            use_memory: true,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rejected_steps: usize,
    /// Candidate directions dropped because they were degenerate (zero after
    /// thresholding, or zero quartile energy in regression).
    pub degenerate_directions: usize,
    /// Directions evaluated per iteration, last iteration.
    pub pool_size: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport<T> {
    pub estimate: T,
    pub objective_final: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iteration, starting point first.
    pub trace: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

/// Iterate of the min-max solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxState {
    pub current_a: DVector<f64>,
    pub best_direction: DVector<f64>,
    /// Pool maximum of `Med_k <Xbar_k - a, u>` at `current_a`.
    pub objective: f64,
    pub iteration: usize,
    pub step: f64,
}

/// Maps raw candidate directions into the dual set and estimates into the
/// model set.
pub(crate) trait Geometry {
    fn direction(&self, w: &DVector<f64>) -> Option<DVector<f64>>;
    fn project(&self, a: DVector<f64>) -> DVector<f64>;
}

fn normalized(w: DVector<f64>) -> Option<DVector<f64>> {
    let n = w.norm();
    (n > 0.0 && n.is_finite()).then(|| w / n)
}

pub(crate) struct Euclidean;

impl Geometry for Euclidean {
    fn direction(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        normalized(w.clone())
    }

    fn project(&self, a: DVector<f64>) -> DVector<f64> {
        a
    }
}

/// Canonical-basis sparsity: directions keep `2s` coordinates, estimates `s`.
pub(crate) struct CanonicalSparse {
    pub s: usize,
}

impl Geometry for CanonicalSparse {
    fn direction(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        normalized(hard_threshold(w, 2 * self.s))
    }

    fn project(&self, a: DVector<f64>) -> DVector<f64> {
        hard_threshold(&a, self.s)
    }
}

/// `Med_k <Xbar_k - a, u>` using `scratch` as the median buffer.
fn median_value(means: &[DVector<f64>], a: &DVector<f64>, u: &DVector<f64>, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    // Coordinatewise so that flipping u flips every value exactly.
    scratch.extend(means.iter().map(|m| {
        let mut acc = 0.0;
        for j in 0..m.len() {
            acc += (m[j] - a[j]) * u[j];
        }
        acc
    }));
    median_in_place(scratch)
}

/// Max over the supplied directions of `Med_k <Xbar_k - a, u>`.
pub fn minimax_objective(
    a: &DVector<f64>,
    directions: &[DVector<f64>],
    block_means: &[DVector<f64>],
) -> Result<f64> {
    if directions.is_empty() {
        return invalid("direction list is empty");
    }
    if block_means.is_empty() {
        return invalid("no block means");
    }
    let d = a.len();
    if directions.iter().chain(block_means).any(|v| v.len() != d) {
        return invalid("dimension mismatch between a, directions and block means");
    }
    let mut scratch = Vec::with_capacity(block_means.len());
    Ok(directions
        .iter()
        .map(|u| median_value(block_means, a, u, &mut scratch))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Coordinatewise median of a set of vectors.
pub fn coordinatewise_median(vectors: &[DVector<f64>]) -> DVector<f64> {
    let d = vectors[0].len();
    let mut col = Vec::with_capacity(vectors.len());
    DVector::from_iterator(
        d,
        (0..d).map(|j| {
            col.clear();
            col.extend(vectors.iter().map(|v| v[j]));
            median_in_place(&mut col)
        }),
    )
}

/// Extreme points `+-e_i` of the l1 ball, dual to the sup norm.
pub fn signed_basis(d: usize) -> Vec<DVector<f64>> {
    (0..d)
        .flat_map(|i| {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            [e.clone(), -e]
        })
        .collect()
}

/// Exact sup-norm estimator: the coordinatewise median of block means. The
/// dual extreme points are `+-e_i`, for which the midpoint median makes every
/// coordinate objective vanish.
pub fn mom_mean_supnorm(data: &Dataset, k: usize, seed: u64) -> Result<EstimatorReport<DVector<f64>>> {
    let part = partition_blocks(data.len(), k, seed)?;
    let means = block_means(data, &part)?;
    let estimate = coordinatewise_median(&means);
    // Zero in exact arithmetic; evaluating it in floats only measures rounding.
    let objective = 0.0;
    Ok(EstimatorReport {
        estimate,
        objective_final: objective,
        iterations: 1,
        converged: true,
        trace: Some(vec![objective]),
        diagnostics: Diagnostics {
            pool_size: 2 * data.dim(),
            ..Diagnostics::default()
        },
    })
}

/// Best absolute median over the pool, sign folded into the direction.
fn pool_max(
    means: &[DVector<f64>],
    a: &DVector<f64>,
    pool: &[DVector<f64>],
    scratch: &mut Vec<f64>,
) -> (f64, DVector<f64>) {
    let mut best = (f64::NEG_INFINITY, 0usize, 1.0);
    for (idx, u) in pool.iter().enumerate() {
        let v = median_value(means, a, u, scratch);
        if v.abs() > best.0 {
            best = (v.abs(), idx, if v < 0.0 { -1.0 } else { 1.0 });
        }
    }
    (best.0, &pool[best.1] * best.2)
}

fn build_pool<G: Geometry>(
    geom: &G,
    means: &[DVector<f64>],
    a: &DVector<f64>,
    memory: Option<&DVector<f64>>,
    n_random: usize,
    rng: &mut ChaCha8Rng,
    diag: &mut Diagnostics,
) -> Vec<DVector<f64>> {
    let d = a.len();
    let mut pool = Vec::with_capacity(means.len() + n_random + 1);
    for m in means {
        match geom.direction(&(m - a)) {
            Some(u) => pool.push(u),
            None => diag.degenerate_directions += 1,
        }
    }
    for _ in 0..n_random {
        if let Some(u) = geom.direction(&random_unit(rng, d)) {
            pool.push(u);
        }
    }
    if let Some(u) = memory {
        pool.push(u.clone());
    }
    if pool.is_empty() {
        // All residuals vanished: any unit vector certifies a zero objective.
        let mut e = DVector::zeros(d);
        e[0] = 1.0;
        pool.push(e);
    }
    diag.pool_size = pool.len();
    pool
}

/// Damped fixed-point min-max iteration over precomputed block means.
pub(crate) fn solve_on_means<G: Geometry>(
    means: &[DVector<f64>],
    init: DVector<f64>,
    geom: &G,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DVector<f64>>> {
    if !(opts.step > 0.0) || !(opts.min_step > 0.0) || !(opts.rtol >= 0.0) {
        return invalid("solver step, min_step and rtol must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, DIRECTION_STREAM));
    let mut diag = Diagnostics::default();
    let mut scratch = Vec::with_capacity(means.len());

    let a0 = geom.project(init);
    let spreads: Vec<f64> = means.iter().map(|m| (m - &a0).norm()).collect();
    let tol = opts.rtol * median(&spreads)?;

    let pool = build_pool(geom, means, &a0, None, opts.n_random, &mut rng, &mut diag);
    let (objective, best_direction) = pool_max(means, &a0, &pool, &mut scratch);
    let mut state = MinimaxState {
        current_a: a0,
        best_direction,
        objective,
        iteration: 0,
        step: opts.step,
    };
    let mut trace = vec![state.objective];
    let mut converged = state.objective <= tol;

    while !converged && state.iteration < opts.max_iter {
        state.iteration += 1;
        let candidate = geom.project(&state.current_a + &state.best_direction * (state.step * state.objective));
        let memory = opts.use_memory.then_some(&state.best_direction);
        let pool = build_pool(geom, means, &candidate, memory, opts.n_random, &mut rng, &mut diag);
        let (value, direction) = pool_max(means, &candidate, &pool, &mut scratch);
        if value < state.objective {
            state.current_a = candidate;
            state.objective = value;
            state.best_direction = direction;
            state.step = opts.step;
            trace.push(value);
            converged = value <= tol;
        } else {
            diag.rejected_steps += 1;
            state.step *= 0.5;
            if state.step < opts.min_step {
                converged = true;
            }
        }
    }

    Ok(EstimatorReport {
        estimate: state.current_a,
        objective_final: state.objective,
        iterations: state.iteration,
        converged,
        trace: opts.record_trace.then_some(trace),
        diagnostics: diag,
    })
}

/// Euclidean-norm estimator, started from the coordinatewise median.
pub fn mom_mean_euclidean(
    data: &Dataset,
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DVector<f64>>> {
    let part = partition_blocks(data.len(), k, seed)?;
    let means = block_means(data, &part)?;
    let init = coordinatewise_median(&means);
    solve_on_means(&means, init, &Euclidean, seed, opts)
}

/// Sparse-mean estimator over the canonical basis. The estimate has at most
/// `s` nonzero coordinates.
pub fn mom_mean_sparse(
    data: &Dataset,
    k: usize,
    s: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DVector<f64>>> {
    let d = data.dim();
    if s == 0 || s > d {
        return invalid(format!("sparsity s={s} must lie in 1..={d}"));
    }
    let part = partition_blocks(data.len(), k, seed)?;
    let means = block_means(data, &part)?;
    let init = coordinatewise_median(&means);
    solve_on_means(&means, init, &CanonicalSparse { s }, seed, opts)
}

/// Support of the `s` largest-magnitude coordinates.
pub fn support(v: &DVector<f64>, s: usize) -> Vec<usize> {
    top_indices(v, s)
}

/// Least-squares projection of `w` onto the span of at most `count` atoms
/// picked greedily (orthogonal matching pursuit). `atoms` are columns.
pub(crate) fn greedy_atom_projection(atoms: &DMatrix<f64>, norms: &[f64], w: &DVector<f64>, count: usize) -> DVector<f64> {
    let wn = w.norm();
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let mut proj = DVector::zeros(w.len());
    if wn == 0.0 {
        return proj;
    }
    let mut residual = w.clone();
    for _ in 0..count {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..atoms.ncols() {
            if norms[j] <= 1e-12 || chosen.contains(&j) {
                continue;
            }
            let score = atoms.column(j).dot(&residual).abs() / norms[j];
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, j));
            }
        }
        match best {
            Some((score, j)) if score > 1e-14 * wn => chosen.push(j),
            _ => break,
        }
        let sub = atoms.select_columns(chosen.iter());
        let coef = match (sub.transpose() * &sub).cholesky() {
            Some(chol) => chol.solve(&(sub.transpose() * w)),
            None => {
                // Dependent atom: keep the previous projection.
                chosen.pop();
                break;
            }
        };
        proj = &sub * coef;
        residual = w - &proj;
    }
    proj
}

/// Sparsity over an arbitrary dictionary (columns of `atoms`) via greedy
/// selection: directions use `2s` atoms, estimates `s` atoms.
pub(crate) struct DictionarySparse {
    pub atoms: DMatrix<f64>,
    pub norms: Vec<f64>,
    pub s: usize,
}

impl DictionarySparse {
    pub fn new(atoms: DMatrix<f64>, s: usize) -> Self {
        let norms = atoms.column_iter().map(|c| c.norm()).collect();
        Self { atoms, norms, s }
    }
}

impl Geometry for DictionarySparse {
    fn direction(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        normalized(greedy_atom_projection(&self.atoms, &self.norms, w, 2 * self.s))
    }

    fn project(&self, a: DVector<f64>) -> DVector<f64> {
        greedy_atom_projection(&self.atoms, &self.norms, &a, self.s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mom_core::mom_mean_1d;

    fn e(d: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn objective_hand_median() {
        let means: Vec<_> = [0.0, 1.0, 2.0].iter().map(|&c| e(2, 0) * c).collect();
        let dirs = vec![e(2, 0), -e(2, 0)];
        let v = minimax_objective(&DVector::zeros(2), &dirs, &means).unwrap();
        assert_eq!(v, 1.0);
        assert!(minimax_objective(&DVector::zeros(2), &[], &means).is_err());
    }

    #[test]
    fn objective_for_constant_blocks() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let means = vec![c.clone(); 5];
        let dirs = signed_basis(3);
        let expect = dirs.iter().map(|u| (&c - &a).dot(u)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(minimax_objective(&a, &dirs, &means).unwrap(), expect);
    }

    #[test]
    fn adding_directions_never_decreases() {
        let means: Vec<_> = (0..7)
            .map(|i| DVector::from_vec(vec![i as f64, (i * i) as f64 * 0.1]))
            .collect();
        let a = DVector::from_vec(vec![2.0, 1.0]);
        let mut dirs = vec![e(2, 0)];
        let mut last = minimax_objective(&a, &dirs, &means).unwrap();
        for t in 1..12 {
            let th = t as f64 * 0.5;
            dirs.push(DVector::from_vec(vec![th.cos(), th.sin()]));
            let v = minimax_objective(&a, &dirs, &means).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn euclidean_identical_blocks_converge_at_once() {
        let data = Dataset::new(vec![DVector::from_vec(vec![3.0, -1.0]); 20], None).unwrap();
        let r = mom_mean_euclidean(&data, 5, 0, &SolverOptions::default()).unwrap();
        assert_eq!(r.estimate, DVector::from_vec(vec![3.0, -1.0]));
        assert!(r.converged);
        assert!(r.iterations <= 1);
    }

    #[test]
    fn one_dimensional_reduction() {
        let values: Vec<f64> = (0..41).map(|i| ((i * 37) % 11) as f64 - 0.3 * i as f64).collect();
        let data = Dataset::from_scalars(&values);
        for k in [1, 2, 5, 8, 41] {
            let want = mom_mean_1d(&values, k, 3).unwrap();
            let sup = mom_mean_supnorm(&data, k, 3).unwrap();
            assert_eq!(sup.estimate[0], want);
            let euc = mom_mean_euclidean(&data, k, 3, &SolverOptions::default()).unwrap();
            assert!((euc.estimate[0] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_output_respects_support_size() {
        let points: Vec<_> = (0..60)
            .map(|i| DVector::from_iterator(6, (0..6).map(|j| ((i * 7 + j * 3) % 13) as f64 - 6.0 + if j == 2 { 5.0 } else { 0.0 })))
            .collect();
        let data = Dataset::new(points, None).unwrap();
        for s in 1..=6 {
            let r = mom_mean_sparse(&data, 6, s, 1, &SolverOptions::default()).unwrap();
            assert!(crate::linalg::count_nonzero(&r.estimate) <= s);
        }
        assert!(mom_mean_sparse(&data, 6, 7, 1, &SolverOptions::default()).is_err());
    }

    #[test]
    fn trace_is_monotone() {
        let points: Vec<_> = (0..200)
            .map(|i| {
                let t = i as f64;
                DVector::from_vec(vec![(t * 0.37).sin() * 3.0, (t * 1.3).cos(), (t * 0.11).sin() + 0.5 * (t * 2.9).cos()])
            })
            .collect();
        let data = Dataset::new(points, None).unwrap();
        let r = mom_mean_euclidean(&data, 20, 9, &SolverOptions::default()).unwrap();
        let trace = r.trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(*trace.last().unwrap(), r.objective_final);
    }

    #[test]
    fn greedy_projection_with_identity_atoms_is_hard_threshold() {
        let atoms = DMatrix::identity(5, 5);
        let norms = vec![1.0; 5];
        let w = DVector::from_vec(vec![0.3, -2.0, 1.1, 0.0, 1.5]);
        let p = greedy_atom_projection(&atoms, &norms, &w, 2);
        assert!((p - hard_threshold(&w, 2)).norm() < 1e-12);
    }
}
