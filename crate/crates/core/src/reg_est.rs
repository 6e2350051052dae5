//! Median-of-means regression with a quartile-normalized direction set.
//!
//! The estimator solves
//!
//! ```text
//! argmin_a  max_{u in B}  Med_k  sum_{i in B_k} (Z_i - <a, X_i>) <u, X_i>
//! ```
//!
//! where `B` holds directions whose first quartile (over blocks) of the block
//! energy `(1/m) sum <u, X_i>^2` is at most one. As for means, the max runs
//! over a finite pool: block score vectors `sum (Z_i - <a,X_i>) X_i`, random
//! directions and the previous maximizer, each rescaled onto the boundary of
//! `B`. Steps are `a += (theta / m) v* u*` with the same accept-or-halve rule.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_lab::derive_seed;
use crate::error::{invalid, MomError, Result};
use crate::linalg::{hard_threshold, quad_form, random_unit};
use crate::mean_est::{Diagnostics, EstimatorReport, SolverOptions, DIRECTION_STREAM};
use crate::mom_core::{
    check_partition, median, median_in_place, partition_blocks, quartile_in_place, quartile_sorted, BlockPartition,
    Dataset,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSet {
    Full,
    Sparse { s: usize },
}

#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub data: Dataset,
    pub model_set: ModelSet,
    /// Small-ball constant; taken from the dataset metadata when available.
    pub gamma: Option<f64>,
    /// `sup_u E(xi^2 <u, Y>^2)` when known.
    pub weak_variance: Option<f64>,
}

impl RegressionProblem {
    pub fn new(data: Dataset, model_set: ModelSet) -> Result<Self> {
        data.validate()?;
        if data.responses.is_none() {
            return invalid("regression needs a response column");
        }
        if let ModelSet::Sparse { s } = model_set {
            if s == 0 || s > data.dim() {
                return invalid(format!("sparsity s={s} must lie in 1..={}", data.dim()));
            }
        }
        let gamma = data.truth.as_ref().and_then(|t| t.small_ball);
        let weak_variance = data.truth.as_ref().and_then(|t| {
            // Independent noise: E(xi^2 <u,Y>^2) = Var(xi) on the unit E<u,Y>^2 sphere.
            t.noise_variance
        });
        Ok(Self {
            data,
            model_set,
            gamma,
            weak_variance,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return invalid(format!("small-ball constant must lie in (0, 1], got {gamma}"));
        }
        self.gamma = Some(gamma);
        Ok(self)
    }

    pub fn responses(&self) -> &[f64] {
        self.data.responses.as_deref().unwrap_or(&[])
    }

    /// Block-count warning when `K > N gamma^2 / 64`, or when `gamma` is unknown.
    pub fn block_count_warning(&self, k: usize) -> Option<String> {
        match self.gamma {
            Some(g) => {
                let cap = self.data.len() as f64 * g * g / 64.0;
                (k as f64 > cap).then(|| format!("K={k} exceeds N*gamma^2/64 = {cap:.3}"))
            }
            None => Some("small-ball constant unknown; K <= N*gamma^2/64 not checked".into()),
        }
    }
}

/// Design rows regrouped block after block, so block sums over `X u` are sums
/// over consecutive runs of length `m`.
struct BlockDesign {
    x: DMatrix<f64>,
    z: DVector<f64>,
    k: usize,
    m: usize,
}

impl BlockDesign {
    fn new(points: &[DVector<f64>], responses: &[f64], part: &BlockPartition) -> Self {
        let order: Vec<usize> = part.blocks.iter().flatten().copied().collect();
        let d = points[0].len();
        Self {
            x: DMatrix::from_fn(order.len(), d, |r, c| points[order[r]][c]),
            z: DVector::from_iterator(order.len(), order.iter().map(|&i| responses[i])),
            k: part.k,
            m: part.m,
        }
    }

    fn residuals(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.z - &self.x * a
    }

    /// Raw block scores `sum_{i in B_k} r_i X_i`.
    fn scores(&self, r: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.k)
            .map(|b| {
                let rows = self.x.rows(b * self.m, self.m);
                rows.tr_mul(&r.rows(b * self.m, self.m))
            })
            .collect()
    }

    /// Per-block `sum r_i p_i` into `vals` and the block energies
    /// `(1/m) sum p_i^2` into `energy`, for a projection `p = X u`.
    fn block_sums(&self, p: &[f64], r: &DVector<f64>, vals: &mut Vec<f64>, energy: Option<&mut Vec<f64>>) {
        let m = self.m;
        let r = r.as_slice();
        vals.clear();
        vals.extend((0..self.k).map(|b| {
            let span = b * m..(b + 1) * m;
            p[span.clone()].iter().zip(&r[span]).map(|(x, y)| x * y).sum::<f64>()
        }));
        if let Some(e) = energy {
            let inv_m = 1.0 / m as f64;
            e.clear();
            e.extend((0..self.k).map(|b| p[b * m..(b + 1) * m].iter().map(|x| x * x).sum::<f64>() * inv_m));
        }
    }

    /// Quartile-normalized directions with their signed median block scores.
    /// Directions are projected through the design in batches.
    fn evaluate(&self, ws: &[DVector<f64>], r: &DVector<f64>) -> Vec<Result<(DVector<f64>, f64)>> {
        const BATCH: usize = 64;
        let mut vals = Vec::with_capacity(self.k);
        let mut energy = Vec::with_capacity(self.k);
        let mut out = Vec::with_capacity(ws.len());
        for chunk in ws.chunks(BATCH) {
            let proj = &self.x * DMatrix::from_columns(chunk);
            for (j, w) in chunk.iter().enumerate() {
                self.block_sums(proj.column(j).as_slice(), r, &mut vals, Some(&mut energy));
                let q = quartile_in_place(&mut energy);
                out.push(normalize_by_quartile(w, q).map(|u| {
                    let c = 1.0 / q.sqrt();
                    vals.iter_mut().for_each(|v| *v *= c);
                    (u, median_in_place(&mut vals))
                }));
            }
        }
        out
    }
}

fn normalize_by_quartile(w: &DVector<f64>, q: f64) -> Result<DVector<f64>> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(MomError::DegenerateDirection);
    }
    Ok(w / q.sqrt())
}

/// Rescales `w` onto the boundary of the quartile-normalized set:
/// `w / sqrt(Q_{1/4}((1/m) sum_{i in B_k} <w, X_i>^2))`.
pub fn qnorm_direction(w: &DVector<f64>, data: &Dataset, part: &BlockPartition) -> Result<DVector<f64>> {
    check_partition(data, part)?;
    if w.len() != data.dim() {
        return invalid("direction dimension differs from the data dimension");
    }
    if w.iter().all(|x| *x == 0.0) {
        return invalid("direction must be nonzero");
    }
    if part.k < 4 {
        return invalid(format!("first quartile over blocks needs K >= 4, got {}", part.k));
    }
    let m = part.m as f64;
    let mut energies: Vec<f64> = part
        .blocks
        .iter()
        .map(|b| b.iter().map(|&i| data.points[i].dot(w).powi(2)).sum::<f64>() / m)
        .collect();
    energies.sort_by(f64::total_cmp);
    normalize_by_quartile(w, quartile_sorted(&energies))
}

/// Min-max regression estimate. Requires `k >= 4` for the block quartile.
pub fn mom_regression(
    problem: &RegressionProblem,
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<EstimatorReport<DVector<f64>>> {
    let data = &problem.data;
    let d = data.dim();
    if !(opts.step > 0.0) || !(opts.min_step > 0.0) || !(opts.rtol >= 0.0) {
        return invalid("solver step, min_step and rtol must be positive");
    }
    let part = partition_blocks(data.len(), k, seed)?;
    if part.k < 4 {
        return invalid(format!("first quartile over blocks needs K >= 4, got {k}"));
    }
    let sparsity = match problem.model_set {
        ModelSet::Full => None,
        ModelSet::Sparse { s } => Some(s),
    };
    let shape_direction = |w: &DVector<f64>| match sparsity {
        Some(s) => hard_threshold(w, 2 * s),
        None => w.clone(),
    };
    let project = |a: DVector<f64>| match sparsity {
        Some(s) => hard_threshold(&a, s),
        None => a,
    };

    let design = BlockDesign::new(&data.points, problem.responses(), &part);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, DIRECTION_STREAM));
    let mut diag = Diagnostics::default();
    diag.warnings.extend(problem.block_count_warning(k));

    // Pool maximum of |Med_k score| at residuals `r`, sign folded into the direction.
    let mut search = |r: &DVector<f64>, memory: Option<&DVector<f64>>, diag: &mut Diagnostics| {
        let mut raw: Vec<DVector<f64>> = Vec::with_capacity(part.k + opts.n_random + 1);
        let candidates = design
            .scores(r)
            .into_iter()
            .chain((0..opts.n_random).map(|_| random_unit(&mut rng, d)))
            .map(|w| shape_direction(&w))
            .chain(memory.cloned());
        for w in candidates {
            if w.iter().all(|x| *x == 0.0) {
                diag.degenerate_directions += 1;
            } else {
                raw.push(w);
            }
        }
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut size = 0;
        for res in design.evaluate(&raw, r) {
            match res {
                Ok((u, v)) => {
                    size += 1;
                    if best.as_ref().is_none_or(|(b, _)| v.abs() > *b) {
                        best = Some((v.abs(), if v < 0.0 { -u } else { u }));
                    }
                }
                Err(_) => diag.degenerate_directions += 1,
            }
        }
        diag.pool_size = size;
        best.unwrap_or_else(|| (0.0, DVector::zeros(d)))
    };

    let mut a = project(DVector::zeros(d));
    let r0 = design.residuals(&a);
    let scale = median(&design.scores(&r0).iter().map(|g| g.norm()).collect::<Vec<_>>())?;
    let tol = opts.rtol * scale;
    let (mut objective, mut direction) = search(&r0, None, &mut diag);
    let mut trace = vec![objective];
    let mut converged = objective <= tol;
    let mut theta = opts.step;
    let inv_m = 1.0 / part.m as f64;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let candidate = project(&a + &direction * (theta * inv_m * objective));
        let r = design.residuals(&candidate);
        let memory = opts.use_memory.then_some(&direction);
        let (value, u) = search(&r, memory, &mut diag);
        if value < objective {
            a = candidate;
            objective = value;
            direction = u;
            theta = (2.0 * theta).min(opts.step);
            trace.push(value);
            converged = value <= tol;
        } else {
            diag.rejected_steps += 1;
            theta *= 0.5;
            if theta < opts.min_step {
                converged = true;
            }
        }
    }

    if diag.degenerate_directions > 0 {
        diag.warnings.push(format!(
            "{} candidate directions skipped with zero quartile energy",
            diag.degenerate_directions
        ));
    }
    Ok(EstimatorReport {
        estimate: a,
        objective_final: objective,
        iterations,
        converged,
        trace: opts.record_trace.then_some(trace),
        diagnostics: diag,
    })
}

/// Ordinary least squares through the normal equations (SVD solve).
pub fn ols(data: &Dataset) -> Result<DVector<f64>> {
    let z = data
        .responses
        .as_ref()
        .ok_or_else(|| MomError::InvalidArgument("least squares needs responses".into()))?;
    let d = data.dim();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for (x, &zi) in data.points.iter().zip(z) {
        gram.ger(1.0, x, x, 1.0);
        rhs.axpy(zi, x, 1.0);
    }
    gram.svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| MomError::InvalidArgument(format!("least squares failed: {e}")))
}

/// `<Delta, Sigma Delta>` with `Delta = beta_hat - beta_star`.
pub fn excess_risk(beta_hat: &DVector<f64>, beta_star: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    quad_form(sigma, &(beta_hat - beta_star))
}

/// Multiplier objective `max_u |Med_k sum (Z_i - <a,X_i>) <u,X_i>|` over a
/// supplied direction list, each direction used as given.
pub fn regression_objective(
    problem: &RegressionProblem,
    a: &DVector<f64>,
    directions: &[DVector<f64>],
    part: &BlockPartition,
) -> Result<f64> {
    check_partition(&problem.data, part)?;
    if directions.is_empty() {
        return invalid("direction list is empty");
    }
    let design = BlockDesign::new(&problem.data.points, problem.responses(), part);
    let r = design.residuals(a);
    let mut vals = Vec::with_capacity(part.k);
    Ok(directions
        .iter()
        .map(|u| {
            let p = &design.x * u;
            design.block_sums(p.as_slice(), &r, &mut vals, None);
            median_in_place(&mut vals).abs()
        })
        .fold(0.0, f64::max))
}
