//! Synthetic heavy-tailed samples and contamination adversaries.
//!
//! Every generator records exact population moments in [`Truth`]. Student-t
//! and Pareto draws are centered and rescaled to unit variance per coordinate
//! before the covariance root is applied, so `truth.covariance` is exact.
//! Adversaries rewrite points or responses and the corrupted index set, never
//! the recorded population quantities.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{is_symmetric, psd_sqrt, sorted_eigen};
use crate::mom_core::{Dataset, Truth};

/// Small-ball constant of any Gaussian linear form, `sqrt(2/pi)`.
pub const GAUSSIAN_SMALL_BALL: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT { dof: f64 },
    Pareto { shape: f64 },
    /// Independent coordinates equal to `sqrt(d N)` with probability `1/(d N)`
    /// and 0 otherwise, shifted by the spec mean. The covariance factory is
    /// ignored for this family.
    TwoPointCounterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceFactory {
    Identity,
    Diagonal { values: Vec<f64> },
    /// `diag(lambda1, bulk, ..., bulk)`.
    Spiked { lambda1: f64, bulk: f64 },
    /// Row-major rows.
    Explicit { rows: Vec<Vec<f64>> },
}

impl CovarianceFactory {
    pub fn build(&self, d: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            Self::Identity => DMatrix::identity(d, d),
            Self::Diagonal { values } => {
                if values.len() != d {
                    return invalid(format!("diagonal covariance has {} entries, d={d}", values.len()));
                }
                DMatrix::from_diagonal(&DVector::from_column_slice(values))
            }
            Self::Spiked { lambda1, bulk } => {
                let mut diag = vec![*bulk; d];
                diag[0] = *lambda1;
                DMatrix::from_diagonal(&DVector::from_vec(diag))
            }
            Self::Explicit { rows } => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return invalid(format!("explicit covariance must be {d}x{d}"));
                }
                DMatrix::from_row_iterator(d, d, rows.iter().flatten().copied())
            }
        };
        check_psd(&m)?;
        Ok(m)
    }
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("covariance has non-finite entries");
    }
    let scale = m.abs().max().max(1.0);
    if !is_symmetric(m, 1e-12 * scale) {
        return invalid("covariance is not symmetric");
    }
    let (vals, _) = sorted_eigen(m);
    if vals[vals.len() - 1] < -1e-10 * scale {
        return invalid("covariance is not positive semidefinite");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub mean: Vec<f64>,
    pub covariance: CovarianceFactory,
    /// When set, the mean must have at most this many nonzero coordinates.
    pub sparsity: Option<usize>,
}

impl GeneratorSpec {
    pub fn gaussian(mean: Vec<f64>, covariance: CovarianceFactory) -> Self {
        Self {
            family: Family::Gaussian,
            mean,
            covariance,
            sparsity: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return invalid("generator mean must be nonempty");
        }
        match self.family {
            Family::StudentT { dof } if !(dof > 2.0) => {
                return invalid(format!("student_t needs dof > 2 for finite variance, got {dof}"))
            }
            Family::Pareto { shape } if !(shape > 2.0) => {
                return invalid(format!("pareto needs shape > 2 for finite variance, got {shape}"))
            }
            _ => {}
        }
        if let Some(s) = self.sparsity {
            let nnz = self.mean.iter().filter(|v| **v != 0.0).count();
            if s == 0 || s > d || nnz > s {
                return invalid(format!("mean has {nnz} nonzeros, sparsity {s}, d={d}"));
            }
        }
        if !matches!(self.family, Family::TwoPointCounterexample) {
            self.covariance.build(d)?;
        }
        Ok(())
    }
}

/// Stateless splitmix64 step: independent seed streams from one base seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Root {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Root {
    fn of(cov: &DMatrix<f64>) -> Self {
        let d = cov.nrows();
        let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || cov[(i, j)] == 0.0));
        if !diagonal {
            return Self::Dense(psd_sqrt(cov));
        }
        if (0..d).all(|i| cov[(i, i)] == 1.0) {
            Self::Identity
        } else {
            Self::Diagonal(DVector::from_iterator(d, (0..d).map(|i| cov[(i, i)].max(0.0).sqrt())))
        }
    }

    fn apply(&self, z: DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity => z,
            Self::Diagonal(s) => z.component_mul(s),
            Self::Dense(l) => l * z,
        }
    }
}

enum Standardized {
    Gaussian,
    Student(StudentT<f64>, f64),
    Pareto(Pareto<f64>, f64, f64),
}

impl Standardized {
    fn of(family: &Family) -> Result<Self> {
        Ok(match *family {
            Family::Gaussian | Family::TwoPointCounterexample => Self::Gaussian,
            Family::StudentT { dof } => {
                let dist = StudentT::new(dof)
                    .map_err(|e| crate::MomError::InvalidArgument(e.to_string()))?;
                Self::Student(dist, ((dof - 2.0) / dof).sqrt())
            }
            Family::Pareto { shape } => {
                let dist = Pareto::new(1.0, shape)
                    .map_err(|e| crate::MomError::InvalidArgument(e.to_string()))?;
                let mean = shape / (shape - 1.0);
                let sd = (shape / ((shape - 1.0).powi(2) * (shape - 2.0))).sqrt();
                Self::Pareto(dist, mean, sd)
            }
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => rng.sample(StandardNormal),
            Self::Student(dist, scale) => dist.sample(rng) * scale,
            Self::Pareto(dist, mean, sd) => (dist.sample(rng) - mean) / sd,
        }
    }
}

/// Draws `n` i.i.d. vectors and records their population mean and covariance.
pub fn generate(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let d = spec.dim();
    let mean = DVector::from_column_slice(&spec.mean);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if let Family::TwoPointCounterexample = spec.family {
        let dn = (d * n) as f64;
        let p = 1.0 / dn;
        let height = dn.sqrt();
        let points = (0..n)
            .map(|_| {
                DVector::from_iterator(
                    d,
                    (0..d).map(|j| mean[j] + if rng.random::<f64>() < p { height } else { 0.0 }),
                )
            })
            .collect();
        let truth = Truth {
            mean: Some(mean.add_scalar(1.0 / height)),
            covariance: Some(DMatrix::identity(d, d) * (1.0 - p)),
            ..Truth::default()
        };
        return Ok(Dataset {
            points,
            responses: None,
            truth: Some(truth),
        });
    }

    let cov = spec.covariance.build(d)?;
    let root = Root::of(&cov);
    let law = Standardized::of(&spec.family)?;
    let points = (0..n)
        .map(|_| {
            let z = DVector::from_iterator(d, (0..d).map(|_| law.draw(&mut rng)));
            root.apply(z) + &mean
        })
        .collect();
    let truth = Truth {
        mean: Some(mean),
        covariance: Some(cov),
        small_ball: matches!(spec.family, Family::Gaussian).then_some(GAUSSIAN_SMALL_BALL),
        ..Truth::default()
    };
    Ok(Dataset {
        points,
        responses: None,
        truth: Some(truth),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierLaw {
    PointMass { location: Vec<f64> },
    /// `center + scale * N(0, I)`.
    Gaussian { center: Vec<f64>, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryModel {
    None,
    /// Each sample independently replaced by an outlier draw with probability epsilon.
    Huber { epsilon: f64, outlier: OutlierLaw },
    /// `floor(epsilon N)` samples moved to `mu + magnitude * direction / |direction|`.
    AdversarialShift {
        epsilon: f64,
        direction: Vec<f64>,
        magnitude: f64,
    },
    /// The `floor(epsilon N)` samples lowest along `direction` are overwritten
    /// with copies of the highest ones, so the retained sample is the top
    /// `N - floor(epsilon N)` along that direction.
    KeepLargest { epsilon: f64, direction: Vec<f64> },
    /// `floor(epsilon N)` responses set to `+-magnitude` with random signs.
    ResponsePoison { epsilon: f64, magnitude: f64 },
}

impl AdversaryModel {
    pub fn epsilon(&self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Huber { epsilon, .. }
            | Self::AdversarialShift { epsilon, .. }
            | Self::KeepLargest { epsilon, .. }
            | Self::ResponsePoison { epsilon, .. } => *epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub model: AdversaryModel,
    pub seed: u64,
}

fn unit_direction(v: &[f64], d: usize) -> Result<DVector<f64>> {
    if v.len() != d {
        return invalid(format!("adversary direction has length {}, d={d}", v.len()));
    }
    let v = DVector::from_column_slice(v);
    let norm = v.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return invalid("adversary direction must be a nonzero finite vector");
    }
    Ok(v / norm)
}

/// Applies the adversary and records the corrupted indices in `truth.corrupted`.
pub fn corrupt(data: &Dataset, adv: &AdversarySpec) -> Result<Dataset> {
    data.validate()?;
    let Some(truth) = &data.truth else {
        return invalid("corrupt needs a dataset with truth metadata");
    };
    let eps = adv.model.epsilon();
    if !(0.0..0.5).contains(&eps) {
        return invalid(format!("epsilon must lie in [0, 1/2), got {eps}"));
    }
    let n = data.len();
    let d = data.dim();
    let budget = (eps * n as f64).floor() as usize;
    let mut out = data.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(adv.seed);

    let corrupted: Vec<usize> = match &adv.model {
        AdversaryModel::None => Vec::new(),
        _ if eps == 0.0 => Vec::new(),
        AdversaryModel::Huber { outlier, .. } => {
            let mut hit = Vec::new();
            for i in 0..n {
                if rng.random::<f64>() < eps {
                    out.points[i] = draw_outlier(outlier, d, &mut rng)?;
                    hit.push(i);
                }
            }
            hit
        }
        AdversaryModel::AdversarialShift {
            direction,
            magnitude,
            ..
        } => {
            let dir = unit_direction(direction, d)?;
            let Some(mu) = &truth.mean else {
                return invalid("adversarial_shift needs truth.mean");
            };
            let target = mu + dir * *magnitude;
            let mut idx = sample_indices(&mut rng, n, budget).into_vec();
            idx.sort_unstable();
            for &i in &idx {
                out.points[i] = target.clone();
            }
            idx
        }
        AdversaryModel::KeepLargest { direction, .. } => {
            let dir = unit_direction(direction, d)?;
            let scores: Vec<f64> = data.points.iter().map(|p| p.dot(&dir)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
            let (low, kept) = order.split_at(budget);
            let top: Vec<usize> = kept.iter().rev().copied().collect();
            for (j, &i) in low.iter().enumerate() {
                let src = top[j % top.len()];
                out.points[i] = data.points[src].clone();
                if let (Some(r), Some(orig)) = (out.responses.as_mut(), data.responses.as_ref()) {
                    r[i] = orig[src];
                }
            }
            let mut idx = low.to_vec();
            idx.sort_unstable();
            idx
        }
        AdversaryModel::ResponsePoison { magnitude, .. } => {
            let Some(responses) = out.responses.as_mut() else {
                return invalid("response_poison needs a dataset with responses");
            };
            let mut idx = sample_indices(&mut rng, n, budget).into_vec();
            idx.sort_unstable();
            for &i in &idx {
                responses[i] = if rng.random::<bool>() { *magnitude } else { -*magnitude };
            }
            idx
        }
    };

    let t = out.truth.as_mut().expect("truth checked above");
    let realised = corrupted.len();
    let budget = match adv.model {
        AdversaryModel::Huber { .. } => realised,
        _ => budget,
    };
    let mut all = std::mem::take(&mut t.corrupted);
    all.extend(corrupted);
    all.sort_unstable();
    all.dedup();
    t.corrupted = all;
    t.epsilon += eps;
    t.corruption_budget += budget;
    out.validate()?;
    Ok(out)
}

fn draw_outlier<R: Rng + ?Sized>(law: &OutlierLaw, d: usize, rng: &mut R) -> Result<DVector<f64>> {
    match law {
        OutlierLaw::PointMass { location } => {
            if location.len() != d {
                return invalid("outlier location has the wrong dimension");
            }
            Ok(DVector::from_column_slice(location))
        }
        OutlierLaw::Gaussian { center, scale } => {
            if center.len() != d {
                return invalid("outlier center has the wrong dimension");
            }
            Ok(DVector::from_iterator(
                d,
                center
                    .iter()
                    .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal)),
            ))
        }
    }
}

/// Linear model `V = <beta*, Y> + xi` with noise independent of the design.
/// `noise` must be one-dimensional with zero mean.
pub fn regression_generate(
    design: &GeneratorSpec,
    beta_star: &DVector<f64>,
    noise: &GeneratorSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if noise.dim() != 1 {
        return invalid("noise generator must be one-dimensional");
    }
    if noise.mean[0] != 0.0 {
        return invalid(format!("noise must have zero mean, got {}", noise.mean[0]));
    }
    if beta_star.len() != design.dim() {
        return invalid("beta* dimension differs from the design dimension");
    }
    let mut data = generate(design, n, derive_seed(seed, 0))?;
    let xi = generate(noise, n, derive_seed(seed, 1))?;
    let noise_variance = xi
        .truth
        .as_ref()
        .and_then(|t| t.covariance.as_ref())
        .map(|c| c[(0, 0)]);
    data.responses = Some(
        data.points
            .iter()
            .zip(&xi.points)
            .map(|(y, e)| beta_star.dot(y) + e[0])
            .collect(),
    );
    let truth = data.truth.as_mut().expect("generate records truth");
    truth.beta_star = Some(beta_star.clone());
    truth.noise_variance = noise_variance;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(d: usize) -> GeneratorSpec {
        GeneratorSpec::gaussian(vec![0.0; d], CovarianceFactory::Identity)
    }

    #[test]
    fn gaussian_mean_is_close() {
        let data = generate(&gaussian(3), 100_000, 1).unwrap();
        let err = data.empirical_mean().norm();
        assert!(err < 5.0 * (3.0f64 / 1e5).sqrt(), "{err}");
    }

    #[test]
    fn two_point_truth() {
        let spec = GeneratorSpec {
            family: Family::TwoPointCounterexample,
            ..gaussian(4)
        };
        let data = generate(&spec, 100, 3).unwrap();
        let mu = data.truth.unwrap().mean.unwrap();
        for v in mu.iter() {
            assert!((v - 0.05).abs() < 1e-15);
        }
        for p in &data.points {
            for v in p.iter() {
                assert!(*v == 0.0 || (*v - 20.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heavy_tail_parameters_need_two_moments() {
        let mut spec = gaussian(1);
        spec.family = Family::StudentT { dof: 2.0 };
        assert!(generate(&spec, 10, 0).is_err());
        spec.family = Family::Pareto { shape: 1.5 };
        assert!(generate(&spec, 10, 0).is_err());
    }

    #[test]
    fn invalid_covariances_rejected() {
        let mut spec = gaussian(2);
        spec.covariance = CovarianceFactory::Explicit {
            rows: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(generate(&spec, 10, 0).is_err());
        spec.covariance = CovarianceFactory::Explicit {
            rows: vec![vec![1.0, 0.5], vec![0.4, 1.0]],
        };
        assert!(generate(&spec, 10, 0).is_err());
        spec.covariance = CovarianceFactory::Diagonal { values: vec![1.0] };
        assert!(generate(&spec, 10, 0).is_err());
    }

    #[test]
    fn standardized_families_have_unit_variance() {
        for family in [Family::StudentT { dof: 5.0 }, Family::Pareto { shape: 6.0 }] {
            let spec = GeneratorSpec {
                family,
                ..gaussian(1)
            };
            let data = generate(&spec, 200_000, 9).unwrap();
            let m = data.empirical_mean()[0];
            let var = data.sample_covariance()[(0, 0)];
            assert!(m.abs() < 0.02, "{m}");
            assert!((var - 1.0).abs() < 0.08, "{var}");
        }
    }

    #[test]
    fn student_fourth_moment_grows_with_n() {
        let spec = GeneratorSpec {
            family: Family::StudentT { dof: 2.5 },
            ..gaussian(1)
        };
        // Median over seeds of the empirical fourth moment, at two sample sizes.
        let fourth = |n: usize| {
            let mut v: Vec<f64> = (0..21)
                .map(|s| {
                    let data = generate(&spec, n, s).unwrap();
                    data.points.iter().map(|p| p[0].powi(4)).sum::<f64>() / n as f64
                })
                .collect();
            v.sort_by(f64::total_cmp);
            v[10]
        };
        let small = fourth(1_000);
        let large = fourth(100_000);
        assert!(large > 3.0 * small, "{small} {large}");
        let data = generate(&spec, 100_000, 0).unwrap();
        assert!(data.sample_covariance()[(0, 0)].is_finite());
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let data = generate(&gaussian(2), 50, 0).unwrap();
        let adv = AdversarySpec {
            model: AdversaryModel::AdversarialShift {
                epsilon: 0.0,
                direction: vec![1.0, 0.0],
                magnitude: 1e6,
            },
            seed: 1,
        };
        let out = corrupt(&data, &adv).unwrap();
        assert_eq!(out.points, data.points);
        assert!(out.truth.unwrap().corrupted.is_empty());
    }

    #[test]
    fn shift_moves_exactly_floor_eps_n() {
        let data = generate(&gaussian(3), 100, 0).unwrap();
        let adv = AdversarySpec {
            model: AdversaryModel::AdversarialShift {
                epsilon: 0.1,
                direction: vec![1.0, 0.0, 0.0],
                magnitude: 1e6,
            },
            seed: 4,
        };
        let out = corrupt(&data, &adv).unwrap();
        let target = DVector::from_vec(vec![1e6, 0.0, 0.0]);
        let moved: Vec<usize> = (0..100).filter(|&i| out.points[i] == target).collect();
        let truth = out.truth.unwrap();
        assert_eq!(moved.len(), 10);
        assert_eq!(truth.corrupted, moved);
        assert_eq!(truth.mean, data.truth.as_ref().unwrap().mean);
        assert_eq!(truth.covariance, data.truth.as_ref().unwrap().covariance);
    }

    #[test]
    fn huber_count_is_binomial() {
        let data = generate(&gaussian(1), 10_000, 0).unwrap();
        let adv = AdversarySpec {
            model: AdversaryModel::Huber {
                epsilon: 0.2,
                outlier: OutlierLaw::PointMass { location: vec![50.0] },
            },
            seed: 8,
        };
        let truth = corrupt(&data, &adv).unwrap().truth.unwrap();
        let sd = (10_000.0f64 * 0.2 * 0.8).sqrt();
        assert!((truth.corrupted.len() as f64 - 2000.0).abs() <= 4.0 * sd);
        assert_eq!(truth.corruption_budget, truth.corrupted.len());
    }

    #[test]
    fn keep_largest_retains_the_top() {
        let data = generate(&gaussian(2), 40, 2).unwrap();
        let adv = AdversarySpec {
            model: AdversaryModel::KeepLargest {
                epsilon: 0.25,
                direction: vec![0.0, 1.0],
            },
            seed: 0,
        };
        let out = corrupt(&data, &adv).unwrap();
        let truth = out.truth.as_ref().unwrap();
        assert_eq!(truth.corrupted.len(), 10);
        let min_kept = (0..40)
            .filter(|i| !truth.corrupted.contains(i))
            .map(|i| out.points[i][1])
            .fold(f64::INFINITY, f64::min);
        let max_dropped = truth
            .corrupted
            .iter()
            .map(|&i| data.points[i][1])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_kept >= max_dropped);
        // Every overwritten sample is a copy of a retained one.
        for &i in &truth.corrupted {
            assert!(out.points[i][1] >= min_kept);
        }
    }

    #[test]
    fn epsilon_half_rejected() {
        let data = generate(&gaussian(1), 10, 0).unwrap();
        let adv = AdversarySpec {
            model: AdversaryModel::Huber {
                epsilon: 0.5,
                outlier: OutlierLaw::PointMass { location: vec![0.0] },
            },
            seed: 0,
        };
        assert!(corrupt(&data, &adv).is_err());
    }

    #[test]
    fn regression_noise_free_is_linear() {
        let beta = DVector::from_vec(vec![1.5, -2.0]);
        let noise = GeneratorSpec::gaussian(vec![0.0], CovarianceFactory::Diagonal { values: vec![0.0] });
        let data = regression_generate(&gaussian(2), &beta, &noise, 30, 5).unwrap();
        let r = data.responses.as_ref().unwrap();
        for (p, v) in data.points.iter().zip(r) {
            assert_eq!(*v, beta.dot(p));
        }
        let truth = data.truth.unwrap();
        assert_eq!(truth.noise_variance, Some(0.0));
        assert_eq!(truth.beta_star, Some(beta));
    }

    #[test]
    fn regression_rejects_biased_noise() {
        let noise = GeneratorSpec::gaussian(vec![0.3], CovarianceFactory::Identity);
        let beta = DVector::from_vec(vec![1.0, 0.0]);
        assert!(regression_generate(&gaussian(2), &beta, &noise, 10, 0).is_err());
    }

    #[test]
    fn regression_moments() {
        let beta = DVector::from_vec(vec![1.0, 0.0]);
        let noise = GeneratorSpec::gaussian(vec![0.0], CovarianceFactory::Diagonal { values: vec![0.25] });
        let data = regression_generate(&gaussian(2), &beta, &noise, 50_000, 6).unwrap();
        let truth = data.truth.as_ref().unwrap();
        assert_eq!(truth.second_moment().unwrap(), DMatrix::identity(2, 2));
        let r = data.responses.as_ref().unwrap();
        let resid_var = data
            .points
            .iter()
            .zip(r)
            .map(|(p, v)| (v - p[0]).powi(2))
            .sum::<f64>()
            / 50_000.0;
        assert!((resid_var - 0.25).abs() < 0.01, "{resid_var}");
    }

    #[test]
    fn student_noise_weak_variance_is_finite() {
        let beta = DVector::from_vec(vec![0.0, 1.0]);
        let noise = GeneratorSpec {
            family: Family::StudentT { dof: 2.5 },
            ..GeneratorSpec::gaussian(vec![0.0], CovarianceFactory::Identity)
        };
        let data = regression_generate(&gaussian(2), &beta, &noise, 20_000, 2).unwrap();
        let r = data.responses.as_ref().unwrap();
        for t in 0..8 {
            let angle = t as f64 * std::f64::consts::PI / 8.0;
            let u = DVector::from_vec(vec![angle.cos(), angle.sin()]);
            let w = data
                .points
                .iter()
                .zip(r)
                .map(|(p, v)| (v - p[1]).powi(2) * u.dot(p).powi(2))
                .sum::<f64>()
                / 20_000.0;
            assert!(w.is_finite() && w < 10.0, "{w}");
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let spec = GeneratorSpec {
            family: Family::Pareto { shape: 3.0 },
            ..gaussian(3)
        };
        assert_eq!(generate(&spec, 20, 7).unwrap(), generate(&spec, 20, 7).unwrap());
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
