//! Physical realization of the coherent-projector measurement.
//!
//! The system is coupled to a vacuum ancilla with quadratures `ξ` and the
//! commuting combinations `Θ = x + Bξ` are measured directly, where
//! `BCBᵀ = −C`. Outcomes are distributed as `Tr ρ̂(λ) P̂(λ̃) / det^{1/2}|2πC|`,
//! a Gaussian with mean `λ` and covariance `K + ½|C|`.

use nalgebra::Cholesky;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bayes::{lattice_ground_vectors, DecisionGrid};
use crate::error::{Error, Result};
use crate::fock::{tensor_embed, FockSpace, GaussianFamily};
use crate::gaussian::{covariance, ingest_symmetric, CommutationMatrix, GaussianChannelModel, PriorModel};
use crate::linalg::{commutator, expectation, max_abs_real, trace_product, CMat, RMat, RVec};

/// Largest accepted `‖BCBᵀ + C‖`.
pub const B_TOL: f64 = 1e-12;

/// Largest grid-clipped outcome mass.
pub const CLIPPING_LIMIT: f64 = 1e-4;

/// `B = ⊕ diag(1, −1)`: reflecting `p` flips the sign of every commutator.
pub fn solve_b(c: &CommutationMatrix) -> Result<RMat> {
    if c.canonical_scales().is_none() {
        return Err(Error::InvalidInput("commutator must be in canonical block form".into()));
    }
    let s = c.dim();
    let b = RMat::from_diagonal(&RVec::from_fn(s, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }));
    check_b(&b, c)?;
    Ok(b)
}

fn b_defect(b: &RMat, c: &CommutationMatrix) -> f64 {
    max_abs_real(&(b * c.a() * b.transpose() + c.a()))
}

fn check_b(b: &RMat, c: &CommutationMatrix) -> Result<()> {
    let defect = b_defect(b, c);
    if defect > B_TOL {
        return Err(Error::InvalidInput(format!("B does not satisfy BCBᵀ = −C (defect {defect:.3e})")));
    }
    let det = b.determinant().abs();
    if (det - 1.0).abs() > B_TOL {
        return Err(Error::InvalidInput(format!("|det B| = {det}, expected 1")));
    }
    Ok(())
}

/// System ⊗ ancilla with the measured combinations `Θ = x ⊗ I + B (I ⊗ ξ)`.
#[derive(Clone, Debug)]
pub struct AncillaScheme {
    b: RMat,
    space: FockSpace,
}

impl AncillaScheme {
    pub fn new(c: &CommutationMatrix, levels: usize) -> Result<Self> {
        let b = solve_b(c)?;
        Self::with_b(c, b, levels)
    }

    /// Any `B`, unchecked; used to exhibit the commutator of a wrong choice.
    pub fn with_b(c: &CommutationMatrix, b: RMat, levels: usize) -> Result<Self> {
        let scales = c
            .canonical_scales()
            .ok_or_else(|| Error::InvalidInput("commutator must be in canonical block form".into()))?;
        if b.nrows() != c.dim() || b.ncols() != c.dim() {
            return Err(Error::DimensionMismatch { expected: c.dim(), got: b.nrows() });
        }
        let space = FockSpace::new(&scales, levels)?;
        let joint = space.dim() * space.dim();
        if joint > space.cap() * space.cap() || joint > 1 << 20 {
            return Err(Error::CapExceeded { dim: joint, cap: 1 << 20 });
        }
        Ok(Self { b, space })
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// `‖BCBᵀ + C‖_max` for the configured `B`.
    pub fn b_defect(&self) -> f64 {
        let c = CommutationMatrix::canonical(self.space.scales()).expect("valid scales");
        b_defect(&self.b, &c)
    }

    /// `Θ_i` on the joint space.
    pub fn theta(&self) -> Result<Vec<CMat>> {
        let x = self.space.quadratures();
        let d = self.space.dim();
        let id = CMat::identity(d, d);
        let cap = d * d;
        let s = x.len();
        let sys: Vec<CMat> = x.iter().map(|xi| tensor_embed(xi, &id, cap)).collect::<Result<_>>()?;
        let anc: Vec<CMat> = x.iter().map(|xi| tensor_embed(&id, xi, cap)).collect::<Result<_>>()?;
        Ok((0..s)
            .map(|i| {
                let mut t = sys[i].clone();
                for (k, a) in anc.iter().enumerate() {
                    let w = self.b[(i, k)];
                    if w != 0.0 {
                        t += a * C64::new(w, 0.0);
                    }
                }
                t
            })
            .collect())
    }

    /// Joint basis indices whose system and ancilla occupations are all at most `max_level`.
    pub fn trusted_block(&self, max_level: usize) -> Vec<usize> {
        let d = self.space.dim();
        let ok: Vec<bool> = (0..d).map(|i| self.space.occupations(i).iter().all(|&n| n <= max_level)).collect();
        (0..d * d).filter(|&k| ok[k / d] && ok[k % d]).collect()
    }

    /// `max_{i<j} ‖[Θ_i, Θ_j]‖_max` on the trusted block.
    pub fn commutation_defect(&self, max_level: usize) -> Result<f64> {
        let theta = self.theta()?;
        let block = self.trusted_block(max_level);
        let mut worst = 0.0_f64;
        for i in 0..theta.len() {
            for j in i + 1..theta.len() {
                let c = commutator(&theta[i], &theta[j]);
                for &a in &block {
                    for &b in &block {
                        worst = worst.max(c[(a, b)].norm());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Mean and covariance of `Θ` in `ρ ⊗ |0⟩⟨0|`.
    pub fn theta_moments(&self, rho: &CMat) -> Result<(Vec<f64>, RMat)> {
        let d = self.space.dim();
        if rho.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
        }
        let vac = self.space.vacuum();
        let joint = tensor_embed(rho, &(&vac * vac.adjoint()), d * d)?;
        let theta = self.theta()?;
        let s = theta.len();
        let mean: Vec<f64> = theta.iter().map(|t| trace_product(&joint, t).re).collect();
        let mut cov = RMat::zeros(s, s);
        for i in 0..s {
            let ti = &joint * &theta[i];
            for j in 0..s {
                let second = trace_product(&ti, &theta[j]).re;
                cov[(i, j)] = second - mean[i] * mean[j];
            }
        }
        Ok((mean, (&cov + cov.transpose()) * 0.5))
    }
}

/// Outcome covariance `K + ½|C|`.
pub fn outcome_covariance(model: &GaussianChannelModel) -> Result<RMat> {
    Ok(covariance(model)? + model.c.abs() * 0.5)
}

/// The two routes to the outcome density on a grid.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    /// `Tr ρ̂(λ) P̂(λ̃_j) / det^{1/2}|2πC|`.
    pub route_a: Vec<f64>,
    /// Gaussian density with mean `λ` and covariance `K + ½|C|`.
    pub route_b: Vec<f64>,
    pub sup_difference: f64,
    /// `Σ_j density_j ω_j` per route.
    pub mass_a: f64,
    pub mass_b: f64,
}

pub fn outcome_distribution(
    model: &GaussianChannelModel,
    lambda: &[f64],
    grid: &DecisionGrid,
    space: &FockSpace,
) -> Result<OutcomeDistribution> {
    let s = model.dim();
    if lambda.len() != s {
        return Err(Error::DimensionMismatch { expected: s, got: lambda.len() });
    }
    let cov = outcome_covariance(model)?;
    let density = gaussian_pdf(&cov)?;
    let route_b: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|n| {
            let d: Vec<f64> = n.iter().zip(lambda).map(|(a, b)| a - b).collect();
            density(&d)
        })
        .collect();
    let mass_b: f64 = route_b.iter().zip(grid.weights()).map(|(p, w)| p * w).sum();
    if 1.0 - mass_b > CLIPPING_LIMIT {
        return Err(Error::GridClipping(1.0 - mass_b));
    }
    let rho = GaussianFamily::new(space, &model.q)?.state(lambda)?.rho;
    let lattice = lattice_ground_vectors(space, &RMat::identity(s, s), &RMat::identity(s, s), grid)?;
    let vol = model.c.cell_volume();
    let route_a: Vec<f64> = lattice.vectors.iter().map(|v| expectation(v, &rho).re / vol).collect();
    let mass_a: f64 = route_a.iter().zip(grid.weights()).map(|(p, w)| p * w).sum();
    let sup_difference = route_a.iter().zip(&route_b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(OutcomeDistribution { route_a, route_b, sup_difference, mass_a, mass_b })
}

fn gaussian_pdf(cov: &RMat) -> Result<impl Fn(&[f64]) -> f64> {
    let s = cov.nrows();
    let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositive { min_eig: 0.0 })?;
    let inv = chol.inverse();
    let norm = ((2.0 * std::f64::consts::PI).powi(s as i32) * chol.determinant()).sqrt();
    Ok(move |x: &[f64]| {
        let v = RVec::from_column_slice(x);
        (-0.5 * v.dot(&(&inv * &v))).exp() / norm
    })
}

fn cholesky_factor(cov: &RMat) -> Result<RMat> {
    Cholesky::new(cov.clone()).map(|c| c.l()).ok_or(Error::NotPositive { min_eig: 0.0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSample {
    pub lambda_tilde: Vec<f64>,
    pub draw_index: usize,
    pub seed: u64,
}

fn normal_vector(rng: &mut ChaCha8Rng, l: &RMat) -> RVec {
    let z = RVec::from_fn(l.ncols(), |_, _| StandardNormal.sample(rng));
    l * z
}

/// i.i.d. outcomes for a fixed signal `λ`, from the closed-form route.
pub fn sample_outcomes(
    model: &GaussianChannelModel,
    lambda: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<OutcomeSample>> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    if lambda.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: lambda.len() });
    }
    let l = cholesky_factor(&outcome_covariance(model)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let d = normal_vector(&mut rng, &l);
            OutcomeSample {
                lambda_tilde: lambda.iter().zip(d.iter()).map(|(a, b)| a + b).collect(),
                draw_index: i,
                seed,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleCost {
    Quadratic,
    /// Delta cost; not estimable by sampling.
    Simple,
    Zero,
}

/// Post-processing of raw outcomes into estimates.
#[derive(Clone, Debug)]
pub enum Estimator {
    Raw,
    /// `λ̂ = G λ̃`.
    Linear(RMat),
}

/// `G = K_λ (K_λ + K + ½|C|)⁻¹`, the affine posterior mean of the Gaussian outcome model.
pub fn posterior_mean_gain(model: &GaussianChannelModel, k_lambda: &RMat) -> Result<RMat> {
    let k_lambda = ingest_symmetric(k_lambda, model.dim())?;
    let total = &k_lambda + outcome_covariance(model)?;
    let inv = total.try_inverse().ok_or(Error::NotPositive { min_eig: 0.0 })?;
    Ok(k_lambda * inv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub draw_index: usize,
    pub lambda: Vec<f64>,
    pub outcome: Vec<f64>,
    pub cost: f64,
}

#[derive(Clone, Debug)]
pub struct EmpiricalRisk {
    pub estimate: f64,
    pub stderr: f64,
    pub records: Vec<SampleRecord>,
}

type LambdaDraw = Box<dyn FnMut(&mut ChaCha8Rng) -> Vec<f64>>;

/// Monte-Carlo average cost over `(λ, λ̃)` pairs drawn from the prior and the outcome model.
pub fn empirical_risk(
    model: &GaussianChannelModel,
    prior: &PriorModel,
    cost: SampleCost,
    estimator: &Estimator,
    n: usize,
    seed: u64,
) -> Result<EmpiricalRisk> {
    if cost == SampleCost::Simple {
        return Err(Error::DeltaCostSampling);
    }
    if n < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let s = model.dim();
    prior.validate(s)?;
    if let Estimator::Linear(g) = estimator {
        if g.nrows() != s || g.ncols() != s {
            return Err(Error::DimensionMismatch { expected: s, got: g.nrows() });
        }
    }
    let noise = cholesky_factor(&outcome_covariance(model)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw_lambda: LambdaDraw = match prior {
        PriorModel::Gaussian { k_lambda } => {
            let l = cholesky_factor(&ingest_symmetric(k_lambda, s)?)?;
            Box::new(move |rng| normal_vector(rng, &l).iter().copied().collect())
        }
        PriorModel::Discrete { points, weights } => {
            let points = points.clone();
            let cumulative: Vec<f64> = weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            Box::new(move |rng| {
                let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
                let k = cumulative.partition_point(|&c| c <= u).min(points.len() - 1);
                points[k].clone()
            })
        }
        PriorModel::WideFlat { .. } => return Err(Error::InvalidInput("the wide flat prior cannot be sampled".into())),
    };
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = draw_lambda(&mut rng);
        let d = normal_vector(&mut rng, &noise);
        let outcome: Vec<f64> = lambda.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
        let estimate: Vec<f64> = match estimator {
            Estimator::Raw => outcome.clone(),
            Estimator::Linear(g) => (g * RVec::from_column_slice(&outcome)).iter().copied().collect(),
        };
        let c = match cost {
            SampleCost::Quadratic => estimate.iter().zip(&lambda).map(|(a, b)| (a - b).powi(2)).sum(),
            SampleCost::Zero => 0.0,
            SampleCost::Simple => unreachable!(),
        };
        records.push(SampleRecord { draw_index: i, lambda, outcome, cost: c });
    }
    let mean = records.iter().map(|r| r.cost).sum::<f64>() / n as f64;
    let var = records.iter().map(|r| (r.cost - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(EmpiricalRisk { estimate: mean, stderr: (var / n as f64).sqrt(), records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_for_one_and_two_modes() {
        let c = CommutationMatrix::canonical(&[1.0]).unwrap();
        let b = solve_b(&c).unwrap();
        assert_eq!(b, RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        // the opposite reflection is equally valid
        assert!(check_b(&RMat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]), &c).is_ok());
        let c2 = CommutationMatrix::canonical(&[1.0, 0.5]).unwrap();
        let b2 = solve_b(&c2).unwrap();
        assert_eq!(b2, RMat::from_diagonal(&RVec::from_vec(vec![1.0, -1.0, 1.0, -1.0])));
        // a block-free ordering is rejected
        let skew = RMat::from_row_slice(
            4,
            4,
            &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
        );
        assert!(solve_b(&CommutationMatrix::new(skew).unwrap()).is_err());
    }

    #[test]
    fn theta_commutes_on_trusted_block() {
        let c = CommutationMatrix::canonical(&[1.0]).unwrap();
        let scheme = AncillaScheme::new(&c, 20).unwrap();
        assert!(scheme.commutation_defect(12).unwrap() < 1e-10);
    }

    #[test]
    fn wrong_b_commutator_scales_with_c() {
        for &c in &[1.0, 0.25] {
            let cm = CommutationMatrix::canonical(&[c]).unwrap();
            let scheme = AncillaScheme::with_b(&cm, RMat::identity(2, 2), 12).unwrap();
            let d = scheme.commutation_defect(6).unwrap();
            assert!((d - 2.0 * c).abs() < 1e-10, "{d}");
        }
    }

    #[test]
    fn theta_moments_are_husimi() {
        let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
        let c = CommutationMatrix::canonical(&[1.0]).unwrap();
        let scheme = AncillaScheme::new(&c, 30).unwrap();
        let rho = GaussianFamily::new(scheme.space(), &model.q).unwrap().state(&[0.5, -0.3]).unwrap().rho;
        let (mean, cov) = scheme.theta_moments(&rho).unwrap();
        assert!((mean[0] - 0.5).abs() < 1e-9 && (mean[1] + 0.3).abs() < 1e-9, "{mean:?}");
        let expect = outcome_covariance(&model).unwrap();
        assert!(max_abs_real(&(&cov - &expect)) < 1e-8, "{cov}");
        assert!((expect[(0, 0)] - 1.5819767068693265).abs() < 1e-12);
    }

    #[test]
    fn routes_agree() {
        let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
        let sp = FockSpace::single(1.0, 40).unwrap();
        let grid = DecisionGrid::centered(2, 7.0, 0.25).unwrap();
        let d = outcome_distribution(&model, &[2.0, 1.0], &grid, &sp).unwrap();
        assert!(d.sup_difference < 1e-6, "{}", d.sup_difference);
        assert!((d.mass_a - 1.0).abs() < 1e-4);
        let narrow = DecisionGrid::centered(2, 2.0, 0.25).unwrap();
        assert!(matches!(outcome_distribution(&model, &[0.0, 0.0], &narrow, &sp), Err(Error::GridClipping(_))));
    }

    #[test]
    fn sampling_is_seeded() {
        let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
        let a = sample_outcomes(&model, &[3.0, 0.0], 1000, 7).unwrap();
        let b = sample_outcomes(&model, &[3.0, 0.0], 1000, 7).unwrap();
        let c = sample_outcomes(&model, &[3.0, 0.0], 1000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let n = a.len() as f64;
        let mean: f64 = a.iter().map(|s| s.lambda_tilde[0]).sum::<f64>() / n;
        assert!((mean - 3.0).abs() < 3.0 * (1.5819767068693265_f64 / n).sqrt());
    }

    #[test]
    fn sample_covariance_band() {
        let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
        let n = 100_000;
        let xs = sample_outcomes(&model, &[0.0, 0.0], n, 11).unwrap();
        let var = 1.5819767068693265;
        for k in 0..2 {
            let v: f64 = xs.iter().map(|s| s.lambda_tilde[k].powi(2)).sum::<f64>() / n as f64;
            // var of the sample variance of a gaussian is 2σ⁴/n
            assert!((v - var).abs() < 3.0 * var * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn empirical_risk_paths() {
        let model = GaussianChannelModel::isotropic(1.0, 5.0).unwrap();
        let kl = RMat::identity(2, 2) * 2.0;
        let prior = PriorModel::Gaussian { k_lambda: kl.clone() };
        let err = empirical_risk(&model, &prior, SampleCost::Simple, &Estimator::Raw, 10, 1).unwrap_err();
        assert!(matches!(err, Error::DeltaCostSampling));
        let z = empirical_risk(&model, &prior, SampleCost::Zero, &Estimator::Raw, 10, 1).unwrap();
        assert_eq!((z.estimate, z.stderr), (0.0, 0.0));
        // raw outcomes: MSE = Tr(K + ½|C|)
        let raw = empirical_risk(&model, &prior, SampleCost::Quadratic, &Estimator::Raw, 20_000, 3).unwrap();
        let expect = outcome_covariance(&model).unwrap().trace();
        assert!((raw.estimate - expect).abs() < 3.0 * raw.stderr);
        let g = posterior_mean_gain(&model, &kl).unwrap();
        let pm = empirical_risk(&model, &prior, SampleCost::Quadratic, &Estimator::Linear(g), 20_000, 3).unwrap();
        assert!(pm.estimate < raw.estimate);
    }

    #[test]
    fn discrete_prior_sampling_hits_points() {
        let model = GaussianChannelModel::isotropic(1.0, 5.0).unwrap();
        let prior = PriorModel::Discrete { points: vec![vec![1.0, 0.0], vec![-1.0, 0.0]], weights: vec![0.25, 0.75] };
        let r = empirical_risk(&model, &prior, SampleCost::Zero, &Estimator::Raw, 4000, 5).unwrap();
        let ones = r.records.iter().filter(|s| s.lambda[0] > 0.0).count() as f64 / 4000.0;
        assert!((ones - 0.25).abs() < 0.03);
    }
}
