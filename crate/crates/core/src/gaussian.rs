//! Phase-space algebra of the Gaussian channel family
//! `ρ(λ) = exp[Γ − (x − λ)ᵀ Q (x − λ)]` with `[x, xᵀ] = C = iA`.
//!
//! Everything here is exact matrix-level algebra: no Hilbert-space
//! truncation. Functions of `QC` are evaluated through the Hermitian
//! similarity `QC = g M g⁻¹`, `g = Q^{1/2}`, `M = i g A g`, whose eigenvalues
//! come in real pairs `±m_k` (the mode frequencies).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{
    abs_of_imaginary, eigh, eigh_real, max_abs, max_abs_real, real_sym_fn, split_real, symmetric_defect, to_complex,
    CMat, RMat, I,
};

/// Mode frequencies above this overflow `sinh` in practice; such states are pure.
pub const MAX_MODE_FREQUENCY: f64 = 30.0;

/// Largest accepted asymmetry (antisymmetry) defect on ingestion.
pub const INGEST_TOL: f64 = 1e-12;

/// Relative threshold below which the ν-covariance counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

fn ingest_tol(m: &RMat) -> f64 {
    INGEST_TOL * max_abs_real(m).max(1.0)
}

/// The c-number commutation matrix `C = iA` with real antisymmetric, invertible `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutationMatrix {
    a: RMat,
    ingest_defect: f64,
}

impl CommutationMatrix {
    pub fn new(a: RMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidInput("commutation matrix must be square".into()));
        }
        if a.nrows() == 0 || !a.nrows().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "phase-space dimension must be even and positive, got {}",
                a.nrows()
            )));
        }
        let defect = max_abs_real(&(&a + a.transpose()));
        if defect > ingest_tol(&a) {
            return Err(Error::NotSymmetric { kind: "antisymmetric", defect });
        }
        let a = (&a - a.transpose()) * 0.5;
        if a.clone().lu().determinant().abs() < 1e-300 {
            return Err(Error::SingularCommutator);
        }
        Ok(Self { a, ingest_defect: defect })
    }

    /// Block-diagonal `⊕_k c_k J`, `J = [[0, 1], [−1, 0]]`.
    pub fn canonical(scales: &[f64]) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput("commutator scales must be positive".into()));
        }
        let s = 2 * scales.len();
        let mut a = RMat::zeros(s, s);
        for (k, &c) in scales.iter().enumerate() {
            a[(2 * k, 2 * k + 1)] = c;
            a[(2 * k + 1, 2 * k)] = -c;
        }
        Self::new(a)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    /// The real antisymmetric matrix `A` with `C = iA`.
    pub fn a(&self) -> &RMat {
        &self.a
    }

    pub fn ingest_defect(&self) -> f64 {
        self.ingest_defect
    }

    /// `C = iA` as a complex matrix.
    pub fn complex(&self) -> CMat {
        to_complex(&self.a) * I
    }

    /// `|C|`, the covariance of the isotropic vacuum is `|C|/2`.
    pub fn abs(&self) -> RMat {
        abs_of_imaginary(&self.a)
    }

    /// Per-mode scales `c_k` when `A` is exactly `⊕_k c_k J`.
    pub fn canonical_scales(&self) -> Option<Vec<f64>> {
        let s = self.dim();
        let mut scales = Vec::with_capacity(s / 2);
        for i in 0..s {
            for j in 0..s {
                let v = self.a[(i, j)];
                let in_block = i / 2 == j / 2;
                if !in_block && v != 0.0 {
                    return None;
                }
            }
        }
        for k in 0..s / 2 {
            let c = self.a[(2 * k, 2 * k + 1)];
            if !(c > 0.0) {
                return None;
            }
            scales.push(c);
        }
        Some(scales)
    }

    /// `det^{1/2}|2πC|`: phase-space volume of one quantum cell.
    pub fn cell_volume(&self) -> f64 {
        let (vals, _) = eigh_real(&(&self.a * self.a.transpose()));
        vals.iter().map(|v| (2.0 * PI * v.max(0.0).sqrt()).sqrt()).product()
    }
}

/// Gaussian channel `ρ(λ) = exp[Γ − (x − λ)ᵀ Q (x − λ)]`, `λ ∈ ℝˢ`.
#[derive(Clone, Debug)]
pub struct GaussianChannelModel {
    pub c: CommutationMatrix,
    pub q: RMat,
    ingest_defect: f64,
}

impl GaussianChannelModel {
    pub fn new(c: CommutationMatrix, q: RMat) -> Result<Self> {
        let q_sym = ingest_symmetric(&q, c.dim())?;
        let defect = symmetric_defect(&q);
        check_positive(&q_sym)?;
        Ok(Self { c, q: q_sym, ingest_defect: defect })
    }

    /// Single-mode convenience constructor, `Q = q·I₂`, `A = c·J`.
    pub fn isotropic(c: f64, q: f64) -> Result<Self> {
        Self::new(CommutationMatrix::canonical(&[c])?, RMat::identity(2, 2) * q)
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn ingest_defect(&self) -> f64 {
        self.ingest_defect.max(self.c.ingest_defect())
    }
}

/// Signal prior over `Λ = ℝˢ` (mean zero for the Gaussian case).
#[derive(Clone, Debug)]
pub enum PriorModel {
    /// Constant density on a centered square of the given half-width, zero outside.
    WideFlat {
        support_half_width: f64,
    },
    Gaussian {
        k_lambda: RMat,
    },
    Discrete {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl PriorModel {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            PriorModel::WideFlat { support_half_width } => {
                if !(*support_half_width > 0.0) {
                    return Err(Error::InvalidInput("flat prior support must be positive".into()));
                }
            }
            PriorModel::Gaussian { k_lambda } => {
                let k = ingest_symmetric(k_lambda, dim)?;
                check_positive(&k)?;
            }
            PriorModel::Discrete { points, weights } => {
                if points.len() != weights.len() || points.is_empty() {
                    return Err(Error::InvalidInput("discrete prior needs one weight per point".into()));
                }
                if let Some(p) = points.iter().find(|p| p.len() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
                }
                if weights.iter().any(|&w| !(w >= 0.0)) {
                    return Err(Error::InvalidInput("prior weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("prior weights must sum to 1, got {total}")));
                }
            }
        }
        Ok(())
    }
}

/// Symmetrize a matrix that is symmetric up to `INGEST_TOL`.
pub fn ingest_symmetric(m: &RMat, dim: usize) -> Result<RMat> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
    }
    let defect = symmetric_defect(m);
    if defect > ingest_tol(m) {
        return Err(Error::NotSymmetric { kind: "symmetric", defect });
    }
    Ok((m + m.transpose()) * 0.5)
}

fn check_positive(m: &RMat) -> Result<()> {
    let (vals, _) = eigh_real(m);
    if !(vals[0] > 0.0) {
        return Err(Error::NotPositive { min_eig: vals[0] });
    }
    Ok(())
}

/// A function of `QC` (or `CQ`) together with the mode frequencies `m_k > 0`.
#[derive(Clone, Debug)]
pub struct QcFunction {
    pub value: CMat,
    pub frequencies: Vec<f64>,
}

struct Similarity {
    g: RMat,
    g_inv: RMat,
    m: CMat,
}

fn similarity(q: &RMat, c: &CommutationMatrix) -> Result<Similarity> {
    let q = ingest_symmetric(q, c.dim())?;
    check_positive(&q)?;
    let g = real_sym_fn(&q, f64::sqrt);
    let g_inv = real_sym_fn(&q, |x| 1.0 / x.sqrt());
    let m = to_complex(&(&g * c.a() * &g)) * I;
    Ok(Similarity { g, g_inv, m })
}

fn positive_half(values: &[f64]) -> Vec<f64> {
    values[values.len() / 2..].to_vec()
}

/// `f(QC) = g f(M) g⁻¹`.
pub fn matrix_fn_qc(q: &RMat, c: &CommutationMatrix, f: impl Fn(f64) -> f64) -> Result<QcFunction> {
    let sim = similarity(q, c)?;
    let e = eigh(&sim.m);
    let fm = e.apply(f);
    let value = to_complex(&sim.g) * fm * to_complex(&sim.g_inv);
    Ok(QcFunction { value, frequencies: positive_half(&e.values) })
}

/// `f(CQ) = g⁻¹ f(M) g`.
pub fn matrix_fn_cq(q: &RMat, c: &CommutationMatrix, f: impl Fn(f64) -> f64) -> Result<QcFunction> {
    let sim = similarity(q, c)?;
    let e = eigh(&sim.m);
    let fm = e.apply(f);
    let value = to_complex(&sim.g_inv) * fm * to_complex(&sim.g);
    Ok(QcFunction { value, frequencies: positive_half(&e.values) })
}

/// Positive mode frequencies `m_k` of `Q` against `C`.
pub fn mode_frequencies(model: &GaussianChannelModel) -> Result<Vec<f64>> {
    let sim = similarity(&model.q, &model.c)?;
    let freqs = positive_half(&eigh(&sim.m).values);
    for &m in &freqs {
        if !(m > 1e-300) {
            return Err(Error::DegenerateForm(m));
        }
        if m > MAX_MODE_FREQUENCY {
            return Err(Error::IllConditioned { freq: m, limit: MAX_MODE_FREQUENCY });
        }
    }
    Ok(freqs)
}

/// Normalization constant `Γ = ln det^{1/2}|2 sinh(√Q C √Q)| = Σ_k ln(2 sinh m_k)`.
pub fn gamma_norm(model: &GaussianChannelModel) -> Result<f64> {
    Ok(mode_frequencies(model)?.iter().map(|&m| (2.0 * m.sinh()).ln()).sum())
}

/// Symmetrized covariance `K = ½ C coth(QC)`.
pub fn covariance(model: &GaussianChannelModel) -> Result<RMat> {
    mode_frequencies(model)?;
    let coth = matrix_fn_qc(&model.q, &model.c, |x| 1.0 / x.tanh())?;
    let k = model.c.complex() * coth.value * C64::new(0.5, 0.0);
    let (k, _imag) = split_real(&k);
    Ok((&k + k.transpose()) * 0.5)
}

/// Smallest eigenvalue of `K + C/2`, nonnegative for every physical state.
pub fn heisenberg_margin(k: &RMat, c: &CommutationMatrix) -> f64 {
    let m = to_complex(k) + c.complex() * C64::new(0.5, 0.0);
    eigh(&m).min()
}

/// Symplectic eigenvalues of `K` relative to `C`, as multiples of the
/// commutator scale (`½` is the vacuum level).
pub fn symplectic_eigenvalues(k: &RMat, c: &CommutationMatrix) -> Result<Vec<f64>> {
    let k = ingest_symmetric(k, c.dim())?;
    check_positive(&k)?;
    let s = real_sym_fn(&k, f64::sqrt);
    let a_inv = c.a().clone().try_inverse().ok_or(Error::SingularCommutator)?;
    let h = to_complex(&(&s * a_inv * &s)) * I;
    Ok(positive_half(&eigh(&h).values))
}

/// Inverse of [`covariance`]: `Q̃ = coth⁻¹(2C⁻¹K)·C⁻¹`.
pub fn q_from_covariance(k: &RMat, c: &CommutationMatrix) -> Result<RMat> {
    let k = ingest_symmetric(k, c.dim())?;
    check_positive(&k)?;
    let s = real_sym_fn(&k, f64::sqrt);
    let s_inv = real_sym_fn(&k, |x| 1.0 / x.sqrt());
    let a_inv = c.a().clone().try_inverse().ok_or(Error::SingularCommutator)?;
    // C⁻¹ = −i A⁻¹
    let c_inv = to_complex(&a_inv) * (-I);
    let h = to_complex(&s) * &c_inv * to_complex(&s) * C64::new(2.0, 0.0);
    let e = eigh(&h);
    let min_abs = e.values.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if !(min_abs > 1.0 + INGEST_TOL) {
        return Err(Error::UnphysicalCovariance { sympl: min_abs * 0.5, vacuum: 0.5 });
    }
    let acoth = e.apply(|h| 0.5 * ((h + 1.0) / (h - 1.0)).ln());
    let q = to_complex(&s_inv) * acoth * to_complex(&s) * c_inv;
    let (q, _imag) = split_real(&q);
    Ok((&q + q.transpose()) * 0.5)
}

/// Largest eigenvalue of `ρ(λ)`: `μ₀ = Π_k (1 − e^{−2 m_k})`.
pub fn mu0_top_eigenvalue(model: &GaussianChannelModel) -> Result<f64> {
    Ok(mode_frequencies(model)?.iter().map(|&m| -(-2.0 * m).exp_m1()).product())
}

/// Minimal average risk for the simple cost with a wide flat prior, `−μ₀ / det^{1/2}|2πC|`.
pub fn simple_cost_risk(model: &GaussianChannelModel) -> Result<f64> {
    Ok(-mu0_top_eigenvalue(model)? / model.c.cell_volume())
}

/// Classical (commuting) limit of [`simple_cost_risk`]: `−det^{1/2}(Q/π)`.
pub fn classical_simple_cost_risk(q: &RMat) -> f64 {
    -(q / PI).determinant().sqrt()
}

/// Derived matrices of the quadratic-cost solution for a Gaussian prior `K_λ`.
#[derive(Clone, Debug)]
pub struct QuadraticCostDerived {
    /// Channel covariance `K`.
    pub k: RMat,
    /// `K + K_λ`, covariance of the unconditional state `ρ̃`.
    pub k_total: RMat,
    /// Quadratic form of `ρ̃ = exp(Γ̃ − xᵀQ̃x)`.
    pub q_tilde: RMat,
    /// `û = V x̂`.
    pub v: RMat,
    /// `K_λ(K + K_λ)⁻¹`, the gain of `û₀`.
    pub gain0: RMat,
    /// `C₀ = i·a0`, commutator of `û₀`.
    pub a0: RMat,
    pub q_tilde0: RMat,
    /// `C_u = V C Vᵀ = i·a_u`.
    pub a_u: RMat,
    /// `Q̃_u = V⁻ᵀ Q̃ V⁻¹`.
    pub q_tilde_u: RMat,
    pub abs_cu: RMat,
    /// `K̃_u = V (K + K_λ) Vᵀ`.
    pub k_u: RMat,
    /// `r₀ = ½ Tr|C_u|`.
    pub r0: f64,
    /// `Σ_ν = K̃_u − ½|C_u|`.
    pub sigma_nu: RMat,
    pub sigma_nu_min_eig: f64,
    pub degenerate: bool,
}

impl QuadraticCostDerived {
    pub fn commutation_u(&self) -> Result<CommutationMatrix> {
        CommutationMatrix::new(self.a_u.clone())
    }

    /// `exp(−C_u Q̃_u)`, the factor in `ρ̃^{−1/2} û = exp(−C_u Q̃_u) û ρ̃^{−1/2}`.
    pub fn exchange_factor(&self) -> Result<CMat> {
        Ok(matrix_fn_cq(&self.q_tilde_u, &self.commutation_u()?, |x| (-x).exp())?.value)
    }

    /// `V` recomputed as `cosh(C₀Q̃₀)·K_λ(K + K_λ)⁻¹`.
    pub fn v_via_u0(&self) -> Result<RMat> {
        let c0 = CommutationMatrix::new(self.a0.clone())?;
        let cosh = matrix_fn_cq(&self.q_tilde0, &c0, f64::cosh)?.value;
        let (cosh, _) = split_real(&cosh);
        Ok(cosh * &self.gain0)
    }
}

/// The derivation chain `ρ̃ → Q̃ → V → C_u → K̃_u → r₀ → Σ_ν`.
///
/// A non-positive `Σ_ν` is not an error here: the result carries
/// `degenerate = true` and [`quadratic_min_risk`] refuses it.
pub fn quadratic_cost_derived(model: &GaussianChannelModel, k_lambda: &RMat) -> Result<QuadraticCostDerived> {
    let s = model.dim();
    let k_lambda = ingest_symmetric(k_lambda, s)?;
    check_positive(&k_lambda)?;
    let k = covariance(model)?;
    let k_total = &k + &k_lambda;
    let kt_inv = k_total.clone().try_inverse().ok_or_else(|| Error::InvalidInput("K + K_λ is singular".into()))?;
    let q_tilde = q_from_covariance(&k_total, &model.c)?;

    let cosh = matrix_fn_cq(&q_tilde, &model.c, f64::cosh)?.value;
    let (cosh, _) = split_real(&cosh);
    let gain0 = &k_lambda * &kt_inv;
    let v = &gain0 * cosh;

    let a = model.c.a();
    let a0 = &gain0 * a * gain0.transpose();
    let g_inv = gain0.clone().try_inverse().ok_or_else(|| Error::InvalidInput("posterior gain is singular".into()))?;
    let q_tilde0 = sym(&(g_inv.transpose() * &q_tilde * &g_inv));

    let a_u = &v * a * v.transpose();
    let v_inv = v.clone().try_inverse().ok_or_else(|| Error::InvalidInput("V is singular".into()))?;
    let q_tilde_u = sym(&(v_inv.transpose() * &q_tilde * &v_inv));
    let abs_cu = abs_of_imaginary(&a_u);
    let k_u = sym(&(&v * &k_total * v.transpose()));
    let r0 = 0.5 * abs_cu.trace();
    let sigma_nu = sym(&(&k_u - &abs_cu * 0.5));
    let (vals, _) = eigh_real(&sigma_nu);
    let norm = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min_eig = vals[0];
    let degenerate = !(min_eig > DEGENERACY_TOL * norm);

    Ok(QuadraticCostDerived {
        k,
        k_total,
        q_tilde,
        v,
        gain0,
        a0,
        q_tilde0,
        a_u,
        q_tilde_u,
        abs_cu,
        k_u,
        r0,
        sigma_nu,
        sigma_nu_min_eig: min_eig,
        degenerate,
    })
}

/// Minimal quadratic risk `Tr(K_λ − K̃_u) + r₀`.
pub fn quadratic_min_risk(derived: &QuadraticCostDerived, k_lambda: &RMat) -> Result<f64> {
    if derived.degenerate {
        let (vals, _) = eigh_real(&derived.sigma_nu);
        let norm = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        return Err(Error::DegenerateMeasure { min_eig: derived.sigma_nu_min_eig, norm });
    }
    Ok((k_lambda - &derived.k_u).trace() + derived.r0)
}

fn sym(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Largest discrepancy between two complex matrices (test helper re-export).
pub fn complex_distance(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}
