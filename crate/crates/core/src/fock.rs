//! Truncated Fock-space oracle.
//!
//! Quadratures are `q = √(c/2)(a + a†)`, `p = −i√(c/2)(a − a†)` per mode,
//! ordered `(q₁, p₁, q₂, p₂, …)` to match `A = ⊕ c_k J`. Quadratic forms are
//! built as compressions `P (o_i o_j) P` by multiplying in a space one level
//! larger and truncating, so the undisplaced isotropic oscillator has its
//! exact spectrum and no spurious low-energy edge states appear.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{eigh, hermitian_part, to_complex, CMat, CVec, Eigh, RMat, I, ONE, ZERO};

pub const DEFAULT_CAP: usize = 4096;

/// A state or projector is trusted when its top-two-level population is below this.
pub const TRUNCATION_THRESHOLD: f64 = 1e-8;

/// Ground levels closer than this are considered ill-separated.
pub const GROUND_GAP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct FockSpace {
    scales: Vec<f64>,
    levels: usize,
    cap: usize,
}

impl FockSpace {
    pub fn new(scales: &[f64], levels: usize) -> Result<Self> {
        Self::with_cap(scales, levels, DEFAULT_CAP)
    }

    pub fn with_cap(scales: &[f64], levels: usize, cap: usize) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidInput("commutator scales must be positive".into()));
        }
        if levels < 2 {
            return Err(Error::InvalidInput("need at least 2 levels per mode".into()));
        }
        let space = Self { scales: scales.to_vec(), levels, cap };
        let dim = space.dim_checked()?;
        if dim > cap {
            return Err(Error::CapExceeded { dim, cap });
        }
        Ok(space)
    }

    pub fn single(c: f64, levels: usize) -> Result<Self> {
        Self::new(&[c], levels)
    }

    fn dim_checked(&self) -> Result<usize> {
        self.levels.checked_pow(self.scales.len() as u32).ok_or(Error::CapExceeded { dim: usize::MAX, cap: self.cap })
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(self.scales.len() as u32)
    }

    pub fn n_modes(&self) -> usize {
        self.scales.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of phase-space coordinates `s = 2·modes`.
    pub fn phase_dim(&self) -> usize {
        2 * self.n_modes()
    }

    /// Per-mode occupation numbers of a basis index (first mode most significant).
    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let m = self.n_modes();
        let mut occ = vec![0; m];
        for k in (0..m).rev() {
            occ[k] = index % self.levels;
            index /= self.levels;
        }
        occ
    }

    /// Basis indices whose every occupation is at most `max_level`.
    pub fn block(&self, max_level: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.occupations(i).iter().all(|&n| n <= max_level)).collect()
    }

    /// Basis indices touching the top two levels of any mode.
    fn edge_indices(&self) -> Vec<usize> {
        let edge = self.levels.saturating_sub(2);
        (0..self.dim()).filter(|&i| self.occupations(i).iter().any(|&n| n >= edge)).collect()
    }

    fn extended(&self) -> FockSpace {
        FockSpace { scales: self.scales.clone(), levels: self.levels + 1, cap: usize::MAX }
    }

    /// Compress an operator on the one-level-larger space back onto this space.
    fn restrict(&self, ext: &CMat) -> CMat {
        let big = self.extended();
        let keep: Vec<usize> =
            (0..big.dim()).filter(|&i| big.occupations(i).iter().all(|&n| n < self.levels)).collect();
        CMat::from_fn(keep.len(), keep.len(), |i, j| ext[(keep[i], keep[j])])
    }

    fn mode_ops(&self, c: f64) -> (CMat, CMat) {
        let n = self.levels;
        let mut a = CMat::zeros(n, n);
        for k in 1..n {
            a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        let ad = a.adjoint();
        let s = C64::new((c / 2.0).sqrt(), 0.0);
        let q = (&a + &ad) * s;
        let p = (&a - &ad) * (s * (-I));
        (q, p)
    }

    fn embed(&self, op: &CMat, mode: usize) -> CMat {
        let id = CMat::identity(self.levels, self.levels);
        let mut out = if mode == 0 { op.clone() } else { id.clone() };
        for k in 1..self.n_modes() {
            let factor = if k == mode { op } else { &id };
            out = out.kronecker(factor);
        }
        out
    }

    /// Truncated quadrature matrices `x₁ … x_s`.
    pub fn quadratures(&self) -> Vec<CMat> {
        let mut out = Vec::with_capacity(self.phase_dim());
        for (k, &c) in self.scales.iter().enumerate() {
            let (q, p) = self.mode_ops(c);
            out.push(self.embed(&q, k));
            out.push(self.embed(&p, k));
        }
        out
    }

    /// Linear combinations `o_i = Σ_j L_ij x_j`.
    pub fn linear_ops(&self, l: &CMat) -> Result<Vec<CMat>> {
        let x = self.quadratures();
        combine(&x, l)
    }

    /// Compressed quadratic form `Σ_ij F_ij ½{o_i − λ_i, o_j − λ_j}` with `o = L x`.
    ///
    /// Hermitian when `L` is real; for complex `L` the result is the literal
    /// (generally non-Hermitian) operator.
    pub fn quadratic_form(&self, form: &RMat, l: &CMat, center: &[f64]) -> Result<CMat> {
        Ok(DisplacedForm::new(self, form, l)?.at(center))
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[0] = ONE;
        v
    }

    /// Displacement operator `D(λ)` with `D† x D = x + λ`.
    pub fn displacement(&self, lambda: &[f64]) -> Result<CMat> {
        let s = self.phase_dim();
        if lambda.len() != s {
            return Err(Error::DimensionMismatch { expected: s, got: lambda.len() });
        }
        // D = exp(−i μᵀx), μ = A⁻¹λ; for A = cJ this is μ = (−λ₂, λ₁)/c.
        let x = self.quadratures();
        let mut gen = CMat::zeros(self.dim(), self.dim());
        for (k, &c) in self.scales.iter().enumerate() {
            let (l1, l2) = (lambda[2 * k], lambda[2 * k + 1]);
            gen += &x[2 * k] * C64::new(-l2 / c, 0.0) + &x[2 * k + 1] * C64::new(l1 / c, 0.0);
        }
        Ok(unitary_exp(&gen))
    }

    /// Population of the top two levels of any mode.
    pub fn edge_mass(&self, rho: &CMat) -> f64 {
        self.edge_indices().iter().map(|&i| rho[(i, i)].re).sum()
    }

    pub fn vector_edge_mass(&self, v: &CVec) -> f64 {
        let norm = v.norm_squared();
        self.edge_indices().iter().map(|&i| v[i].norm_sqr()).sum::<f64>() / norm
    }
}

fn combine(x: &[CMat], l: &CMat) -> Result<Vec<CMat>> {
    if l.ncols() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: l.ncols() });
    }
    let dim = x[0].nrows();
    Ok((0..l.nrows())
        .map(|i| {
            let mut o = CMat::zeros(dim, dim);
            for (j, xj) in x.iter().enumerate() {
                let w = l[(i, j)];
                if w != ZERO {
                    o += xj * w;
                }
            }
            o
        })
        .collect())
}

/// `exp(−i H)` for Hermitian `H`.
pub fn unitary_exp(h: &CMat) -> CMat {
    let e = eigh(h);
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for (k, &v) in e.values.iter().enumerate() {
        let phase = C64::new(0.0, -v).exp();
        for i in 0..n {
            scaled[(i, k)] *= phase;
        }
    }
    &scaled * e.vectors.adjoint()
}

/// A quadratic form with precomputed pieces so that displacing its center is cheap:
/// `H(λ) = H₀ − 2 Σ_ij F_ij λ_i o_j + λᵀFλ`.
#[derive(Clone, Debug)]
pub struct DisplacedForm {
    base: CMat,
    linear: Vec<CMat>,
    form: RMat,
}

impl DisplacedForm {
    pub fn new(space: &FockSpace, form: &RMat, l: &CMat) -> Result<Self> {
        let s = l.nrows();
        if form.nrows() != s || form.ncols() != s {
            return Err(Error::DimensionMismatch { expected: s, got: form.nrows() });
        }
        let form = (form + form.transpose()) * 0.5;
        let ext = space.extended();
        let o_ext = combine(&ext.quadratures(), l)?;
        let dim = o_ext[0].nrows();
        let mut base_ext = CMat::zeros(dim, dim);
        for i in 0..s {
            for j in i..s {
                let f = form[(i, j)];
                if f == 0.0 {
                    continue;
                }
                let sym = &o_ext[i] * &o_ext[j] + &o_ext[j] * &o_ext[i];
                let w = if i == j { 0.5 * f } else { f };
                base_ext += sym * C64::new(w, 0.0);
            }
        }
        let base = space.restrict(&base_ext);
        let linear = o_ext.iter().map(|o| space.restrict(o)).collect();
        Ok(Self { base, linear, form })
    }

    /// Isotropic-in-`o` Hermitian form `Σ_ij F_ij ½{x_i − λ_i, x_j − λ_j}`.
    pub fn hermitian(space: &FockSpace, form: &RMat) -> Result<Self> {
        Self::new(space, form, &CMat::identity(space.phase_dim(), space.phase_dim()))
    }

    pub fn at(&self, center: &[f64]) -> CMat {
        let s = self.linear.len();
        let mut h = self.base.clone();
        let mut constant = 0.0;
        for i in 0..s {
            for j in 0..s {
                let f = self.form[(i, j)];
                if f == 0.0 {
                    continue;
                }
                let li = center[i];
                if li != 0.0 {
                    h -= &self.linear[j] * C64::new(2.0 * f * li, 0.0);
                }
                constant += li * f * center[j];
            }
        }
        for k in 0..h.nrows() {
            h[(k, k)] += constant;
        }
        h
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }
}

/// A Gaussian density matrix `exp(−H(λ))/Z` in the truncated space.
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub rho: CMat,
    pub trace: f64,
    pub edge_mass: f64,
    pub top_eigenvalue: f64,
    pub top_vector: CVec,
}

/// The displaced family `ρ(λ)` for a fixed `Q`, normalized by the undisplaced trace.
#[derive(Clone, Debug)]
pub struct GaussianFamily {
    space: FockSpace,
    form: DisplacedForm,
    log_z: f64,
}

impl GaussianFamily {
    pub fn new(space: &FockSpace, q: &RMat) -> Result<Self> {
        let form = DisplacedForm::hermitian(space, q)?;
        let e = eigh(&form.at(&vec![0.0; space.phase_dim()]));
        let shift = e.min();
        let z: f64 = e.values.iter().map(|&v| (shift - v).exp()).sum();
        // ln Z = −shift + ln Σ exp(shift − e_k)
        let log_z = z.ln() - shift;
        Ok(Self { space: space.clone(), form, log_z })
    }

    /// `−ln Tr exp(−H)`: the oracle value of the normalization constant `Γ`.
    pub fn gamma(&self) -> f64 {
        -self.log_z
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// State without the truncation check.
    pub fn state_unchecked(&self, lambda: &[f64]) -> GaussianState {
        let e = eigh(&hermitian_part(&self.form.at(lambda)));
        let rho = e.apply(|v| (-v - self.log_z).exp());
        let trace: f64 = e.values.iter().map(|&v| (-v - self.log_z).exp()).sum();
        GaussianState {
            edge_mass: self.space.edge_mass(&rho),
            rho,
            trace,
            top_eigenvalue: (-e.min() - self.log_z).exp(),
            top_vector: e.column(0),
        }
    }

    pub fn state(&self, lambda: &[f64]) -> Result<GaussianState> {
        let st = self.state_unchecked(lambda);
        if st.edge_mass > TRUNCATION_THRESHOLD {
            return Err(Error::Truncation {
                mass: st.edge_mass,
                threshold: TRUNCATION_THRESHOLD,
                dim: self.space.levels(),
            });
        }
        Ok(st)
    }
}

/// `ρ(λ) = exp[Γ − (x − λ)ᵀQ(x − λ)]` on the truncated space.
pub fn gaussian_state(space: &FockSpace, q: &RMat, lambda: &[f64]) -> Result<GaussianState> {
    if lambda.len() != space.phase_dim() {
        return Err(Error::DimensionMismatch { expected: space.phase_dim(), got: lambda.len() });
    }
    GaussianFamily::new(space, q)?.state(lambda)
}

/// Rank-one ground projector `ψψ†` of a Hermitian quadratic form.
#[derive(Clone, Debug)]
pub struct GroundProjector {
    pub vector: CVec,
    pub eigenvalue: f64,
    pub gap: f64,
    pub edge_mass: f64,
}

impl GroundProjector {
    pub fn matrix(&self) -> CMat {
        &self.vector * self.vector.adjoint()
    }

    fn from_eigh(space: &FockSpace, e: &Eigh) -> Self {
        let vector = e.column(0);
        GroundProjector {
            edge_mass: space.vector_edge_mass(&vector),
            eigenvalue: e.values[0],
            gap: e.values.get(1).map_or(f64::INFINITY, |v| v - e.values[0]),
            vector,
        }
    }
}

/// Family of ground projectors of `Σ F_ij ½{o_i − λ_i, o_j − λ_j}` over centers `λ`.
#[derive(Clone, Debug)]
pub struct GroundFamily {
    space: FockSpace,
    form: DisplacedForm,
}

impl GroundFamily {
    /// `ops` maps quadratures to the (Hermitian) operators `o = L x`; `L` must be real.
    pub fn new(space: &FockSpace, form: &RMat, ops: &RMat) -> Result<Self> {
        let form = DisplacedForm::new(space, form, &to_complex(ops))?;
        Ok(Self { space: space.clone(), form })
    }

    /// Coherent-state family: `F = I`, `o = x`.
    pub fn coherent(space: &FockSpace) -> Result<Self> {
        let s = space.phase_dim();
        Self::new(space, &RMat::identity(s, s), &RMat::identity(s, s))
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn at_unchecked(&self, center: &[f64]) -> GroundProjector {
        let e = eigh(&hermitian_part(&self.form.at(center)));
        GroundProjector::from_eigh(&self.space, &e)
    }

    pub fn at(&self, center: &[f64]) -> Result<GroundProjector> {
        let g = self.at_unchecked(center);
        if g.gap < GROUND_GAP_TOL {
            return Err(Error::IllSeparatedGround(g.gap));
        }
        Ok(g)
    }

    /// The form itself at `center` (Hermitian part).
    pub fn operator(&self, center: &[f64]) -> CMat {
        hermitian_part(&self.form.at(center))
    }
}

/// Ground projector of `Σ F_ij ½{o_i − λ̃_i, o_j − λ̃_j}`, `o = L x`.
pub fn ground_projector(space: &FockSpace, form: &RMat, ops: &RMat, center: &[f64]) -> Result<GroundProjector> {
    GroundFamily::new(space, form, ops)?.at(center)
}

/// Gibbs state `exp(−(H − E₀)/ε)/Tr` of a Hermitian form; tends to the ground projector as `ε → 0`.
pub fn zero_temperature_state(h: &CMat, epsilon: f64) -> CMat {
    let e = eigh(h);
    let e0 = e.min();
    let z: f64 = e.values.iter().map(|&v| (-(v - e0) / epsilon).exp()).sum();
    e.apply(|v| (-(v - e0) / epsilon).exp() / z)
}

/// `a ⊗ b` with the dimension cap enforced.
pub fn tensor_embed(a: &CMat, b: &CMat, cap: usize) -> Result<CMat> {
    let dim = a.nrows() * b.nrows();
    if dim > cap {
        return Err(Error::CapExceeded { dim, cap });
    }
    Ok(a.kronecker(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace of an operator on `H_a ⊗ H_b`, keeping one factor.
pub fn partial_trace(joint: &CMat, dims: (usize, usize), keep: Subsystem) -> Result<CMat> {
    let (da, db) = dims;
    if joint.nrows() != da * db || joint.ncols() != da * db {
        return Err(Error::DimensionMismatch { expected: da * db, got: joint.nrows() });
    }
    Ok(match keep {
        Subsystem::First => DMatrix::from_fn(da, da, |i, j| (0..db).map(|k| joint[(i * db + k, j * db + k)]).sum()),
        Subsystem::Second => DMatrix::from_fn(db, db, |i, j| (0..da).map(|k| joint[(k * db + i, k * db + j)]).sum()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs};
    use approx::assert_relative_eq;

    fn sub_block(m: &CMat, idx: &[usize]) -> CMat {
        CMat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
    }

    #[test]
    fn commutator_is_exact_below_the_edge() {
        let sp = FockSpace::single(1.0, 3).unwrap();
        let x = sp.quadratures();
        let comm = commutator(&x[0], &x[1]);
        let defect = comm - CMat::identity(3, 3) * I;
        for i in 0..3 {
            for j in 0..3 {
                if (i, j) != (2, 2) {
                    assert!(defect[(i, j)].norm() < 1e-14);
                }
            }
        }
        assert!(defect[(2, 2)].norm() > 1.0);

        let sp = FockSpace::single(1.0, 40).unwrap();
        let x = sp.quadratures();
        let comm = commutator(&x[0], &x[1]) - CMat::identity(40, 40) * I;
        let idx = sp.block(30);
        assert!(max_abs(&sub_block(&comm, &idx)) < 1e-12);
    }

    #[test]
    fn quadratures_scale_with_root_c() {
        let x1 = FockSpace::single(1.0, 10).unwrap().quadratures();
        let x4 = FockSpace::single(4.0, 10).unwrap().quadratures();
        assert!(max_abs(&(&x1[0] * C64::new(2.0, 0.0) - &x4[0])) < 1e-14);
        assert!(max_abs(&(&x1[1] * C64::new(2.0, 0.0) - &x4[1])) < 1e-14);
    }

    #[test]
    fn thermal_state_matches_closed_forms() {
        let sp = FockSpace::single(1.0, 40).unwrap();
        let st = gaussian_state(&sp, &(RMat::identity(2, 2) * 0.5), &[0.0, 0.0]).unwrap();
        assert!((st.trace - 1.0).abs() < 1e-8);
        assert_relative_eq!(st.top_eigenvalue, 0.6321205588285577, epsilon = 1e-12);
    }

    #[test]
    fn near_pure_state_purity() {
        let sp = FockSpace::single(1.0, 40).unwrap();
        let st = gaussian_state(&sp, &(RMat::identity(2, 2) * 5.0), &[1.0, 0.0]).unwrap();
        let purity = (&st.rho * &st.rho).trace().re;
        // Tr ρ² = tanh(m) for one mode
        assert_relative_eq!(purity, 5.0_f64.tanh(), epsilon = 1e-9);
    }

    #[test]
    fn displacement_preserves_spectrum() {
        let sp = FockSpace::single(1.0, 40).unwrap();
        let fam = GaussianFamily::new(&sp, &(RMat::identity(2, 2) * 0.5)).unwrap();
        let a = eigh(&fam.state(&[0.0, 0.0]).unwrap().rho);
        let b = eigh(&fam.state(&[2.0, 0.0]).unwrap().rho);
        for k in 0..10 {
            let (x, y) = (a.values[39 - k], b.values[39 - k]);
            assert!((x - y).abs() < 1e-9, "level {k}: {x} vs {y}");
        }
    }

    #[test]
    fn truncation_error_advises_larger_space() {
        let sp = FockSpace::single(1.0, 12).unwrap();
        let err = gaussian_state(&sp, &(RMat::identity(2, 2) * 0.5), &[4.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn ground_energy_is_half_trace_abs_c() {
        for &c in &[1.0, 0.3] {
            let sp = FockSpace::single(c, 30).unwrap();
            let g = GroundFamily::coherent(&sp).unwrap();
            for center in [[0.0, 0.0], [1.0, 1.0], [-0.7, 2.0]] {
                let p = g.at(&center).unwrap();
                assert!((p.eigenvalue - c).abs() < 1e-8, "{}", p.eigenvalue);
            }
            let p0 = g.at(&[0.0, 0.0]).unwrap();
            assert!((p0.vector[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_projector_is_displaced_vacuum() {
        let sp = FockSpace::single(1.0, 40).unwrap();
        let p = GroundFamily::coherent(&sp).unwrap().at(&[1.0, 1.0]).unwrap();
        let psi = sp.displacement(&[1.0, 1.0]).unwrap() * sp.vacuum();
        let fidelity = p.vector.dotc(&psi).norm_sqr();
        assert!(fidelity > 1.0 - 1e-8);
        let pm = p.matrix();
        assert!(max_abs(&(&pm * &pm - &pm)) < 1e-10);
        assert!((pm.trace().re - 1.0).abs() < 1e-12);
        // displacement moves the mean
        let x = sp.quadratures();
        assert!((crate::linalg::expectation(&psi, &x[0]).re - 1.0).abs() < 1e-10);
        assert!((crate::linalg::expectation(&psi, &x[1]).re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_temperature_route_reaches_projector() {
        let sp = FockSpace::single(1.0, 30).unwrap();
        let g = GroundFamily::coherent(&sp).unwrap();
        let h = g.operator(&[0.5, -0.5]);
        let rho = zero_temperature_state(&h, 0.01);
        let p = g.at(&[0.5, -0.5]).unwrap().matrix();
        assert!(crate::linalg::spectral_norm(&(rho - p)) < 1e-6);
    }

    #[test]
    fn degenerate_ground_is_rejected() {
        // F = diag(1, 0) on a single quadrature has a continuum; truncated it is nearly degenerate
        let sp = FockSpace::single(1.0, 8).unwrap();
        let form = RMat::zeros(2, 2);
        let err = ground_projector(&sp, &form, &RMat::identity(2, 2), &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::IllSeparatedGround(_)));
    }

    #[test]
    fn tensor_and_partial_trace() {
        let sp = FockSpace::single(1.0, 6).unwrap();
        let fam = |q: f64| GaussianFamily::new(&sp, &(RMat::identity(2, 2) * q)).unwrap();
        let a = fam(2.0).state_unchecked(&[0.0, 0.0]).rho;
        let b = fam(3.0).state_unchecked(&[0.0, 0.0]).rho;
        let id = CMat::identity(6, 6);
        assert!(max_abs(&(tensor_embed(&id, &id, 64).unwrap() - CMat::identity(36, 36))) < 1e-15);
        let ab = tensor_embed(&a, &b, 64).unwrap();
        assert!((ab.trace() - a.trace() * b.trace()).norm() < 1e-14);
        let back = partial_trace(&ab, (6, 6), Subsystem::First).unwrap();
        assert!(max_abs(&(back * b.trace() - &a * b.trace() * b.trace())) < 1e-12);
        let back = partial_trace(&ab, (6, 6), Subsystem::Second).unwrap();
        assert!(max_abs(&(back - &b * a.trace())) < 1e-12);
        assert!(tensor_embed(&id, &id, 35).is_err());
        assert!(partial_trace(&ab, (5, 6), Subsystem::First).is_err());
    }

    #[test]
    fn two_mode_space_layout() {
        let sp = FockSpace::new(&[1.0, 0.5], 5).unwrap();
        assert_eq!(sp.dim(), 25);
        assert_eq!(sp.occupations(7), vec![1, 2]);
        let x = sp.quadratures();
        assert_eq!(x.len(), 4);
        // different modes commute exactly
        assert!(max_abs(&commutator(&x[0], &x[3])) < 1e-14);
        assert!(FockSpace::new(&[1.0, 1.0], 70).is_err());
    }
}
