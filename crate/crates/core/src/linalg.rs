//! Dense Hermitian helpers shared by every engine.
//!
//! All functions of Hermitian operators (exp, log, inverse square root,
//! absolute value) go through one eigendecomposition path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    /// `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let fk = f(v);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn column(&self, k: usize) -> CVec {
        self.vectors.column(k).into_owned()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("empty spectrum")
    }
}

/// Hermitian part `(m + m†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of the Hermitian part of `m`.
pub fn eigh(m: &CMat) -> Eigh {
    let h = hermitian_part(m);
    let se = h.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Eigh { values, vectors }
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &RMat) -> (Vec<f64>, RMat) {
    let h = (m + m.transpose()) * 0.5;
    let se = h.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = RMat::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// `f` applied to a real symmetric matrix through its spectrum.
pub fn real_sym_fn(m: &RMat, f: impl Fn(f64) -> f64) -> RMat {
    let (vals, vecs) = eigh_real(m);
    let d = RMat::from_diagonal(&RVec::from_iterator(vals.len(), vals.iter().map(|&v| f(v))));
    &vecs * d * vecs.transpose()
}

pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    eigh(m).apply(f)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.abs()))
}

/// `‖m − m†‖_max`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn symmetric_defect(m: &RMat) -> f64 {
    max_abs_real(&(m - m.transpose()))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    m.clone().singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Operator norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_norm(m: &CMat) -> f64 {
    let e = eigh(m);
    e.min().abs().max(e.max().abs())
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Real part and the largest discarded imaginary component.
pub fn split_real(m: &CMat) -> (RMat, f64) {
    let re = m.map(|z| z.re);
    let im = m.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()));
    (re, im)
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `v† m v`.
pub fn expectation(v: &CVec, m: &CMat) -> C64 {
    v.dotc(&(m * v))
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// `|A|` for a real matrix with Hermitian `iA`: the positive square root of `AAᵀ`.
pub fn abs_of_imaginary(a: &RMat) -> RMat {
    real_sym_fn(&(a * a.transpose()), |x| x.max(0.0).sqrt())
}
