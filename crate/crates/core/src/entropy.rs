//! Entropy-regularized decision functions.
//!
//! For `ε > 0` the regularized optimum is the Gibbs-like family
//! `Ê_j = exp[(F̂ − R̂_j)/ε]` with weights `ν_j`, where the free-energy
//! operator `F̂` solves `Σ_j exp[(F̂ − R̂_j)/ε] ν_j = Î`. The normalization
//! equation is solved by the fixed point `F̂ ← F̂ − ε log S(F̂)`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bayes::{DiscretizedPOVM, PovmElement, RiskField};
use crate::error::{Error, Result};
use crate::linalg::{commutator, eigh, hermitian_norm, hermitian_part, spectral_norm, trace_product, CMat};

/// Eigenvalues of `S` are clamped to this before the logarithm.
const LOG_CLAMP: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step multiplier applied after a residual increase.
    pub damping: f64,
    /// Consecutive residual increases treated as divergence.
    pub divergence_streak: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 500, damping: 0.5, divergence_streak: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct RegularizedSolution {
    pub epsilon: f64,
    /// Free-energy operator `F̂`.
    pub f: CMat,
    /// `Ê_j = exp[(F̂ − R̂_j)/ε]` with weights `ν_j`.
    pub povm: DiscretizedPOVM,
    /// `Σ_j ν_j Tr[Ê_j ln Ê_j]`.
    pub entropy: f64,
    /// `Σ_j ν_j Tr[R̂_j Ê_j]`.
    pub risk: f64,
    /// `‖Σ_j Ê_j ν_j − Î‖`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(iteration, residual)` for every iterate.
    pub trace: Vec<(usize, f64)>,
}

fn hermitian_exp_log(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    eigh(m).apply(f)
}

fn field_operators(field: &RiskField) -> Vec<CMat> {
    (0..field.len()).into_par_iter().map(|j| field.operator(j)).collect()
}

fn check_inputs(field: &RiskField, epsilon: f64, nu: &[f64]) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if nu.len() != field.len() {
        return Err(Error::GridMismatch(format!("{} weights for {} decisions", nu.len(), field.len())));
    }
    if nu.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be nonnegative".into()));
    }
    Ok(())
}

struct Evaluation {
    elements: Vec<CMat>,
    sum: CMat,
    residual: f64,
}

fn evaluate(ops: &[CMat], nu: &[f64], f: &CMat, epsilon: f64) -> Evaluation {
    let elements: Vec<CMat> =
        ops.par_iter().map(|r| hermitian_exp_log(&((f - r) / C64::new(epsilon, 0.0)), f64::exp)).collect();
    let dim = f.nrows();
    let mut sum = CMat::zeros(dim, dim);
    for (e, &w) in elements.iter().zip(nu) {
        if w != 0.0 {
            sum += e * C64::new(w, 0.0);
        }
    }
    let sum = hermitian_part(&sum);
    let residual = hermitian_norm(&(&sum - CMat::identity(dim, dim)));
    Evaluation { elements, sum, residual }
}

/// `F̂₀ = −ε ln Σ_j exp(−R̂_j/ε) ν_j` and its repeated-commutation defect
/// `max_j ‖[[R̂_j, F̂₀], R̂_j]‖ + ‖[[R̂_j, F̂₀], F̂₀]‖`.
pub fn closed_form_f0(field: &RiskField, epsilon: f64, nu: &[f64]) -> Result<(CMat, f64)> {
    check_inputs(field, epsilon, nu)?;
    let ops = field_operators(field);
    Ok(closed_form_from_ops(&ops, epsilon, nu))
}

fn closed_form_from_ops(ops: &[CMat], epsilon: f64, nu: &[f64]) -> (CMat, f64) {
    let dim = ops[0].nrows();
    // shift by the smallest eigenvalue so exponentials stay in range
    let shift = ops.iter().map(|r| eigh(r).min()).fold(f64::INFINITY, f64::min);
    let mut z = CMat::zeros(dim, dim);
    for (r, &w) in ops.iter().zip(nu) {
        if w != 0.0 {
            let e = hermitian_exp_log(r, |x| (-(x - shift) / epsilon).exp());
            z += e * C64::new(w, 0.0);
        }
    }
    let f0 = hermitian_exp_log(&z, |x| shift - epsilon * x.max(LOG_CLAMP).ln());
    let defect = ops
        .par_iter()
        .map(|r| {
            let c = commutator(r, &f0);
            spectral_norm(&commutator(&c, r)) + spectral_norm(&commutator(&c, &f0))
        })
        .reduce(|| 0.0, f64::max);
    (f0, defect)
}

/// Solve the normalization equation by damped fixed-point iteration.
///
/// Starts from `start` when given, else from the closed form `F̂₀`. Returns
/// the best iterate; `converged` tells whether the tolerance was met.
pub fn gibbs_povm(
    field: &RiskField,
    epsilon: f64,
    nu: &[f64],
    settings: &SolverSettings,
    start: Option<&CMat>,
) -> Result<RegularizedSolution> {
    check_inputs(field, epsilon, nu)?;
    let ops = field_operators(field);
    let mut f = match start {
        Some(s) => hermitian_part(s),
        None => closed_form_from_ops(&ops, epsilon, nu).0,
    };
    let mut eval = evaluate(&ops, nu, &f, epsilon);
    let mut trace = vec![(0, eval.residual)];
    let mut best = (f.clone(), eval.residual);
    let mut step = 1.0;
    let mut streak = 0;
    let mut iterations = 0;
    while eval.residual >= settings.tolerance && iterations < settings.max_iterations {
        iterations += 1;
        let log_s = hermitian_exp_log(&eval.sum, |x| x.max(LOG_CLAMP).ln());
        let candidate = hermitian_part(&(&f - log_s * C64::new(step * epsilon, 0.0)));
        let next = evaluate(&ops, nu, &candidate, epsilon);
        trace.push((iterations, next.residual));
        if next.residual > eval.residual {
            streak += 1;
            step *= settings.damping;
            if streak >= settings.divergence_streak {
                return Err(Error::Divergence { iterations, residual: next.residual, trace });
            }
        } else {
            streak = 0;
            step = (step / settings.damping).min(1.0);
        }
        f = candidate;
        eval = next;
        if eval.residual < best.1 {
            best = (f.clone(), eval.residual);
        }
    }
    if eval.residual > best.1 {
        f = best.0;
        eval = evaluate(&ops, nu, &f, epsilon);
    }
    finish(field, &ops, nu, epsilon, f, eval, iterations, settings.tolerance, trace)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    field: &RiskField,
    ops: &[CMat],
    nu: &[f64],
    epsilon: f64,
    f: CMat,
    eval: Evaluation,
    iterations: usize,
    tolerance: f64,
    trace: Vec<(usize, f64)>,
) -> Result<RegularizedSolution> {
    let risk: f64 = ops.iter().zip(&eval.elements).zip(nu).map(|((r, e), &w)| w * trace_product(r, e).re).sum();
    let entropy: f64 = eval
        .elements
        .par_iter()
        .zip(nu.par_iter())
        .map(|(e, &w)| {
            let ln = hermitian_exp_log(e, |x| x.max(LOG_CLAMP).ln());
            w * trace_product(e, &ln).re
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let povm = DiscretizedPOVM::new(
        field.grid().clone(),
        eval.elements.into_iter().map(PovmElement::Dense).collect(),
        nu.to_vec(),
    )?;
    Ok(RegularizedSolution {
        epsilon,
        f,
        povm,
        entropy,
        risk,
        residual: eval.residual,
        iterations,
        converged: eval.residual < tolerance,
        trace,
    })
}

impl RegularizedSolution {
    /// A rigorous lower bound on the risk of every decision function on the grid:
    /// `Tr Ŷ` with `Ŷ = F̂ − t Î`, `t = max_j λ_max(F̂ − R̂_j)`, so `Ŷ ⪯ R̂_j`.
    pub fn dual_bound(&self, field: &RiskField) -> f64 {
        let t = (0..field.len())
            .into_par_iter()
            .map(|j| eigh(&(&self.f - field.operator(j))).max())
            .reduce(|| f64::NEG_INFINITY, f64::max);
        self.f.trace().re - t * self.f.nrows() as f64
    }
}

/// Thermodynamic consistency at `ε` from solutions at `ε − δ`, `ε`, `ε + δ`.
#[derive(Clone, Debug)]
pub struct ThermoCheck {
    /// `Tr dF̂/dε` by central difference.
    pub entropy_fd: f64,
    /// `Σ_j ν_j Tr[Ê_j ln Ê_j]` at `ε`.
    pub entropy_direct: f64,
    /// `Tr F̂ − ε H` with the finite-difference `H`.
    pub risk_identity: f64,
    /// `Σ_j ν_j Tr[R̂_j Ê_j]` at `ε`.
    pub risk_direct: f64,
}

impl ThermoCheck {
    pub fn entropy_rel_error(&self) -> f64 {
        rel(self.entropy_fd, self.entropy_direct)
    }

    pub fn risk_rel_error(&self) -> f64 {
        rel(self.risk_identity, self.risk_direct)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn thermo_identities(
    minus: &RegularizedSolution,
    mid: &RegularizedSolution,
    plus: &RegularizedSolution,
) -> Result<ThermoCheck> {
    for s in [minus, mid, plus] {
        if !s.converged {
            return Err(Error::NotConverged { iterations: s.iterations, residual: s.residual });
        }
    }
    let (e0, e1, e2) = (minus.epsilon, mid.epsilon, plus.epsilon);
    if !(e0 < e1 && e1 < e2) {
        return Err(Error::InvalidInput("expected solutions at increasing epsilon".into()));
    }
    let entropy_fd = (plus.f.trace().re - minus.f.trace().re) / (e2 - e0);
    Ok(ThermoCheck {
        entropy_fd,
        entropy_direct: mid.entropy,
        risk_identity: mid.f.trace().re - e1 * entropy_fd,
        risk_direct: mid.risk,
    })
}

#[derive(Clone, Debug)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub risk: f64,
    pub entropy: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct Continuation {
    pub curve: Vec<EpsilonPoint>,
    pub last: RegularizedSolution,
    /// Largest increase of the risk as `ε` decreases (zero when monotone).
    pub max_violation: f64,
    /// Linear extrapolation of the last two risks to `ε = 0`.
    pub extrapolated_risk: f64,
}

impl Continuation {
    pub fn is_monotone(&self, tolerance: f64) -> bool {
        self.max_violation <= tolerance
    }
}

/// Solve along a decreasing `ε` schedule, each step warm-started from the previous `F̂`.
pub fn epsilon_continuation(
    field: &RiskField,
    nu: &[f64],
    schedule: &[f64],
    settings: &SolverSettings,
) -> Result<Continuation> {
    if schedule.is_empty() || schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("epsilon schedule must be strictly decreasing".into()));
    }
    let mut curve = Vec::with_capacity(schedule.len());
    let mut last: Option<RegularizedSolution> = None;
    for &eps in schedule {
        let sol = gibbs_povm(field, eps, nu, settings, last.as_ref().map(|s| &s.f))?;
        if !sol.converged {
            return Err(Error::NotConverged { iterations: sol.iterations, residual: sol.residual });
        }
        curve.push(EpsilonPoint {
            epsilon: eps,
            risk: sol.risk,
            entropy: sol.entropy,
            residual: sol.residual,
            iterations: sol.iterations,
        });
        last = Some(sol);
    }
    let max_violation = curve.windows(2).map(|w| (w[1].risk - w[0].risk).max(0.0)).fold(0.0, f64::max);
    let extrapolated_risk = match curve.as_slice() {
        [.., a, b] => (a.epsilon * b.risk - b.epsilon * a.risk) / (a.epsilon - b.epsilon),
        [a] => a.risk,
        [] => unreachable!(),
    };
    Ok(Continuation { curve, last: last.expect("nonempty schedule"), max_violation, extrapolated_risk })
}

/// Solver trace as CSV (`iteration,residual`).
pub fn trace_csv(trace: &[(usize, f64)]) -> String {
    let mut out = String::from("iteration,residual\n");
    for (i, r) in trace {
        out.push_str(&format!("{i},{r:.16e}\n"));
    }
    out
}
