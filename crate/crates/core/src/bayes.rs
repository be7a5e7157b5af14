//! Posterior risk operators, discretized decision functions and their optimal forms.
//!
//! A decision function is represented on a finite grid of decisions `λ̃_j` by
//! positive operators `Ê_j` and scalar weights `ν_j` with `Σ_j Ê_j ν_j ≈ Î`.
//! The average risk of any such family against a risk field is
//! `Σ_j ν_j Tr[R̂_j Ê_j]`.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{DisplacedForm, FockSpace, GaussianFamily, GroundFamily, TRUNCATION_THRESHOLD};
use crate::gaussian::{
    ingest_symmetric, quadratic_cost_derived, GaussianChannelModel, PriorModel, QuadraticCostDerived,
};
use crate::linalg::{
    eigh, eigh_real, expectation, hermitian_defect, max_abs, to_complex, trace_product, CMat, CVec, RMat, ZERO,
};

/// Largest acceptable step-halving residual of a risk-field quadrature.
pub const QUADRATURE_RESIDUAL_LIMIT: f64 = 1e-4;

/// Node operators may dip this far below zero and still count as positive.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Relative eigenvalue floor for `ρ̃^{-1/2}`.
pub const INV_SQRT_FLOOR: f64 = 1e-12;

/// Fraction of floored directions of `ρ̃` above which construction fails.
pub const MAX_FLOORED_FRACTION: f64 = 0.05;

/// Prior integration grid: half-width and step in units of the prior standard deviation.
const PRIOR_RADIUS_SIGMAS: f64 = 6.0;
const PRIOR_STEP_SIGMAS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.point(self.count - 1)
    }
}

/// Finite set of decisions with quadrature weights.
///
/// Rectangular grids are lattices including both endpoints, ordered with
/// the first axis slowest; each node carries the cell volume `Π steps`.
/// Point sets carry unit weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionGrid {
    axes: Vec<Axis>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DecisionGrid {
    pub fn rectangular(mins: &[f64], maxs: &[f64], steps: &[f64]) -> Result<Self> {
        let s = mins.len();
        if s == 0 || maxs.len() != s || steps.len() != s {
            return Err(Error::InvalidInput("grid needs min, max and step per axis".into()));
        }
        let mut axes = Vec::with_capacity(s);
        for k in 0..s {
            let (lo, hi, h) = (mins[k], maxs[k], steps[k]);
            if !(h > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInput(format!("bad grid axis {k}: [{lo}, {hi}] step {h}")));
            }
            let count = ((hi - lo) / h).round() as usize + 1;
            let end = lo + (count - 1) as f64 * h;
            if (end - hi).abs() > 1e-9 * hi.abs().max(1.0) {
                return Err(Error::InvalidInput(format!("grid axis {k}: step {h} does not divide [{lo}, {hi}]")));
            }
            axes.push(Axis { min: lo, step: h, count });
        }
        let total: usize = axes.iter().map(|a| a.count).product();
        let mut nodes = Vec::with_capacity(total);
        let mut idx = vec![0usize; s];
        for _ in 0..total {
            nodes.push(idx.iter().zip(&axes).map(|(&i, a)| a.point(i)).collect());
            for k in (0..s).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].count {
                    break;
                }
                idx[k] = 0;
            }
        }
        let cell: f64 = axes.iter().map(|a| a.step).product();
        Ok(Self { axes, weights: vec![cell; total], nodes })
    }

    /// Square lattice `[−radius, radius]^dim`.
    pub fn centered(dim: usize, radius: f64, step: f64) -> Result<Self> {
        Self::rectangular(&vec![-radius; dim], &vec![radius; dim], &vec![step; dim])
    }

    /// Arbitrary decision points with unit weights.
    pub fn points(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("empty decision set".into()));
        };
        let s = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != s) {
            return Err(Error::DimensionMismatch { expected: s, got: p.len() });
        }
        Ok(Self { axes: Vec::new(), weights: vec![1.0; points.len()], nodes: points })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn is_rectangular(&self) -> bool {
        !self.axes.is_empty()
    }

    pub fn cell_volume(&self) -> Option<f64> {
        self.is_rectangular().then(|| self.weights[0])
    }

    /// Whether every axis spans at least `[−h_k, h_k]`.
    pub fn covers(&self, half_widths: &[f64]) -> bool {
        self.is_rectangular()
            && self.axes.iter().zip(half_widths).all(|(a, &h)| a.min <= -h + 1e-12 && a.max() >= h - 1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostFunction {
    /// Negative delta cost; risk is the negative decision density at the truth.
    Simple,
    /// `(λ̃ − λ)ᵀ(λ̃ − λ)`.
    Quadratic,
}

#[derive(Clone, Debug)]
enum FieldKind {
    /// `R̂_j = −p_j ρ̂(λ̃_j)`.
    Simple {
        family: GaussianFamily,
        density: Vec<f64>,
    },
    /// `R̂_j = M₂ − 2 λ̃_jᵀM₁ + |λ̃_j|² M₀`.
    Quadratic {
        m0: CMat,
        m1: Vec<CMat>,
        m2: CMat,
    },
    Dense(Vec<CMat>),
}

/// Posterior risk operators `R̂(λ̃_j)` on a decision grid, evaluated on demand.
#[derive(Clone, Debug)]
pub struct RiskField {
    grid: DecisionGrid,
    kind: FieldKind,
    dim: usize,
    min_eigs: Vec<f64>,
    reference_weights: Option<Vec<f64>>,
    /// Step-halving residual of the prior quadrature (zero when exact).
    pub quadrature_residual: f64,
    /// Largest (simple) or prior-weighted (quadratic) top-level population of the states used.
    pub truncation_mass: f64,
}

fn check_space(model: &GaussianChannelModel, space: &FockSpace) -> Result<()> {
    match model.c.canonical_scales() {
        Some(s) if s == space.scales() => Ok(()),
        Some(_) => Err(Error::InvalidInput("Fock space scales differ from the model commutator".into())),
        None => Err(Error::InvalidInput("commutator must be in canonical block form for Fock evaluation".into())),
    }
}

fn check_grid_dim(grid: &DecisionGrid, s: usize) -> Result<()> {
    if grid.dim() != s {
        return Err(Error::DimensionMismatch { expected: s, got: grid.dim() });
    }
    Ok(())
}

fn gaussian_density(k: &RMat) -> Result<impl Fn(&[f64]) -> f64> {
    let s = k.nrows();
    let inv = k.clone().try_inverse().ok_or(Error::NotPositive { min_eig: 0.0 })?;
    let norm = ((2.0 * std::f64::consts::PI).powi(s as i32) * k.determinant()).sqrt();
    Ok(move |x: &[f64]| {
        let mut quad = 0.0;
        for i in 0..s {
            for j in 0..s {
                quad += x[i] * inv[(i, j)] * x[j];
            }
        }
        (-0.5 * quad).exp() / norm
    })
}

impl RiskField {
    /// Simple cost under a flat prior on `[−w, w]^s`.
    ///
    /// The density is normalized over the grid nodes inside the support,
    /// so `Σ_j p_j ω_j = 1` with `ω_j` the cell volumes.
    pub fn simple(
        model: &GaussianChannelModel,
        support_half_width: f64,
        grid: &DecisionGrid,
        space: &FockSpace,
    ) -> Result<Self> {
        check_space(model, space)?;
        check_grid_dim(grid, model.dim())?;
        let Some(cell) = grid.cell_volume() else {
            return Err(Error::GridMismatch("simple cost needs a rectangular grid".into()));
        };
        let inside: Vec<bool> =
            grid.nodes().iter().map(|n| n.iter().all(|x| x.abs() <= support_half_width + 1e-9)).collect();
        let count = inside.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::InvalidInput("flat prior support contains no grid node".into()));
        }
        let p = 1.0 / (count as f64 * cell);
        let density: Vec<f64> = inside.iter().map(|&b| if b { p } else { 0.0 }).collect();
        let family = GaussianFamily::new(space, &model.q)?;
        let stats: Vec<(f64, f64)> = grid
            .nodes()
            .par_iter()
            .zip(density.par_iter())
            .map(|(n, &pj)| {
                if pj == 0.0 {
                    return (0.0, 0.0);
                }
                let st = family.state_unchecked(n);
                (-pj * st.top_eigenvalue, st.edge_mass)
            })
            .collect();
        let truncation_mass = stats.iter().fold(0.0_f64, |m, s| m.max(s.1));
        if truncation_mass > TRUNCATION_THRESHOLD {
            return Err(Error::Truncation {
                mass: truncation_mass,
                threshold: TRUNCATION_THRESHOLD,
                dim: space.levels(),
            });
        }
        let nu = cell / model.c.cell_volume();
        Ok(Self {
            grid: grid.clone(),
            dim: space.dim(),
            min_eigs: stats.iter().map(|s| s.0).collect(),
            reference_weights: Some(vec![nu; grid.len()]),
            kind: FieldKind::Simple { family, density },
            quadrature_residual: 0.0,
            truncation_mass,
        })
    }

    /// Quadratic cost under a Gaussian (quadrature) or discrete (finite sum) prior.
    pub fn quadratic(
        model: &GaussianChannelModel,
        prior: &PriorModel,
        grid: &DecisionGrid,
        space: &FockSpace,
    ) -> Result<Self> {
        check_space(model, space)?;
        let s = model.dim();
        check_grid_dim(grid, s)?;
        prior.validate(s)?;
        let family = GaussianFamily::new(space, &model.q)?;
        let (moments, residual, truncation_mass) = match prior {
            PriorModel::Gaussian { k_lambda } => gaussian_prior_moments(&family, k_lambda, space)?,
            PriorModel::Discrete { points, weights } => {
                let states: Vec<CMat> = points.iter().map(|p| family.state_unchecked(p).rho).collect();
                let trunc = points.iter().zip(weights).map(|(p, w)| w * family.state_unchecked(p).edge_mass).sum();
                (accumulate_moments(&states, points, weights, s), 0.0, trunc)
            }
            PriorModel::WideFlat { .. } => {
                return Err(Error::InvalidInput(
                    "quadratic cost needs a normalizable (gaussian or discrete) prior".into(),
                ))
            }
        };
        if residual > QUADRATURE_RESIDUAL_LIMIT {
            return Err(Error::QuadratureResidual { residual, limit: QUADRATURE_RESIDUAL_LIMIT });
        }
        let (m0, m1, m2) = moments;
        let mut field = Self {
            grid: grid.clone(),
            dim: space.dim(),
            min_eigs: Vec::new(),
            reference_weights: None,
            kind: FieldKind::Quadratic { m0, m1, m2 },
            quadrature_residual: residual,
            truncation_mass,
        };
        field.min_eigs = (0..grid.len()).into_par_iter().map(|j| eigh(&field.operator(j)).min()).collect();
        Ok(field)
    }

    /// Field from explicit node operators (binary tests, tabulated costs).
    pub fn from_operators(grid: &DecisionGrid, ops: Vec<CMat>) -> Result<Self> {
        if ops.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} operators for {} decisions", ops.len(), grid.len())));
        }
        let dim = ops[0].nrows();
        for op in &ops {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: op.nrows() });
            }
            let defect = hermitian_defect(op);
            if defect > 1e-10 * max_abs(op).max(1.0) {
                return Err(Error::NotSymmetric { kind: "Hermitian", defect });
            }
        }
        let min_eigs = ops.iter().map(|o| eigh(o).min()).collect();
        Ok(Self {
            grid: grid.clone(),
            dim,
            min_eigs,
            reference_weights: None,
            kind: FieldKind::Dense(ops.iter().map(crate::linalg::hermitian_part).collect()),
            quadrature_residual: 0.0,
            truncation_mass: 0.0,
        })
    }

    pub fn grid(&self) -> &DecisionGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn cost(&self) -> Option<CostFunction> {
        match self.kind {
            FieldKind::Simple { .. } => Some(CostFunction::Simple),
            FieldKind::Quadratic { .. } => Some(CostFunction::Quadratic),
            FieldKind::Dense(_) => None,
        }
    }

    /// Minimal eigenvalue `r_j` of each node operator.
    pub fn min_eigenvalues(&self) -> &[f64] {
        &self.min_eigs
    }

    /// Prior density at each node (simple cost only).
    pub fn density(&self) -> Option<&[f64]> {
        match &self.kind {
            FieldKind::Simple { density, .. } => Some(density),
            _ => None,
        }
    }

    /// Prior moments `(M₀, M₁, M₂)` of a quadratic field; `M₀ = ρ̃`.
    pub fn moments(&self) -> Option<(&CMat, &[CMat], &CMat)> {
        match &self.kind {
            FieldKind::Quadratic { m0, m1, m2 } => Some((m0, m1, m2)),
            _ => None,
        }
    }

    pub fn operator(&self, j: usize) -> CMat {
        let node = self.grid.node(j);
        match &self.kind {
            FieldKind::Simple { family, density } => {
                if density[j] == 0.0 {
                    CMat::zeros(self.dim, self.dim)
                } else {
                    family.state_unchecked(node).rho * C64::new(-density[j], 0.0)
                }
            }
            FieldKind::Quadratic { m0, m1, m2 } => {
                let mut r = m2.clone();
                let mut norm2 = 0.0;
                for (i, &l) in node.iter().enumerate() {
                    r -= &m1[i] * C64::new(2.0 * l, 0.0);
                    norm2 += l * l;
                }
                r + m0 * C64::new(norm2, 0.0)
            }
            FieldKind::Dense(ops) => ops[j].clone(),
        }
    }

    /// `Tr[R̂_j Ê]` for one node.
    fn node_risk(&self, j: usize, e: &PovmElement) -> C64 {
        let node = self.grid.node(j);
        match (&self.kind, e) {
            (FieldKind::Simple { density, .. }, _) if density[j] == 0.0 => ZERO,
            (FieldKind::Quadratic { m0, m1, m2 }, PovmElement::Rank1(v)) => {
                let mut acc = expectation(v, m2);
                let mut norm2 = 0.0;
                for (i, &l) in node.iter().enumerate() {
                    acc -= expectation(v, &m1[i]) * (2.0 * l);
                    norm2 += l * l;
                }
                acc + expectation(v, m0) * norm2
            }
            (_, PovmElement::Rank1(v)) => expectation(v, &self.operator(j)),
            (_, PovmElement::Dense(m)) => trace_product(&self.operator(j), m),
        }
    }
}

type Moments = (CMat, Vec<CMat>, CMat);

fn accumulate_moments(states: &[CMat], points: &[Vec<f64>], weights: &[f64], s: usize) -> Moments {
    let dim = states[0].nrows();
    let mut m0 = CMat::zeros(dim, dim);
    let mut m1 = vec![CMat::zeros(dim, dim); s];
    let mut m2 = CMat::zeros(dim, dim);
    for ((rho, p), &w) in states.iter().zip(points).zip(weights) {
        if w == 0.0 {
            continue;
        }
        m0 += rho * C64::new(w, 0.0);
        let mut norm2 = 0.0;
        for i in 0..s {
            m1[i] += rho * C64::new(w * p[i], 0.0);
            norm2 += p[i] * p[i];
        }
        m2 += rho * C64::new(w * norm2, 0.0);
    }
    (m0, m1, m2)
}

/// Midpoint-lattice quadrature of the prior moments at steps `h` and `2h`.
/// Returns the fine moments, the step-halving residual on the trusted half of
/// the space, and the prior-weighted truncation mass.
fn gaussian_prior_moments(family: &GaussianFamily, k_lambda: &RMat, space: &FockSpace) -> Result<(Moments, f64, f64)> {
    let s = k_lambda.nrows();
    let k = ingest_symmetric(k_lambda, s)?;
    let (vals, _) = eigh_real(&k);
    let step = PRIOR_STEP_SIGMAS * vals[0].sqrt();
    let half = (PRIOR_RADIUS_SIGMAS * vals[s - 1].sqrt() / (2.0 * step)).ceil() as i64;
    let radius = 2.0 * step * half as f64;
    let grid = DecisionGrid::centered(s, radius, step)?;
    let density = gaussian_density(&k)?;
    let cell = grid.cell_volume().expect("rectangular");

    let evaluated: Vec<(CMat, f64)> = grid
        .nodes()
        .par_iter()
        .map(|n| {
            let st = family.state_unchecked(n);
            (st.rho, st.edge_mass)
        })
        .collect();
    let (states, edges): (Vec<CMat>, Vec<f64>) = evaluated.into_iter().unzip();
    let dens: Vec<f64> = grid.nodes().iter().map(|n| density(n)).collect();
    let fine_w: Vec<f64> = dens.iter().map(|d| d * cell).collect();
    // coarse lattice: every other node along each axis
    let coarse_w: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&dens)
        .map(|(n, d)| {
            let on = n.iter().all(|&x| ((x / step).round() as i64).rem_euclid(2) == 0);
            if on {
                d * cell * f64::powi(2.0, s as i32)
            } else {
                0.0
            }
        })
        .collect();
    let fine = accumulate_moments(&states, grid.nodes(), &fine_w, s);
    let coarse = accumulate_moments(&states, grid.nodes(), &coarse_w, s);

    let block = space.block(space.levels() / 2);
    let sub = |m: &CMat| CMat::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])]);
    let mut residual = max_abs(&sub(&(&fine.0 - &coarse.0)));
    for i in 0..s {
        residual = residual.max(max_abs(&sub(&(&fine.1[i] - &coarse.1[i]))));
    }
    residual = residual.max(max_abs(&sub(&(&fine.2 - &coarse.2))));
    let trunc = edges.iter().zip(&fine_w).map(|(e, w)| e * w).sum();
    Ok((fine, residual, trunc))
}

/// Dispatches on cost and prior.
pub fn risk_field(
    model: &GaussianChannelModel,
    prior: &PriorModel,
    cost: CostFunction,
    grid: &DecisionGrid,
    space: &FockSpace,
) -> Result<RiskField> {
    match (cost, prior) {
        (CostFunction::Simple, PriorModel::WideFlat { support_half_width }) => {
            RiskField::simple(model, *support_half_width, grid, space)
        }
        (CostFunction::Simple, _) => {
            Err(Error::InvalidInput("simple cost is supported for the wide flat prior only".into()))
        }
        (CostFunction::Quadratic, _) => RiskField::quadratic(model, prior, grid, space),
    }
}

/// One decision operator, stored as `vv†` when rank one.
#[derive(Clone, Debug)]
pub enum PovmElement {
    Rank1(CVec),
    Dense(CMat),
}

impl PovmElement {
    pub fn dim(&self) -> usize {
        match self {
            PovmElement::Rank1(v) => v.len(),
            PovmElement::Dense(m) => m.nrows(),
        }
    }

    pub fn matrix(&self) -> CMat {
        match self {
            PovmElement::Rank1(v) => v * v.adjoint(),
            PovmElement::Dense(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            PovmElement::Rank1(v) => v.norm_squared(),
            PovmElement::Dense(m) => m.trace().re,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            PovmElement::Rank1(_) => 0.0,
            PovmElement::Dense(m) => eigh(m).min(),
        }
    }

    /// `Tr[ρ Ê]`.
    pub fn expectation(&self, rho: &CMat) -> f64 {
        match self {
            PovmElement::Rank1(v) => expectation(v, rho).re,
            PovmElement::Dense(m) => trace_product(rho, m).re,
        }
    }
}

/// Decision function on a grid: `Ê(λ̃_j) ν_j`.
#[derive(Clone, Debug)]
pub struct DiscretizedPOVM {
    grid: DecisionGrid,
    elements: Vec<PovmElement>,
    weights: Vec<f64>,
    dim: usize,
    /// Top-level population of each node element (zero when unknown).
    pub edge_mass: Vec<f64>,
}

impl DiscretizedPOVM {
    pub fn new(grid: DecisionGrid, elements: Vec<PovmElement>, weights: Vec<f64>) -> Result<Self> {
        if elements.len() != grid.len() || weights.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} elements and {} weights for {} decisions",
                elements.len(),
                weights.len(),
                grid.len()
            )));
        }
        let dim = elements[0].dim();
        if let Some(e) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: e.dim() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidInput("decision weights must be nonnegative".into()));
        }
        let n = elements.len();
        Ok(Self { grid, elements, weights, dim, edge_mass: vec![0.0; n] })
    }

    pub fn grid(&self) -> &DecisionGrid {
        &self.grid
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `Σ_j Ê_j ν_j` restricted to the given basis indices.
    pub fn completeness_block(&self, block: &[usize]) -> CMat {
        let b = block.len();
        let mut acc = CMat::zeros(b, b);
        for (e, &w) in self.elements.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            match e {
                PovmElement::Rank1(v) => {
                    let sub = CVec::from_iterator(b, block.iter().map(|&i| v[i]));
                    acc += (&sub * sub.adjoint()) * C64::new(w, 0.0);
                }
                PovmElement::Dense(m) => {
                    acc += CMat::from_fn(b, b, |i, j| m[(block[i], block[j])]) * C64::new(w, 0.0);
                }
            }
        }
        acc
    }

    /// `max |Σ_j Ê_j ν_j − Î|` entrywise on the block.
    pub fn completeness_defect(&self, block: &[usize]) -> f64 {
        let sum = self.completeness_block(block);
        max_abs(&(sum - CMat::identity(block.len(), block.len())))
    }

    /// `max |Σ_j Ê_j ν_j − Î|` over the whole space.
    pub fn full_completeness_defect(&self) -> f64 {
        let all: Vec<usize> = (0..self.dim).collect();
        self.completeness_defect(&all)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.elements.iter().map(|e| e.min_eigenvalue()).fold(f64::INFINITY, f64::min)
    }

    /// Outcome probabilities `ν_j Tr[ρ Ê_j]`.
    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.elements.iter().zip(&self.weights).map(|(e, &w)| w * e.expectation(rho)).collect()
    }
}

fn check_same_grid(field: &RiskField, povm: &DiscretizedPOVM) -> Result<()> {
    if field.grid != povm.grid {
        return Err(Error::GridMismatch("risk field and decision function grids differ".into()));
    }
    if field.dim != povm.dim {
        return Err(Error::DimensionMismatch { expected: field.dim, got: povm.dim });
    }
    Ok(())
}

/// `Σ_j ν_j Tr[R̂_j Ê_j]`.
pub fn average_risk(field: &RiskField, povm: &DiscretizedPOVM) -> Result<f64> {
    check_same_grid(field, povm)?;
    if let Some(density) = field.density() {
        let worst = density.iter().zip(&povm.edge_mass).filter(|(&p, _)| p != 0.0).fold(0.0_f64, |m, (_, &e)| m.max(e));
        if worst > TRUNCATION_THRESHOLD {
            return Err(Error::Truncation { mass: worst, threshold: TRUNCATION_THRESHOLD, dim: povm.dim });
        }
    }
    let total: C64 = (0..field.len())
        .into_par_iter()
        .map(|j| {
            let w = povm.weights[j];
            if w == 0.0 {
                ZERO
            } else {
                field.node_risk(j, &povm.elements[j]) * w
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    if total.im.abs() > 1e-10 * total.re.abs().max(1.0) {
        return Err(Error::InvalidInput(format!("average risk has imaginary residue {:.3e}", total.im)));
    }
    Ok(total.re)
}

/// `Σ_j r_j w_j` with `r_j` the minimal eigenvalues and `w_j` the reference
/// trace weights of the field; without reference weights `D·min_j r_j`.
pub fn lower_bound(field: &RiskField) -> f64 {
    match &field.reference_weights {
        Some(w) => field.min_eigs.iter().zip(w).map(|(r, w)| r * w).sum(),
        None => {
            let rmin = field.min_eigs.iter().copied().fold(f64::INFINITY, f64::min);
            field.dim as f64 * rmin
        }
    }
}

/// `Σ_j r_j ν_j Tr Ê_j`, a bound on the risk of this particular decision function.
pub fn lower_bound_for(field: &RiskField, povm: &DiscretizedPOVM) -> Result<f64> {
    check_same_grid(field, povm)?;
    Ok(field.min_eigs.iter().zip(povm.elements.iter().zip(&povm.weights)).map(|(r, (e, w))| r * w * e.trace()).sum())
}

/// Coherent-projector decision function `P̂(λ̃_j) ν_j`, `ν_j = ω_j / det^{1/2}|2πC|`.
///
/// `P̂(λ̃)` is the ground projector of `(x − λ̃)ᵀQ(x − λ̃)`, the top eigenvector of `ρ̂(λ̃)`.
pub fn simple_cost_optimal_povm(
    model: &GaussianChannelModel,
    grid: &DecisionGrid,
    space: &FockSpace,
) -> Result<DiscretizedPOVM> {
    check_space(model, space)?;
    check_grid_dim(grid, model.dim())?;
    let Some(cell) = grid.cell_volume() else {
        return Err(Error::GridMismatch("simple cost needs a rectangular grid".into()));
    };
    let s = model.dim();
    let lattice = lattice_ground_vectors(space, &model.q, &RMat::identity(s, s), grid)?;
    let nu = cell / model.c.cell_volume();
    let mut povm = DiscretizedPOVM::new(
        grid.clone(),
        lattice.vectors.into_iter().map(PovmElement::Rank1).collect(),
        vec![nu; grid.len()],
    )?;
    povm.edge_mass = lattice.edge_mass;
    Ok(povm)
}

/// Ground vectors of `(o − λ̃)ᵀF(o − λ̃)`, `o = L x`, over a rectangular grid.
#[derive(Clone, Debug)]
pub struct LatticeGround {
    pub vectors: Vec<CVec>,
    pub edge_mass: Vec<f64>,
    /// Common ground energy of the (unitarily equivalent) family.
    pub energy: f64,
}

/// Levels per mode of the padded space used for displacements.
const MAX_PADDED_LEVELS: usize = 400;

/// The displaced family `ψ(λ̃) = D(L⁻¹λ̃) ψ(0)`, each vector the truncation of
/// one computed in a padded space large enough to hold the farthest node.
///
/// Displacements along different axes commute up to a phase, so each node is
/// reached by repeated unit steps along each axis; only one exponential per
/// axis is needed.
pub fn lattice_ground_vectors(
    space: &FockSpace,
    form: &RMat,
    ops: &RMat,
    grid: &DecisionGrid,
) -> Result<LatticeGround> {
    let s = space.phase_dim();
    check_grid_dim(grid, s)?;
    if !grid.is_rectangular() {
        return Err(Error::GridMismatch("lattice construction needs a rectangular grid".into()));
    }
    let l_inv = ops.clone().try_inverse().ok_or(Error::SingularCommutator)?;
    let big = padded_space(space, &l_inv, grid)?;
    let ground = GroundFamily::new(&big, form, ops)?.at(&vec![0.0; s])?;
    let keep = big.block(space.levels() - 1);
    let edge = big.block(space.levels().saturating_sub(3));

    let axes = grid.axes();
    let shift = |k: usize, t: f64| -> Vec<f64> { l_inv.column(k).iter().map(|x| x * t).collect() };
    let start: Vec<CMat> = (0..s).map(|k| big.displacement(&shift(k, axes[k].min))).collect::<Result<_>>()?;
    let step: Vec<CMat> = (0..s).map(|k| big.displacement(&shift(k, axes[k].step))).collect::<Result<_>>()?;

    // sweep the inner axes in the padded space, last axis first
    let mut layer: Vec<CVec> = vec![ground.vector.clone()];
    for k in (1..s).rev() {
        let count = axes[k].count;
        let swept: Vec<Vec<CVec>> = layer
            .par_iter()
            .map(|v| {
                let mut out = Vec::with_capacity(count);
                let mut cur = &start[k] * v;
                for i in 0..count {
                    if i > 0 {
                        cur = &step[k] * &cur;
                    }
                    out.push(cur.clone());
                }
                out
            })
            .collect();
        // make the current axis slowest among those swept so far
        let mut reordered = Vec::with_capacity(layer.len() * count);
        for i in 0..count {
            for col in &swept {
                reordered.push(col[i].clone());
            }
        }
        layer = reordered;
    }
    // the outermost axis only needs the kept rows of each displacement
    let mut rows = Vec::with_capacity(axes[0].count);
    let mut cur = start[0].select_rows(&keep);
    for i in 0..axes[0].count {
        if i > 0 {
            cur = &cur * &step[0];
        }
        rows.push(cur.clone());
    }
    let inner_edge: Vec<usize> = (0..keep.len()).filter(|i| edge.contains(&keep[*i])).collect();
    let results: Vec<(CVec, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let v = &rows[j / layer.len()] * &layer[j % layer.len()];
            let inside: f64 = inner_edge.iter().map(|&i| v[i].norm_sqr()).sum();
            // displaced vectors are unit vectors in the padded space
            (v, (1.0 - inside).max(0.0))
        })
        .collect();
    let (vectors, edge_mass): (Vec<CVec>, Vec<f64>) = results.into_iter().unzip();
    Ok(LatticeGround { vectors, edge_mass, energy: ground.eigenvalue })
}

/// A space with enough levels that displaced ground states of every grid
/// node fit, subject to `MAX_PADDED_LEVELS` and the dimension cap.
fn padded_space(space: &FockSpace, l_inv: &RMat, grid: &DecisionGrid) -> Result<FockSpace> {
    let m = space.n_modes();
    let axes = grid.axes();
    let s = axes.len();
    let mut worst = 0.0_f64;
    for corner in 0..(1usize << s) {
        let point: Vec<f64> = (0..s).map(|j| if corner >> j & 1 == 1 { axes[j].max() } else { axes[j].min }).collect();
        for k in 0..m {
            let (mut x, mut y) = (0.0, 0.0);
            for (j, t) in point.iter().enumerate() {
                x += l_inv[(2 * k, j)] * t;
                y += l_inv[(2 * k + 1, j)] * t;
            }
            // coherent amplitude |α| = |shift| / √(2c)
            worst = worst.max((x * x + y * y).sqrt() / (2.0 * space.scales()[k]).sqrt());
        }
    }
    let want = ((worst + 8.0).powi(2)).ceil() as usize;
    let want = want.max(space.levels() + 8);
    let by_cap = (space.cap() as f64).powf(1.0 / m as f64).floor() as usize;
    let levels = want.min(MAX_PADDED_LEVELS).min(by_cap.max(space.levels())).max(space.levels());
    FockSpace::with_cap(space.scales(), levels, usize::MAX)
}

/// Optimal quadratic-cost decision function and the pieces used to build it.
#[derive(Clone, Debug)]
pub struct QuadraticConstruction {
    pub povm: DiscretizedPOVM,
    pub derived: QuadraticCostDerived,
    /// Normalized ground vectors `ψ_j` of `(û − λ̃_j)ᵀ(û − λ̃_j)`, `û = V x̂`.
    pub ground_vectors: Vec<CVec>,
    /// Common ground energy of the same forms, ideally `½Tr|C_u|`.
    pub ground_energy: f64,
    /// `ρ̃` built from its quadratic form `Q̃`.
    pub rho_tilde: CMat,
    pub rho_tilde_inv_sqrt: CMat,
    /// Number of floored directions in `ρ̃^{-1/2}`.
    pub floored: usize,
    /// `ν_j`: gaussian cell masses with covariance `Σ_ν = K̃_u − ½|C_u|`.
    pub nu: Vec<f64>,
}

/// `Ê_j = ρ̃^{-1/2} P̂(λ̃_j) ρ̃^{-1/2} ν_j` for the Gaussian prior `K_λ`.
pub fn quadratic_cost_optimal_povm(
    model: &GaussianChannelModel,
    k_lambda: &RMat,
    grid: &DecisionGrid,
    space: &FockSpace,
) -> Result<QuadraticConstruction> {
    check_space(model, space)?;
    let s = model.dim();
    check_grid_dim(grid, s)?;
    let Some(cell) = grid.cell_volume() else {
        return Err(Error::GridMismatch("quadratic cost needs a rectangular grid".into()));
    };
    let derived = quadratic_cost_derived(model, k_lambda)?;
    if derived.degenerate {
        return Err(Error::DegenerateMeasure { min_eig: derived.sigma_nu_min_eig, norm: derived.k_u.norm() });
    }

    let rho_tilde = GaussianFamily::new(space, &derived.q_tilde)?.state_unchecked(&vec![0.0; s]).rho;
    let (rho_tilde_inv_sqrt, floored) = inverse_sqrt(&rho_tilde)?;

    let lattice = lattice_ground_vectors(space, &RMat::identity(s, s), &derived.v, grid)?;

    let density = gaussian_density(&derived.sigma_nu)?;
    let nu: Vec<f64> = grid.nodes().iter().map(|n| density(n) * cell).collect();
    let elements = lattice.vectors.par_iter().map(|psi| PovmElement::Rank1(&rho_tilde_inv_sqrt * psi)).collect();
    let mut povm = DiscretizedPOVM::new(grid.clone(), elements, nu.clone())?;
    povm.edge_mass = lattice.edge_mass;
    Ok(QuadraticConstruction {
        povm,
        derived,
        ground_vectors: lattice.vectors,
        ground_energy: lattice.energy,
        rho_tilde,
        rho_tilde_inv_sqrt,
        floored,
        nu,
    })
}

/// `ρ^{-1/2}` with eigenvalues below `INV_SQRT_FLOOR·max` dropped.
pub fn inverse_sqrt(rho: &CMat) -> Result<(CMat, usize)> {
    let e = eigh(rho);
    let floor = INV_SQRT_FLOOR * e.max();
    let floored = e.values.iter().filter(|&&v| v < floor).count();
    let dim = e.values.len();
    if floored as f64 > MAX_FLOORED_FRACTION * dim as f64 {
        return Err(Error::FloorEngaged { floored, dim });
    }
    Ok((e.apply(|v| if v < floor { 0.0 } else { 1.0 / v.sqrt() }), floored))
}

impl QuadraticConstruction {
    /// Normalized sandwich vector `φ_j ∝ ρ̃^{-1/2} ψ_j`.
    pub fn sandwich_vector(&self, j: usize) -> CVec {
        let PovmElement::Rank1(v) = &self.povm.elements()[j] else {
            unreachable!("quadratic construction stores rank-one elements")
        };
        v / C64::new(v.norm(), 0.0)
    }

    /// `ν̃_j = ν_j ψ_j†ρ̃^{-1}ψ_j`, the weight of the normalized projector form.
    pub fn tilde_weight(&self, j: usize) -> f64 {
        self.nu[j] * self.povm.elements()[j].trace()
    }
}

/// Right eigenvector, eigenvalue nearest `½Tr|C_u|`, of the non-Hermitian form
/// `(Wû − λ̃)ᵀ(Wû − λ̃)` with `W = exp(−C_u Q̃_u)`; found by inverse iteration from `start`.
pub fn tilde_projector_vector(
    space: &FockSpace,
    derived: &QuadraticCostDerived,
    center: &[f64],
    start: &CVec,
) -> Result<CVec> {
    let s = derived.v.nrows();
    let l = derived.exchange_factor()? * to_complex(&derived.v);
    let form = DisplacedForm::new(space, &RMat::identity(s, s), &l)?;
    let mut h = form.at(center);
    for k in 0..h.nrows() {
        h[(k, k)] -= derived.r0;
    }
    let lu = h.lu();
    let mut x = start / C64::new(start.norm(), 0.0);
    for _ in 0..60 {
        let y = lu.solve(&x).ok_or_else(|| Error::InvalidInput("singular shifted form in inverse iteration".into()))?;
        let mut y = &y / C64::new(y.norm(), 0.0);
        // fix the global phase against the previous iterate
        let phase = x.dotc(&y);
        if phase.norm() > 0.0 {
            y *= phase.conj() / phase.norm();
        }
        let change = (&y - &x).norm();
        x = y;
        if change < 1e-14 {
            break;
        }
    }
    Ok(x)
}

/// Frobenius distance between the rank-one projectors of two vectors.
pub fn projector_distance(a: &CVec, b: &CVec) -> f64 {
    let overlap = a.dotc(b).norm_sqr() / (a.norm_squared() * b.norm_squared());
    (2.0 * (1.0 - overlap).max(0.0)).sqrt()
}

/// Optimal two-hypothesis test.
#[derive(Clone, Debug)]
pub struct BinaryTest {
    /// Projectors onto decisions 0 and 1, summing to the identity.
    pub projectors: [CMat; 2],
    pub risk: f64,
    pub ranks: [usize; 2],
}

/// `R̂_d = Σ_h cost[h][d] p_h ρ̂_h` for decisions `d ∈ {0, 1}`.
pub fn binary_risk_operators(rho: [&CMat; 2], priors: [f64; 2], cost: [[f64; 2]; 2]) -> Result<[CMat; 2]> {
    let dim = rho[0].nrows();
    if rho[1].nrows() != dim || rho[0].ncols() != dim || rho[1].ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: rho[1].nrows() });
    }
    if priors.iter().any(|&p| !(p >= 0.0)) || ((priors[0] + priors[1]) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("binary priors must be nonnegative and sum to 1".into()));
    }
    let op = |d: usize| rho[0] * C64::new(cost[0][d] * priors[0], 0.0) + rho[1] * C64::new(cost[1][d] * priors[1], 0.0);
    Ok([op(0), op(1)])
}

/// Decision 0 on the negative eigenspace of `R̂₀ − R̂₁`, decision 1 elsewhere (ties included).
pub fn binary_optimal_test(rho0: &CMat, rho1: &CMat, priors: [f64; 2], cost: [[f64; 2]; 2]) -> Result<BinaryTest> {
    let [r0, r1] = binary_risk_operators([rho0, rho1], priors, cost)?;
    let diff = &r0 - &r1;
    let e = eigh(&diff);
    let scale = e.min().abs().max(e.max().abs()).max(f64::MIN_POSITIVE);
    let tie = 1e-14 * scale;
    let negative: Vec<usize> = (0..e.values.len()).filter(|&k| e.values[k] < -tie).collect();
    let dim = diff.nrows();
    let mut p0 = CMat::zeros(dim, dim);
    for &k in &negative {
        let v = e.column(k);
        p0 += &v * v.adjoint();
    }
    let p1 = CMat::identity(dim, dim) - &p0;
    let neg_sum: f64 = negative.iter().map(|&k| e.values[k]).sum();
    let risk = r1.trace().re + neg_sum;
    Ok(BinaryTest { projectors: [p0, p1], risk, ranks: [negative.len(), dim - negative.len()] })
}

impl BinaryTest {
    /// The test as a two-point decision function.
    pub fn povm(&self) -> Result<DiscretizedPOVM> {
        DiscretizedPOVM::new(
            binary_grid(),
            self.projectors.iter().cloned().map(PovmElement::Dense).collect(),
            vec![1.0, 1.0],
        )
    }
}

/// Decision points `{0, 1}`.
pub fn binary_grid() -> DecisionGrid {
    DecisionGrid::points(vec![vec![0.0], vec![1.0]]).expect("two points")
}

pub fn binary_risk_field(rho0: &CMat, rho1: &CMat, priors: [f64; 2], cost: [[f64; 2]; 2]) -> Result<RiskField> {
    let [r0, r1] = binary_risk_operators([rho0, rho1], priors, cost)?;
    RiskField::from_operators(&binary_grid(), vec![r0, r1])
}

/// A random valid decision function on `grid` with weights `weights`.
///
/// Small problems get full-rank node operators; large grids get rank-one nodes.
pub fn random_povm(grid: &DecisionGrid, weights: &[f64], dim: usize, seed: u64) -> Result<DiscretizedPOVM> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
    let dense = grid.len() * dim * dim <= 20_000_000 && grid.len() < dim;
    let raw: Vec<PovmElement> = (0..grid.len())
        .map(|_| {
            if dense {
                let x = CMat::from_fn(dim, dim, |_, _| draw());
                PovmElement::Dense(&x * x.adjoint())
            } else {
                PovmElement::Rank1(CVec::from_fn(dim, |_, _| draw()))
            }
        })
        .collect();
    let mut sum = CMat::zeros(dim, dim);
    for (e, &w) in raw.iter().zip(weights) {
        sum += e.matrix() * C64::new(w, 0.0);
    }
    let (t, _) = inverse_sqrt(&sum)?;
    let elements = raw
        .into_iter()
        .map(|e| match e {
            PovmElement::Dense(m) => PovmElement::Dense(&t * m * &t),
            PovmElement::Rank1(v) => PovmElement::Rank1(&t * v),
        })
        .collect();
    DiscretizedPOVM::new(grid.clone(), elements, weights.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::gaussian_state;
    use crate::gaussian::{mu0_top_eigenvalue, quadratic_min_risk, simple_cost_risk};

    #[test]
    fn grid_layout_and_validation() {
        let g = DecisionGrid::centered(2, 1.0, 0.5).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.node(0), &[-1.0, -1.0]);
        assert_eq!(g.node(1), &[-1.0, -0.5]);
        assert_eq!(g.node(24), &[1.0, 1.0]);
        assert!((g.cell_volume().unwrap() - 0.25).abs() < 1e-15);
        assert!(g.covers(&[1.0, 1.0]));
        assert!(!g.covers(&[1.5, 1.0]));
        assert!(DecisionGrid::centered(2, 1.0, 0.3).is_err());
        assert!(DecisionGrid::rectangular(&[0.0], &[1.0], &[0.0]).is_err());
        assert!(DecisionGrid::points(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn binary_identical_states_is_trivial() {
        let sp = FockSpace::single(1.0, 24).unwrap();
        let rho = gaussian_state(&sp, &(RMat::identity(2, 2) * 1.0), &[0.0, 0.0]).unwrap().rho;
        let t = binary_optimal_test(&rho, &rho, [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(t.ranks, [0, 24]);
        assert!((t.risk - 0.5).abs() < 1e-12);
        // unequal priors pick the likelier hypothesis
        let t = binary_optimal_test(&rho, &rho, [0.7, 0.3], [[0.0, 1.0], [1.0, 0.0]]).unwrap();
        // decision 0 captures the whole support of the state; null directions are ties
        assert!((trace_product(&rho, &t.projectors[0]).re - 1.0).abs() < 1e-12);
        assert!((t.risk - 0.3).abs() < 1e-12);
    }

    #[test]
    fn binary_commuting_pair_matches_likelihood_ratio() {
        let d0 = [0.5, 0.3, 0.15, 0.05];
        let d1 = [0.1, 0.2, 0.3, 0.4];
        let diag = |d: &[f64]| CMat::from_diagonal(&CVec::from_iterator(4, d.iter().map(|&x| C64::new(x, 0.0))));
        let priors = [0.4, 0.6];
        let cost = [[0.0, 2.0], [1.0, 0.0]];
        let t = binary_optimal_test(&diag(&d0), &diag(&d1), priors, cost).unwrap();
        let mut best = f64::INFINITY;
        for rule in 0..16u32 {
            let mut r = 0.0;
            for k in 0..4 {
                let d = ((rule >> k) & 1) as usize;
                r += cost[0][d] * priors[0] * d0[k] + cost[1][d] * priors[1] * d1[k];
            }
            best = best.min(r);
        }
        assert!((t.risk - best).abs() < 1e-14);
        let sum = &t.projectors[0] + &t.projectors[1];
        assert!(max_abs(&(sum - CMat::identity(4, 4))) < 1e-14);
    }

    #[test]
    fn binary_label_swap_preserves_risk() {
        let sp = FockSpace::single(1.0, 30).unwrap();
        let q = RMat::identity(2, 2) * 1.5;
        let a = gaussian_state(&sp, &q, &[0.7, 0.0]).unwrap().rho;
        let b = gaussian_state(&sp, &q, &[-0.5, 0.4]).unwrap().rho;
        let cost = [[0.0, 1.0], [1.0, 0.0]];
        let t = binary_optimal_test(&a, &b, [0.3, 0.7], cost).unwrap();
        let u = binary_optimal_test(&b, &a, [0.7, 0.3], cost).unwrap();
        assert!((t.risk - u.risk).abs() < 1e-12);
        // projectors agree wherever the states live; null directions may flip
        let d = &t.projectors[0] - &u.projectors[1];
        assert!(trace_product(&a, &d).norm() < 1e-10);
        assert!(trace_product(&b, &d).norm() < 1e-10);
    }

    #[test]
    fn binary_field_risk_and_duality() {
        let sp = FockSpace::single(1.0, 20).unwrap();
        let q = RMat::identity(2, 2) * 2.0;
        let a = gaussian_state(&sp, &q, &[1.0, 0.0]).unwrap().rho;
        let b = gaussian_state(&sp, &q, &[-1.0, 0.0]).unwrap().rho;
        let cost = [[0.0, 1.0], [1.0, 0.0]];
        let t = binary_optimal_test(&a, &b, [0.5, 0.5], cost).unwrap();
        let field = binary_risk_field(&a, &b, [0.5, 0.5], cost).unwrap();
        let povm = t.povm().unwrap();
        assert!((average_risk(&field, &povm).unwrap() - t.risk).abs() < 1e-12);
        let lb = lower_bound(&field);
        for seed in 0..5 {
            let r = random_povm(field.grid(), &[1.0, 1.0], 20, seed).unwrap();
            assert!(r.full_completeness_defect() < 1e-10);
            let risk = average_risk(&field, &r).unwrap();
            assert!(risk >= t.risk - 1e-12);
            assert!(lb <= risk + 1e-6);
            assert!(lower_bound_for(&field, &r).unwrap() <= risk + 1e-10);
        }
    }

    #[test]
    fn simple_cost_small_grid_matches_closed_form() {
        // coarse but wide enough that the n ≤ 3 block is complete
        let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
        let sp = FockSpace::single(1.0, 40).unwrap();
        let grid = DecisionGrid::centered(2, 6.0, 0.25).unwrap();
        let povm = simple_cost_optimal_povm(&model, &grid, &sp).unwrap();
        assert!(povm.completeness_defect(&sp.block(3)) < 1e-3);
        let field = RiskField::simple(&model, 1.5, &grid, &sp).unwrap();
        let risk = average_risk(&field, &povm).unwrap();
        let analytic = simple_cost_risk(&model).unwrap();
        assert!((risk - analytic).abs() < 1e-6, "{risk} vs {analytic}");
        let lb = lower_bound(&field);
        assert!((lb - analytic).abs() < 1e-6);
        let mu0 = mu0_top_eigenvalue(&model).unwrap();
        let p = field.density().unwrap().iter().copied().fold(0.0, f64::max);
        for (&r, &d) in field.min_eigenvalues().iter().zip(field.density().unwrap()) {
            if d > 0.0 {
                assert!((r + p * mu0).abs() < 1e-8 * p);
            }
        }
    }

    #[test]
    fn simple_cost_rejects_truncated_support() {
        let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
        let sp = FockSpace::single(1.0, 12).unwrap();
        let grid = DecisionGrid::centered(2, 4.0, 0.5).unwrap();
        let err = RiskField::simple(&model, 4.0, &grid, &sp).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn quadratic_discrete_prior_is_finite_sum() {
        let model = GaussianChannelModel::isotropic(1.0, 2.0).unwrap();
        let sp = FockSpace::single(1.0, 20).unwrap();
        let points = vec![vec![0.5, 0.0], vec![-0.5, 0.25]];
        let weights = vec![0.25, 0.75];
        let prior = PriorModel::Discrete { points: points.clone(), weights: weights.clone() };
        let grid = DecisionGrid::points(vec![vec![0.1, -0.2]]).unwrap();
        let field = RiskField::quadratic(&model, &prior, &grid, &sp).unwrap();
        let fam = GaussianFamily::new(&sp, &model.q).unwrap();
        let mut expect = CMat::zeros(20, 20);
        for (p, w) in points.iter().zip(&weights) {
            let d = (p[0] - 0.1).powi(2) + (p[1] + 0.2).powi(2);
            expect += fam.state_unchecked(p).rho * C64::new(w * d, 0.0);
        }
        assert!(max_abs(&(field.operator(0) - expect)) < 1e-13);
    }

    #[test]
    fn quadratic_prior_trace_and_moments() {
        let model = GaussianChannelModel::isotropic(1.0, 5.0).unwrap();
        let sp = FockSpace::single(1.0, 40).unwrap();
        let k_lambda = RMat::identity(2, 2) * 2.0;
        let grid = DecisionGrid::centered(2, 1.0, 1.0).unwrap();
        let field =
            RiskField::quadratic(&model, &PriorModel::Gaussian { k_lambda: k_lambda.clone() }, &grid, &sp).unwrap();
        assert!(field.quadrature_residual < QUADRATURE_RESIDUAL_LIMIT);
        let center = (0..grid.len()).find(|&j| grid.node(j) == [0.0, 0.0]).unwrap();
        // Tr R̂(0) = ∫|λ|² p(λ) dλ = Tr K_λ
        let tr = field.operator(center).trace().re;
        assert!((tr - 4.0).abs() < 1e-3, "{tr}");
        // M₀ is ρ̃, whose form is Q̃ from the phase-space chain
        let derived = quadratic_cost_derived(&model, &k_lambda).unwrap();
        let rho_t = GaussianFamily::new(&sp, &derived.q_tilde).unwrap().state_unchecked(&[0.0, 0.0]).rho;
        let (m0, _, _) = field.moments().unwrap();
        let block = sp.block(15);
        let sub = |m: &CMat| CMat::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])]);
        assert!(max_abs(&sub(&(m0 - rho_t))) < 1e-6);
    }

    #[test]
    fn quadratic_optimal_risk_and_posterior_mean() {
        let model = GaussianChannelModel::isotropic(1.0, 5.0).unwrap();
        let sp = FockSpace::single(1.0, 48).unwrap();
        let k_lambda = RMat::identity(2, 2) * 2.0;
        let grid = DecisionGrid::centered(2, 5.6, 0.2).unwrap();
        let field =
            RiskField::quadratic(&model, &PriorModel::Gaussian { k_lambda: k_lambda.clone() }, &grid, &sp).unwrap();
        let qc = quadratic_cost_optimal_povm(&model, &k_lambda, &grid, &sp).unwrap();
        assert_eq!(qc.floored, 0);
        let exact = quadratic_min_risk(&qc.derived, &k_lambda).unwrap();
        let risk = average_risk(&field, &qc.povm).unwrap();
        assert!((risk - exact).abs() < 0.02 * exact, "{risk} vs {exact}");
        assert!((qc.ground_energy - qc.derived.r0).abs() < 1e-8);
        // spot-check the displacement route against direct eigensolves
        let fam = GroundFamily::new(&sp, &RMat::identity(2, 2), &qc.derived.v).unwrap();
        for j in (0..grid.len()).step_by(97) {
            if qc.povm.edge_mass[j] > 1e-12 {
                continue;
            }
            let g = fam.at(grid.node(j)).unwrap();
            assert!((g.eigenvalue - qc.derived.r0).abs() < 1e-6);
            assert!(projector_distance(&g.vector, &qc.ground_vectors[j]) < 1e-6);
        }
        // ρ̃^{-1/2} M₁ ρ̃^{-1/2} is the posterior mean û = V x̂ on the low block
        let (_, m1, _) = field.moments().unwrap();
        let x = sp.quadratures();
        let block = sp.block(8);
        for (i, mi) in m1.iter().enumerate().take(2) {
            let u = &qc.rho_tilde_inv_sqrt * mi * &qc.rho_tilde_inv_sqrt;
            let mut vx = CMat::zeros(48, 48);
            for (k, xk) in x.iter().enumerate().take(2) {
                vx += xk * C64::new(qc.derived.v[(i, k)], 0.0);
            }
            let d = CMat::from_fn(block.len(), block.len(), |a, b| u[(block[a], block[b])] - vx[(block[a], block[b])]);
            assert!(max_abs(&d) < 1e-4, "{}", max_abs(&d));
        }
    }

    #[test]
    fn degenerate_prior_is_reported() {
        let model = GaussianChannelModel::isotropic(1.0, 5.0).unwrap();
        let sp = FockSpace::single(1.0, 20).unwrap();
        let k_lambda = RMat::from_diagonal(&crate::linalg::RVec::from_vec(vec![2.0, 1e-13]));
        let grid = DecisionGrid::centered(2, 1.0, 0.5).unwrap();
        let err = quadratic_cost_optimal_povm(&model, &k_lambda, &grid, &sp).unwrap_err();
        assert!(matches!(err, Error::DegenerateMeasure { .. }));
    }

    #[test]
    fn inverse_sqrt_floor_limit() {
        let mut d = [1.0; 20];
        d[0] = 1e-20;
        let m = CMat::from_diagonal(&CVec::from_iterator(20, d.iter().map(|&x| C64::new(x, 0.0))));
        let (_, floored) = inverse_sqrt(&m).unwrap();
        assert_eq!(floored, 1);
        d[1] = 1e-20;
        let m = CMat::from_diagonal(&CVec::from_iterator(20, d.iter().map(|&x| C64::new(x, 0.0))));
        assert!(matches!(inverse_sqrt(&m), Err(Error::FloorEngaged { .. })));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let sp = FockSpace::single(1.0, 6).unwrap();
        let id = CMat::identity(6, 6);
        let field = RiskField::from_operators(&binary_grid(), vec![id.clone(), id.clone()]).unwrap();
        let other = DecisionGrid::points(vec![vec![0.0], vec![2.0]]).unwrap();
        let povm = DiscretizedPOVM::new(
            other,
            vec![PovmElement::Dense(id.clone()), PovmElement::Dense(id.clone() * C64::new(0.0, 0.0))],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(average_risk(&field, &povm), Err(Error::GridMismatch(_))));
        let zero = DiscretizedPOVM::new(
            binary_grid(),
            vec![PovmElement::Dense(id.clone() * ZERO), PovmElement::Dense(id * ZERO)],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!((zero.completeness_defect(&sp.block(5)) - 1.0).abs() < 1e-15);
    }
}
