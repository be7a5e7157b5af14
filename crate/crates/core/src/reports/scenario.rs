//! Scenario files: TOML with one section per concern, matrices as row-major lists.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::DecisionGrid;
use crate::entropy::SolverSettings;
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::gaussian::{CommutationMatrix, GaussianChannelModel, PriorModel};
use crate::linalg::{eigh_real, RMat};
use crate::measurement::{outcome_covariance, SampleCost};

/// Prior coverage required of the decision grid, in prior standard deviations.
pub const PRIOR_COVERAGE_SIGMAS: f64 = 6.0;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub cost: Option<CostKind>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub fock: FockSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub binary: Option<BinarySpec>,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub identity: IdentitySpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Commutator scale `c_k` of each mode.
    pub c: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    WideFlat { support_half_width: f64 },
    Gaussian { k_lambda: Vec<Vec<f64>> },
    Discrete { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Simple,
    Quadratic,
    Zero,
}

impl From<CostKind> for SampleCost {
    fn from(c: CostKind) -> Self {
        match c {
            CostKind::Simple => SampleCost::Simple,
            CostKind::Quadratic => SampleCost::Quadratic,
            CostKind::Zero => SampleCost::Zero,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Half-width of the centered square grid; derived from the prior when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    0.1
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { radius: None, step: default_step() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FockSpec {
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Occupation block on which completeness and commutators are reported.
    #[serde(default = "default_trusted")]
    pub trusted_levels: usize,
}

fn default_levels() -> usize {
    40
}

fn default_trusted() -> usize {
    10
}

impl Default for FockSpec {
    fn default() -> Self {
        Self { levels: default_levels(), trusted_levels: default_trusted() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_streak")]
    pub divergence_streak: usize,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.02]
}
fn default_tolerance() -> f64 {
    1e-8
}
fn default_iterations() -> usize {
    500
}
fn default_damping() -> f64 {
    0.5
}
fn default_streak() -> usize {
    20
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
            tolerance: default_tolerance(),
            max_iterations: default_iterations(),
            damping: default_damping(),
            divergence_streak: default_streak(),
        }
    }
}

impl SolverSpec {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            damping: self.damping,
            divergence_streak: self.divergence_streak,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BinarySpec {
    /// Signals of the two hypotheses.
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_priors")]
    pub priors: Vec<f64>,
    /// `cost[h][d]`: cost of deciding `d` under hypothesis `h`.
    #[serde(default = "default_binary_cost")]
    pub cost: Vec<Vec<f64>>,
}

fn default_priors() -> Vec<f64> {
    vec![0.5, 0.5]
}

fn default_binary_cost() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![1.0, 0.0]]
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    PosteriorMean,
    Raw,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub estimator: EstimatorKind,
}

fn default_samples() -> usize {
    100_000
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { samples: default_samples(), estimator: EstimatorKind::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IdentitySpec {
    /// Grid radii in units of `√c`.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Grid step in units of `√c`.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_radii() -> Vec<f64> {
    vec![4.0, 6.0, 8.0]
}

fn default_threshold() -> f64 {
    1e-3
}

impl Default for IdentitySpec {
    fn default() -> Self {
        Self { radii: default_radii(), step: default_step(), threshold: default_threshold() }
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<RMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Scenario(format!("{what} must be a non-empty square matrix")));
    }
    Ok(RMat::from_fn(n, n, |i, j| rows[i][j]))
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Scenario(format!("{what} must be positive, got {x}")))
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Key-sorted compact JSON; stable under re-serialization.
    pub fn canonical_json(&self) -> String {
        serde_json::to_value(self).expect("scenario serializes").to_string()
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn model(&self) -> Result<GaussianChannelModel> {
        for &c in &self.model.c {
            positive(c, "commutator scale")?;
        }
        let c = CommutationMatrix::canonical(&self.model.c)?;
        GaussianChannelModel::new(c, matrix(&self.model.q, "q")?)
    }

    pub fn prior(&self) -> Result<Option<PriorModel>> {
        let Some(spec) = &self.prior else { return Ok(None) };
        let p = match spec {
            PriorSpec::WideFlat { support_half_width } => {
                PriorModel::WideFlat { support_half_width: *support_half_width }
            }
            PriorSpec::Gaussian { k_lambda } => PriorModel::Gaussian { k_lambda: matrix(k_lambda, "k_lambda")? },
            PriorSpec::Discrete { points, weights } => {
                PriorModel::Discrete { points: points.clone(), weights: weights.clone() }
            }
        };
        p.validate(2 * self.model.c.len())?;
        Ok(Some(p))
    }

    pub fn space(&self) -> Result<FockSpace> {
        FockSpace::new(&self.model.c, self.fock.levels)
    }

    /// Half-width the grid needs to cover the prior.
    pub fn required_radius(&self) -> Result<f64> {
        Ok(match self.prior()? {
            Some(PriorModel::Gaussian { k_lambda }) => {
                let (vals, _) = eigh_real(&k_lambda);
                PRIOR_COVERAGE_SIGMAS * vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
            }
            Some(PriorModel::WideFlat { support_half_width }) => support_half_width,
            Some(PriorModel::Discrete { points, .. }) => points.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs())),
            None => 0.0,
        })
    }

    /// Grid radius: the configured one, or prior coverage plus six outcome
    /// standard deviations for the flat and discrete priors.
    pub fn grid_radius(&self) -> Result<f64> {
        if let Some(r) = self.grid.radius {
            return Ok(r);
        }
        let base = self.required_radius()?;
        let r = match self.prior()? {
            Some(PriorModel::Gaussian { .. }) => base,
            _ => {
                let cov = outcome_covariance(&self.model()?)?;
                let (vals, _) = eigh_real(&cov);
                base + PRIOR_COVERAGE_SIGMAS * vals.last().copied().unwrap_or(0.0).sqrt()
            }
        };
        // whole number of steps
        Ok((r / self.grid.step - 1e-9).ceil() * self.grid.step)
    }

    pub fn grid(&self) -> Result<DecisionGrid> {
        DecisionGrid::centered(2 * self.model.c.len(), self.grid_radius()?, self.grid.step)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        let s = model.dim();
        self.prior()?;
        positive(self.grid.step, "grid step")?;
        if let Some(r) = self.grid.radius {
            positive(r, "grid radius")?;
            let need = self.required_radius()?;
            if r + 1e-9 < need {
                return Err(Error::Scenario(format!("grid radius {r} does not cover the prior (needs {need})")));
            }
        }
        if self.fock.levels < 2 {
            return Err(Error::Scenario("fock.levels must be at least 2".into()));
        }
        if self.fock.trusted_levels >= self.fock.levels {
            return Err(Error::Scenario("fock.trusted_levels must be below fock.levels".into()));
        }
        let sv = &self.solver;
        positive(sv.tolerance, "solver tolerance")?;
        positive(sv.damping, "solver damping")?;
        if sv.damping >= 1.0 || sv.max_iterations == 0 || sv.divergence_streak == 0 {
            return Err(Error::Scenario("solver damping must be in (0, 1) and counts positive".into()));
        }
        if sv.epsilons.is_empty() {
            return Err(Error::Scenario("solver.epsilons is empty".into()));
        }
        for &e in &sv.epsilons {
            positive(e, "epsilon")?;
        }
        if sv.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Scenario("solver.epsilons must be strictly decreasing".into()));
        }
        if let Some(b) = &self.binary {
            if b.points.len() != 2 || b.points.iter().any(|p| p.len() != s) {
                return Err(Error::Scenario(format!("binary.points needs two points of length {s}")));
            }
            if b.priors.len() != 2 || b.priors.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::Scenario("binary.priors needs two nonnegative entries".into()));
            }
            if b.cost.len() != 2 || b.cost.iter().any(|r| r.len() != 2 || r.iter().any(|x| !x.is_finite())) {
                return Err(Error::Scenario("binary.cost must be 2x2".into()));
            }
        }
        if self.simulate.samples < 2 {
            return Err(Error::Scenario("simulate.samples must be at least 2".into()));
        }
        let id = &self.identity;
        positive(id.step, "identity step")?;
        positive(id.threshold, "identity threshold")?;
        if id.radii.is_empty() {
            return Err(Error::Scenario("identity.radii is empty".into()));
        }
        for &r in &id.radii {
            positive(r, "identity radius")?;
        }
        Ok(())
    }

    pub fn binary_arrays(&self) -> Option<([f64; 2], [[f64; 2]; 2])> {
        self.binary
            .as_ref()
            .map(|b| ([b.priors[0], b.priors[1]], [[b.cost[0][0], b.cost[0][1]], [b.cost[1][0], b.cost[1][1]]]))
    }
}
