//! The `qbayes` subcommands. Each fills an [`Artifacts`] and may fail with an engine error.

use std::path::Path;

use crate::bayes::{
    average_risk, binary_optimal_test, binary_risk_field, lower_bound, lower_bound_for, quadratic_cost_optimal_povm,
    random_povm, risk_field, simple_cost_optimal_povm, CostFunction, DecisionGrid, DiscretizedPOVM, RiskField,
};
use crate::entropy::{epsilon_continuation, trace_csv};
use crate::error::{Error, Result};
use crate::fock::GaussianFamily;
use crate::gaussian::{
    mu0_top_eigenvalue, quadratic_cost_derived, quadratic_min_risk, simple_cost_risk, GaussianChannelModel, PriorModel,
};
use crate::linalg::CMat;
use crate::measurement::{empirical_risk, outcome_distribution, posterior_mean_gain, Estimator};

use super::output::{unix_seconds, write_run, Artifacts, Cell, Field, Record, RunInfo, Table};
use super::scenario::{CostKind, EstimatorKind, Scenario};

/// Largest route-(a)/(b) disagreement accepted before sampling.
pub const ROUTE_AGREEMENT: f64 = 1e-6;

/// Random decision functions tried against each optimum.
pub const DUALITY_PROBES: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckIdentity,
    Risk,
    Binary,
    Regularize,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckIdentity => "check-identity",
            Command::Risk => "risk",
            Command::Binary => "binary",
            Command::Regularize => "regularize",
            Command::Simulate => "simulate",
        }
    }
}

/// 0 success, 1 validation, 2 degenerate model, 3 numerical target not reached.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateMeasure { .. }
        | Error::DegenerateForm(_)
        | Error::IllSeparatedGround(_)
        | Error::FloorEngaged { .. } => 2,
        Error::NotConverged { .. } | Error::Divergence { .. } | Error::ThresholdNotMet { .. } => 3,
        _ => 1,
    }
}

/// Load, run and persist one command; returns the process exit code.
pub fn run(command: Command, scenario: &Path, seed: Option<u64>, out: &Path) -> i32 {
    let started = unix_seconds();
    let mut artifacts = Artifacts::default();
    let loaded = Scenario::load(scenario);
    let (hash, seed) = match &loaded {
        Ok(s) => (s.sha256(), seed.unwrap_or(s.seed)),
        Err(_) => (String::new(), seed.unwrap_or(0)),
    };
    let result = loaded.and_then(|s| execute(command, &s, seed, &mut artifacts));
    let (code, error) = match &result {
        Ok(()) => (0, None),
        Err(e) => (exit_code(e), Some(e.to_string())),
    };
    for w in &artifacts.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    let info = RunInfo {
        command: command.name().into(),
        scenario_sha256: hash,
        seed,
        started_unix: started,
        exit_code: code,
        error,
    };
    match write_run(out, &artifacts, &info) {
        Ok(_) => code,
        Err(e) => {
            eprintln!("error: could not write outputs: {e}");
            1
        }
    }
}

pub fn execute(command: Command, s: &Scenario, seed: u64, art: &mut Artifacts) -> Result<()> {
    match command {
        Command::CheckIdentity => check_identity(s, art),
        Command::Risk => risk(s, art),
        Command::Binary => binary(s, art),
        Command::Regularize => regularize(s, art),
        Command::Simulate => simulate(s, seed, art),
    }
}

fn lambda_header(prefix: &str, s: usize) -> Vec<String> {
    (1..=s).map(|k| format!("{prefix}_{k}")).collect()
}

fn povm_table(povm: &DiscretizedPOVM) -> Table {
    let s = povm.grid().dim();
    let mut header = vec!["node".to_string()];
    header.extend(lambda_header("lambda", s));
    header.extend(["weight", "trace", "min_eigenvalue", "edge_mass"].map(String::from));
    let mut t = Table::new(header);
    for (j, e) in povm.elements().iter().enumerate() {
        let mut row: Vec<Cell> = vec![j.into()];
        row.extend(povm.grid().node(j).iter().map(|&x| Cell::Num(x)));
        row.extend([povm.weights()[j], e.trace(), e.min_eigenvalue(), povm.edge_mass[j]].map(Cell::Num));
        t.push(row);
    }
    t
}

/// Largest risk deficit of random decision functions against `optimum` (weak duality).
fn duality_probe(field: &RiskField, weights: &[f64], optimum: f64, seed: u64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..DUALITY_PROBES {
        let p = random_povm(field.grid(), weights, field.dim(), seed.wrapping_add(k))?;
        worst = worst.max(optimum - average_risk(field, &p)?);
    }
    Ok(worst)
}

fn require_single_mode(model: &GaussianChannelModel) -> Result<f64> {
    match model.c.canonical_scales() {
        Some(c) if c.len() == 1 => Ok(c[0]),
        _ => Err(Error::Scenario("this command needs a single-mode scenario".into())),
    }
}

pub fn check_identity(s: &Scenario, art: &mut Artifacts) -> Result<()> {
    let model = s.model()?;
    let c = require_single_mode(&model)?;
    let space = s.space()?;
    let trusted = s.fock.trusted_levels;
    if 2 * (trusted + 1) > s.fock.levels {
        art.warn(format!("truncation-dominated: trusted block n <= {trusted} exceeds half of N = {}", s.fock.levels));
    }
    let block = space.block(trusted);
    let mut table = Table::new(["radius", "step", "nodes", "defect", "max_edge_mass"]);
    let mut defects = Vec::new();
    let step = s.identity.step * c.sqrt();
    for &r in &s.identity.radii {
        let grid = DecisionGrid::centered(2, r * c.sqrt(), step)?;
        let povm = simple_cost_optimal_povm(&model, &grid, &space)?;
        let defect = povm.completeness_defect(&block);
        let edge = povm.edge_mass.iter().fold(0.0_f64, |m, &e| m.max(e));
        table.push(vec![(r * c.sqrt()).into(), step.into(), grid.len().into(), defect.into(), edge.into()]);
        defects.push((r, defect));
    }
    art.add("identity_defects.csv", table.to_csv());
    let mut sorted = defects.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 < w[0].1);
    let (_, last) = *sorted.last().expect("radii validated nonempty");
    art.diagnostics = Record::new()
        .with("trusted_levels", trusted)
        .with("final_defect", last)
        .with("threshold", s.identity.threshold)
        .with("strictly_decreasing", monotone);
    if !monotone {
        art.warn("identity defect does not decrease strictly with the radius");
    }
    if !(last < s.identity.threshold) {
        return Err(Error::ThresholdNotMet {
            what: "identity defect".into(),
            value: last,
            threshold: s.identity.threshold,
        });
    }
    Ok(())
}

fn cost_of(s: &Scenario) -> Result<CostKind> {
    s.cost.ok_or_else(|| Error::Scenario("scenario has no cost".into()))
}

pub fn risk(s: &Scenario, art: &mut Artifacts) -> Result<()> {
    let model = s.model()?;
    let space = s.space()?;
    let grid = s.grid()?;
    let block = space.block(s.fock.trusted_levels);
    match (cost_of(s)?, s.prior()?) {
        (CostKind::Simple, Some(PriorModel::WideFlat { support_half_width })) => {
            let field = RiskField::simple(&model, support_half_width, &grid, &space)?;
            let povm = simple_cost_optimal_povm(&model, &grid, &space)?;
            let quadrature = average_risk(&field, &povm)?;
            let analytic = simple_cost_risk(&model)?;
            let lower = lower_bound(&field);
            let probe = duality_probe(&field, povm.weights(), lower, s.seed)?;
            let report = Record::new()
                .with("cost", "simple")
                .with("analytic", analytic)
                .with("quadrature", quadrature)
                .with("monte_carlo", Field::Null)
                .with("lower_bound", lower)
                .with("duality_gap", quadrature - lower)
                .with("deviation", quadrature - analytic)
                .with("mu0", mu0_top_eigenvalue(&model)?)
                .with("completeness_defect", povm.completeness_defect(&block))
                .with("truncation_mass", field.truncation_mass)
                .with("random_povm_deficit", probe)
                .with("nodes", grid.len());
            art.diagnostics = report.clone();
            art.add("risk_report.json", report.to_json());
            art.add("povm_diag.csv", povm_table(&povm).to_csv());
            Ok(())
        }
        (CostKind::Simple, _) => Err(Error::Scenario("simple cost needs a wide_flat prior".into())),
        (CostKind::Quadratic, Some(prior @ PriorModel::Gaussian { .. })) => {
            let PriorModel::Gaussian { k_lambda } = &prior else { unreachable!() };
            let derived = quadratic_cost_derived(&model, k_lambda)?;
            if derived.degenerate {
                let report = Record::new()
                    .with("cost", "quadratic")
                    .with("degenerate", true)
                    .with("sigma_nu_min_eigenvalue", derived.sigma_nu_min_eig)
                    .with("r0", derived.r0);
                art.diagnostics = report.clone();
                art.add("risk_report.json", report.to_json());
                return Err(Error::DegenerateMeasure {
                    min_eig: derived.sigma_nu_min_eig,
                    norm: derived.sigma_nu.norm(),
                });
            }
            let analytic = quadratic_min_risk(&derived, k_lambda)?;
            let construction = quadratic_cost_optimal_povm(&model, k_lambda, &grid, &space)?;
            let field = risk_field(&model, &prior, CostFunction::Quadratic, &grid, &space)?;
            let quadrature = average_risk(&field, &construction.povm)?;
            let lower = lower_bound_for(&field, &construction.povm)?;
            let probe = duality_probe(&field, construction.povm.weights(), quadrature, s.seed)?;
            let report = Record::new()
                .with("cost", "quadratic")
                .with("degenerate", false)
                .with("analytic", analytic)
                .with("quadrature", quadrature)
                .with("monte_carlo", Field::Null)
                .with("lower_bound", lower)
                .with("relative_deviation", quadrature / analytic - 1.0)
                .with("r0", derived.r0)
                .with("ground_energy", construction.ground_energy)
                .with("sigma_nu_min_eigenvalue", derived.sigma_nu_min_eig)
                .with("floored_directions", construction.floored)
                .with("completeness_defect", construction.povm.completeness_defect(&block))
                .with("quadrature_residual", field.quadrature_residual)
                .with("truncation_mass", field.truncation_mass)
                .with("random_povm_deficit", probe)
                .with("nodes", grid.len());
            art.diagnostics = report.clone();
            art.add("risk_report.json", report.to_json());
            art.add("povm_diag.csv", povm_table(&construction.povm).to_csv());
            Ok(())
        }
        (CostKind::Quadratic, _) => Err(Error::Scenario("the quadratic optimum needs a gaussian prior".into())),
        (CostKind::Zero, _) => Err(Error::Scenario("risk needs the simple or quadratic cost".into())),
    }
}

type BinaryProblem = ((CMat, CMat), [f64; 2], [[f64; 2]; 2]);

fn binary_states(s: &Scenario) -> Result<BinaryProblem> {
    let spec = s.binary.as_ref().ok_or_else(|| Error::Scenario("scenario has no [binary] section".into()))?;
    let model = s.model()?;
    let space = s.space()?;
    let family = GaussianFamily::new(&space, &model.q)?;
    let a = family.state(&spec.points[0])?.rho;
    let b = family.state(&spec.points[1])?.rho;
    let (priors, cost) = s.binary_arrays().expect("binary present");
    Ok(((a, b), priors, cost))
}

pub fn binary(s: &Scenario, art: &mut Artifacts) -> Result<()> {
    let ((a, b), priors, cost) = binary_states(s)?;
    let test = binary_optimal_test(&a, &b, priors, cost)?;
    let field = binary_risk_field(&a, &b, priors, cost)?;
    let povm = test.povm()?;
    let check = average_risk(&field, &povm)?;
    let probe = duality_probe(&field, &[1.0, 1.0], test.risk, s.seed)?;
    let report = Record::new()
        .with("risk", test.risk)
        .with("risk_via_field", check)
        .with("ranks", vec![test.ranks[0], test.ranks[1]])
        .with("random_povm_deficit", probe)
        .with("weak_duality", probe <= 1e-6);
    art.diagnostics = report.clone();
    art.add("risk_report.json", report.to_json());
    let mut t = Table::new(["decision", "trace", "rank"]);
    for d in 0..2 {
        t.push(vec![d.into(), test.projectors[d].trace().re.into(), test.ranks[d].into()]);
    }
    art.add("povm_diag.csv", t.to_csv());
    Ok(())
}

pub fn regularize(s: &Scenario, art: &mut Artifacts) -> Result<()> {
    let settings = s.solver.settings();
    let (field, nu, reference, label) = if s.binary.is_some() {
        let ((a, b), priors, cost) = binary_states(s)?;
        let test = binary_optimal_test(&a, &b, priors, cost)?;
        (binary_risk_field(&a, &b, priors, cost)?, vec![1.0, 1.0], test.risk, "binary_optimum")
    } else {
        let model = s.model()?;
        let Some(PriorModel::WideFlat { support_half_width }) = s.prior()? else {
            return Err(Error::Scenario("regularize needs a [binary] section or a wide_flat prior".into()));
        };
        let space = s.space()?;
        let grid = s.grid()?;
        let field = RiskField::simple(&model, support_half_width, &grid, &space)?;
        let cell = grid.cell_volume().expect("centered grids are rectangular");
        let nu = vec![cell / model.c.cell_volume(); grid.len()];
        let coherent = average_risk(&field, &simple_cost_optimal_povm(&model, &grid, &space)?)?;
        (field, nu, coherent, "coherent_povm")
    };
    let cont = match epsilon_continuation(&field, &nu, &s.solver.epsilons, &settings) {
        Ok(c) => c,
        Err(e) => {
            if let Error::Divergence { trace, .. } = &e {
                art.add("solver_trace.csv", trace_csv(trace));
            }
            return Err(e);
        }
    };
    let mut t = Table::new(["epsilon", "risk", "entropy", "residual", "iterations"]);
    for p in &cont.curve {
        t.push(vec![p.epsilon.into(), p.risk.into(), p.entropy.into(), p.residual.into(), p.iterations.into()]);
    }
    art.add("eps_curve.csv", t.to_csv());
    let report = Record::new()
        .with("extrapolated_risk", cont.extrapolated_risk)
        .with("final_risk", cont.last.risk)
        .with("reference", label)
        .with("reference_risk", reference)
        .with("relative_deviation", cont.extrapolated_risk / reference - 1.0)
        .with("monotone", cont.is_monotone(1e-10))
        .with("max_violation", cont.max_violation)
        .with("dual_bound", cont.last.dual_bound(&field))
        .with("final_residual", cont.last.residual);
    art.diagnostics = report.clone();
    art.add("risk_report.json", report.to_json());
    Ok(())
}

pub fn simulate(s: &Scenario, seed: u64, art: &mut Artifacts) -> Result<()> {
    let model = s.model()?;
    let prior = s.prior()?.ok_or_else(|| Error::Scenario("simulate needs a prior".into()))?;
    let cost = s.cost.unwrap_or(CostKind::Quadratic);
    let estimator = match (s.simulate.estimator, &prior) {
        (EstimatorKind::Raw, _) => Estimator::Raw,
        (EstimatorKind::PosteriorMean, PriorModel::Gaussian { k_lambda }) => {
            Estimator::Linear(posterior_mean_gain(&model, k_lambda)?)
        }
        (EstimatorKind::PosteriorMean, _) => {
            return Err(Error::Scenario("the posterior-mean estimator needs a gaussian prior".into()))
        }
    };
    // certify the closed-form outcome model against the projector route
    let zero = vec![0.0; model.dim()];
    let routes = outcome_distribution(&model, &zero, &s.grid()?, &s.space()?)?;
    art.diagnostics.set("route_sup_difference", routes.sup_difference);
    if !(routes.sup_difference < ROUTE_AGREEMENT) {
        return Err(Error::ThresholdNotMet {
            what: "outcome route disagreement".into(),
            value: routes.sup_difference,
            threshold: ROUTE_AGREEMENT,
        });
    }
    let mc = empirical_risk(&model, &prior, cost.into(), &estimator, s.simulate.samples, seed)?;
    let analytic = match (&prior, cost, &estimator) {
        (PriorModel::Gaussian { k_lambda }, CostKind::Quadratic, Estimator::Linear(_)) => {
            let d = quadratic_cost_derived(&model, k_lambda)?;
            if d.degenerate {
                None
            } else {
                Some(quadratic_min_risk(&d, k_lambda)?)
            }
        }
        (_, CostKind::Quadratic, Estimator::Raw) => Some(crate::measurement::outcome_covariance(&model)?.trace()),
        (_, CostKind::Zero, _) => Some(0.0),
        _ => None,
    };
    let z = analytic.map(|a| if mc.stderr > 0.0 { (mc.estimate - a) / mc.stderr } else { 0.0 });
    let report = Record::new()
        .with("cost", format!("{cost:?}").to_lowercase())
        .with("analytic", analytic)
        .with("quadrature", Field::Null)
        .with("monte_carlo", mc.estimate)
        .with("stderr", mc.stderr)
        .with("z_score", z)
        .with("samples", s.simulate.samples)
        .with("route_sup_difference", routes.sup_difference)
        .with("route_mass", routes.mass_a);
    art.diagnostics = report.clone();
    art.add("risk_report.json", report.to_json());
    let sdim = model.dim();
    let mut header = vec!["run_id".to_string(), "draw_index".to_string()];
    header.extend(lambda_header("lambda", sdim));
    header.extend(lambda_header("outcome", sdim));
    header.push("cost".into());
    let mut t = Table::new(header);
    let run_id = format!("{}-{seed}", &s.sha256()[..12]);
    for r in &mc.records {
        let mut row: Vec<Cell> = vec![Cell::Text(run_id.clone()), r.draw_index.into()];
        row.extend(r.lambda.iter().map(|&x| Cell::Num(x)));
        row.extend(r.outcome.iter().map(|&x| Cell::Num(x)));
        row.push(r.cost.into());
        t.push(row);
    }
    art.add("samples.csv", t.to_csv());
    Ok(())
}
