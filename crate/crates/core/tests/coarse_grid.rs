//! Entropy-regularized simple cost on a coarse 9×9 grid.
//!
//! With a prior supported on only a few quantum cells the regularized optimum
//! gains from the edges of the support and lands well below the wide-prior
//! value `−μ₀/det^{1/2}|2πC|`; the checks here are the ones that stay valid.

use qbayes::bayes::*;
use qbayes::entropy::*;
use qbayes::fock::*;
use qbayes::gaussian::*;

#[test]
fn continuation_on_a_coarse_grid() {
    let model = GaussianChannelModel::isotropic(1.0, 0.5).unwrap();
    let sp = FockSpace::single(1.0, 40).unwrap();
    let grid = DecisionGrid::centered(2, 4.0, 1.0).unwrap();
    assert_eq!(grid.len(), 81);
    let field = RiskField::simple(&model, 2.0, &grid, &sp).unwrap();
    let nu = vec![1.0 / model.c.cell_volume(); 81];
    let (_, defect) = closed_form_f0(&field, 0.02, &nu).unwrap();
    assert!(defect > 0.0);
    let cont =
        epsilon_continuation(&field, &nu, &[0.02, 0.01, 0.005, 0.0025, 0.00125], &SolverSettings::default()).unwrap();
    assert!(cont.is_monotone(1e-12));
    let coherent = average_risk(&field, &simple_cost_optimal_povm(&model, &grid, &sp).unwrap()).unwrap();
    let last = cont.last.risk;
    // a valid decision function: no better than the dual certificate, better than coherent projectors
    assert!(cont.last.povm.full_completeness_defect() < 1e-7);
    assert!(cont.last.dual_bound(&field) <= last);
    assert!(last < coherent);
    assert!(lower_bound_for(&field, &cont.last.povm).unwrap() <= last + 1e-9);
    // the wide-prior value is not a bound here
    assert!(last < lower_bound(&field));
    assert!((coherent - simple_cost_risk(&model).unwrap()).abs() < 1e-6);
}
