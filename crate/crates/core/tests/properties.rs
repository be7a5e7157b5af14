use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qbayes::bayes::*;
use qbayes::entropy::*;
use qbayes::fock::*;
use qbayes::gaussian::*;
use qbayes::linalg::*;
use qbayes::measurement::*;

fn q_matrix(m: f64, aniso: f64, theta: f64, c: f64) -> RMat {
    let r = aniso.sqrt();
    let rot = RMat::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
    let d = RMat::from_diagonal(&RVec::from_vec(vec![m / c * r, m / c / r]));
    &rot * d * rot.transpose()
}

fn model(m: f64, aniso: f64, theta: f64, c: f64) -> GaussianChannelModel {
    GaussianChannelModel::new(CommutationMatrix::canonical(&[c]).unwrap(), q_matrix(m, aniso, theta, c)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covariance_is_physical_and_invertible(
        m in 0.05f64..5.0, aniso in 1.0f64..4.0, theta in 0.0f64..std::f64::consts::PI, c in 0.1f64..3.0,
    ) {
        let md = model(m, aniso, theta, c);
        let k = covariance(&md).unwrap();
        prop_assert!(heisenberg_margin(&k, &md.c) > 0.0);
        for nu in symplectic_eigenvalues(&k, &md.c).unwrap() {
            // in units of c, vacuum at ½
            prop_assert!(nu > 0.5);
        }
        let back = q_from_covariance(&k, &md.c).unwrap();
        prop_assert!(max_abs_real(&(back - &md.q)) < 1e-8 * max_abs_real(&md.q).max(1.0));
    }

    #[test]
    fn quantum_simple_risk_is_worse_than_classical(
        m in 0.05f64..5.0, aniso in 1.0f64..4.0, theta in 0.0f64..std::f64::consts::PI, c in 0.1f64..3.0,
    ) {
        let md = model(m, aniso, theta, c);
        let mu0 = mu0_top_eigenvalue(&md).unwrap();
        prop_assert!(mu0 > 0.0 && mu0 < 1.0);
        let r = simple_cost_risk(&md).unwrap();
        prop_assert!(r < 0.0);
        prop_assert!(r >= classical_simple_cost_risk(&md.q) - 1e-12 * r.abs());
    }

    #[test]
    fn quadratic_optimum_beats_heterodyne(
        m in 0.2f64..5.0, aniso in 1.0f64..3.0, theta in 0.0f64..std::f64::consts::PI, kl in 0.2f64..5.0,
    ) {
        let md = model(m, aniso, theta, 1.0);
        let k_lambda = RMat::identity(2, 2) * kl;
        let d = quadratic_cost_derived(&md, &k_lambda).unwrap();
        prop_assume!(!d.degenerate);
        let r = quadratic_min_risk(&d, &k_lambda).unwrap();
        let noise = outcome_covariance(&md).unwrap();
        let het = (&k_lambda - &k_lambda * (&k_lambda + noise).try_inverse().unwrap() * &k_lambda).trace();
        prop_assert!(r > 0.0);
        prop_assert!(r <= het + 1e-9, "{} > {}", r, het);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_povms_are_valid_and_respect_the_optimum(seed in any::<u64>(), x in 0.3f64..1.5, q in 0.5f64..5.0) {
        let sp = FockSpace::single(1.0, 16).unwrap();
        let fam = GaussianFamily::new(&sp, &(RMat::identity(2, 2) * q)).unwrap();
        let a = fam.state_unchecked(&[x, 0.0]).rho;
        let b = fam.state_unchecked(&[-x, 0.0]).rho;
        let cost = [[0.0, 1.0], [1.0, 0.0]];
        let best = binary_optimal_test(&a, &b, [0.5, 0.5], cost).unwrap();
        let field = binary_risk_field(&a, &b, [0.5, 0.5], cost).unwrap();
        let p = random_povm(field.grid(), &[1.0, 1.0], 16, seed).unwrap();
        prop_assert!(p.full_completeness_defect() < 1e-10);
        prop_assert!(p.min_eigenvalue() > -1e-12);
        let r = average_risk(&field, &p).unwrap();
        prop_assert!(best.risk <= r + 1e-6);
        prop_assert!(lower_bound(&field) <= r + 1e-6);
    }

    #[test]
    fn gibbs_povm_is_a_decision_function(x in 0.3f64..1.5, eps in 0.05f64..0.5) {
        let sp = FockSpace::single(1.0, 16).unwrap();
        let fam = GaussianFamily::new(&sp, &(RMat::identity(2, 2) * 2.0)).unwrap();
        let a = fam.state_unchecked(&[x, 0.0]).rho;
        let b = fam.state_unchecked(&[-x, 0.0]).rho;
        let field = binary_risk_field(&a, &b, [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let sol = gibbs_povm(&field, eps, &[1.0, 1.0], &SolverSettings::default(), None).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.povm.full_completeness_defect() < 1e-7);
        prop_assert!(sol.povm.min_eigenvalue() > -1e-12);
        // the regularized optimum sits above the unregularized one and below its dual certificate
        let best = binary_optimal_test(&a, &b, [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]]).unwrap().risk;
        prop_assert!(sol.risk >= best - 1e-7);
        prop_assert!(sol.dual_bound(&field) <= best + 1e-9);
    }

    #[test]
    fn empirical_risk_is_seed_deterministic(seed in any::<u64>()) {
        let md = GaussianChannelModel::isotropic(1.0, 2.0).unwrap();
        let prior = PriorModel::Gaussian { k_lambda: RMat::identity(2, 2) };
        let a = empirical_risk(&md, &prior, SampleCost::Quadratic, &Estimator::Raw, 64, seed).unwrap();
        let b = empirical_risk(&md, &prior, SampleCost::Quadratic, &Estimator::Raw, 64, seed).unwrap();
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }
}

#[test]
fn outcome_distribution_shifts_with_the_signal() {
    let md = GaussianChannelModel::isotropic(1.0, 1.0).unwrap();
    let sp = FockSpace::single(1.0, 40).unwrap();
    let grid = DecisionGrid::centered(2, 7.0, 0.5).unwrap();
    let base = outcome_distribution(&md, &[0.0, 0.0], &grid, &sp).unwrap();
    let moved = outcome_distribution(&md, &[1.0, -0.5], &grid, &sp).unwrap();
    let side = grid.axes()[1].count;
    let mut worst = 0.0_f64;
    for j in 0..grid.len() {
        let n = grid.node(j);
        let (a, b) = (n[0] + 1.0, n[1] - 0.5);
        if a.abs() > 7.0 || b.abs() > 7.0 {
            continue;
        }
        // node index of (a, b): two steps per unit on the first axis, one on the second
        let k = j + 2 * side - 1;
        assert!((grid.node(k)[0] - a).abs() < 1e-12 && (grid.node(k)[1] - b).abs() < 1e-12);
        worst = worst.max((moved.route_a[k] - base.route_a[j]).abs());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn hermitian_inputs_survive_the_pipeline() {
    let sp = FockSpace::single(1.0, 20).unwrap();
    let fam = GaussianFamily::new(&sp, &(RMat::identity(2, 2) * 0.8)).unwrap();
    let st = fam.state(&[0.4, -0.2]).unwrap();
    assert!(hermitian_defect(&st.rho) < 1e-14);
    let r = st.rho.clone() * C64::new(-1.0, 0.0);
    let grid = DecisionGrid::points(vec![vec![0.0], vec![1.0]]).unwrap();
    let field = RiskField::from_operators(&grid, vec![r.clone(), CMat::zeros(20, 20)]).unwrap();
    let sol = gibbs_povm(&field, 0.1, &[1.0, 1.0], &SolverSettings::default(), None).unwrap();
    for e in sol.povm.elements() {
        assert!(hermitian_defect(&e.matrix()) < 1e-12);
    }
}
