use std::f64::consts::PI;

use proptest::prelude::*;
use qbatt_core::dynamics::{steady_state, Generator};
use qbatt_core::executor::Sequential;
use qbatt_core::linalg::{self, c64, Operator};
use qbatt_core::metrics;
use qbatt_core::operators::battery_hamiltonian;
use qbatt_core::oracles;
use qbatt_core::sweeps::{find_critical_j, grid_sweep, optimize_chi, ChiSearch, CriticalSearch, Evaluator, InitialState, Metric, SweepAxis, SweepSurface};
use qbatt_core::{ChainSpec, ControlSpec, DensityMatrix};

fn matrix(d: usize, entries: &[f64]) -> Operator {
    Operator::from_fn(d, d, |r, c| c64::new(entries[2 * (r * d + c)], entries[2 * (r * d + c) + 1]))
}

fn density(entries: &[f64]) -> DensityMatrix {
    let a = matrix(4, entries);
    DensityMatrix::normalized(&a * linalg::adjoint(&a)).unwrap()
}

fn unitary(entries: &[f64]) -> Operator {
    let mut a = matrix(4, entries);
    linalg::hermitize(&mut a);
    linalg::hermitian_eigen(&a).unwrap().1
}

fn entries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_is_traceless_and_hermitian(
        h in 0.3..2.0f64, j in 0.0..2.0f64, gamma in 0.0..1.0f64,
        f in -2.0..2.0f64, alpha in -PI..PI, decay in 0.3..2.0f64,
        eta_c in 0.2..1.0f64, eta_d in 0.2..1.0f64, n_t in 0.0..0.5f64,
        rho in entries(),
    ) {
        let chain = ChainSpec::xy(2, h, j, gamma);
        let ctrl = ControlSpec::new(f, alpha, decay, eta_c * eta_d).with_thermal(n_t, eta_c, eta_d);
        let gen = Generator::new(&chain, &ctrl).unwrap();
        let out = gen.apply(density(&rho).matrix());
        prop_assert!(linalg::abs(linalg::trace(&out)) < 1e-12);
        prop_assert!(linalg::hermiticity_defect(&out) < 1e-12);
    }

    #[test]
    fn ergotropy_bounds_unitary_extraction(
        h in 0.3..2.0f64, j in 0.0..2.0f64, gamma in 0.0..1.0f64,
        rho in entries(), u in entries(),
    ) {
        let ham = battery_hamiltonian(&ChainSpec::xyz(2, h, j, gamma)).unwrap();
        let rho = density(&rho);
        let u = unitary(&u);
        let erg = metrics::ergotropy(&rho, &ham).unwrap();
        let rotated = DensityMatrix::from_matrix_unchecked(&(&u * rho.matrix()) * linalg::adjoint(&u));
        let extracted = metrics::stored_energy(&rho, &rotated, &ham).unwrap();
        prop_assert!(erg >= -1e-12);
        prop_assert!(extracted <= erg + 1e-10);
        let again = metrics::ergotropy(&rotated, &ham).unwrap();
        let energy_gap = metrics::stored_energy(&rotated, &rho, &ham).unwrap();
        prop_assert!((again - (erg + energy_gap)).abs() < 1e-9);
    }

    #[test]
    fn passive_states_have_no_ergotropy(p in prop::collection::vec(0.01..1.0f64, 4)) {
        let ham = battery_hamiltonian(&ChainSpec::xxx(2, 1.0, 1.0)).unwrap();
        let (levels, vecs) = linalg::hermitian_eigen(&ham).unwrap();
        let mut p = p;
        p.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total: f64 = p.iter().sum();
        let diag = Operator::from_fn(4, 4, |r, c| if r == c { c64::new(p[r] / total, 0.0) } else { c64::new(0.0, 0.0) });
        let rho = DensityMatrix::new(&(&vecs * &diag) * linalg::adjoint(&vecs)).unwrap();
        prop_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(metrics::ergotropy(&rho, &ham).unwrap().abs() < 1e-10);
    }

    #[test]
    fn argmax_is_invariant_under_positive_scaling(values in prop::collection::vec(-5.0..5.0f64, 30)) {
        let alpha = SweepAxis::new("alpha", -PI, PI, 5);
        let chi = SweepAxis::new("chi", 0.0, 2.0, 6);
        let a = SweepSurface::from_values(alpha.clone(), chi.clone(), Metric::StoredEnergy, values.clone()).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| 7.3 * v).collect();
        let b = SweepSurface::from_values(alpha, chi, Metric::StoredEnergy, scaled).unwrap();
        prop_assert_eq!(a.argmax, b.argmax);
        prop_assert!((b.max - 7.3 * a.max).abs() < 1e-12);
    }

    #[test]
    fn two_site_steady_state_matches_closed_form(chi in 0.05..3.0f64, alpha in -PI..PI, eta in 0.3..1.0f64, j in 0.1..3.0f64) {
        let ss = steady_state(&ChainSpec::xxx(2, 1.0, j), &ControlSpec::from_chi(chi, alpha, 1.0, eta)).unwrap();
        let pops = ss.state.populations();
        let expected = oracles::xxx2_steady_populations(chi, alpha, eta).unwrap();
        for (p, q) in pops.iter().zip(expected) {
            prop_assert!((p - q).abs() < 1e-8, "{:?} vs {:?}", pops, expected);
        }
    }

    #[test]
    fn two_site_metrics_symmetric_in_alpha(chi in 0.05..3.0f64, alpha in 0.0..PI, eta in 0.3..1.0f64) {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let eval = Evaluator::new(InitialState::Ground);
        let plus = eval.point(&chain, &ControlSpec::from_chi(chi, alpha, 1.0, eta)).unwrap();
        let minus = eval.point(&chain, &ControlSpec::from_chi(chi, -alpha, 1.0, eta)).unwrap();
        prop_assert!((plus.record.stored_energy - minus.record.stored_energy).abs() < 1e-9);
        prop_assert!((plus.record.ergotropy - minus.record.ergotropy).abs() < 1e-9);
    }
}

#[test]
fn critical_coupling_matches_closed_form() {
    let eval = Evaluator::new(InitialState::Ground);
    let search = CriticalSearch {
        j_lo: 1.0,
        j_hi: 8.0,
        tolerance: 1e-5,
        ..CriticalSearch::default()
    };
    for eta in [0.5, 0.7, 0.8, 0.9] {
        let expected = oracles::critical_j_n2(eta).unwrap().unwrap();
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, eta);
        let found = find_critical_j(&ChainSpec::xxx(2, 1.0, 1.0), &ctrl, Metric::StoredEnergy, &eval, &search, &Sequential)
            .unwrap();
        assert!((found - expected).abs() < 1e-3, "eta = {eta}: {found} vs {expected}");
    }
}

#[test]
fn chi_optimum_within_one_grid_cell_of_sweep_argmax() {
    let eval = Evaluator::new(InitialState::Ground);
    let chain = ChainSpec::xxx(2, 1.0, 1.0);
    let ctrl = ControlSpec::from_chi(0.0, PI, 1.0, 0.8);
    let alpha = SweepAxis::new("alpha", PI, PI, 1);
    let chi = SweepAxis::new("chi", 0.0, 3.0, 31);
    for metric in [Metric::FullChargePopulation, Metric::StoredEnergy] {
        let surface = grid_sweep(&chain, &ctrl, alpha.clone(), chi.clone(), metric, &eval, &Sequential).unwrap();
        let best = optimize_chi(&chain, &ctrl, metric, &eval, &ChiSearch::default(), &Sequential).unwrap();
        assert!(
            surface.argmax_points().iter().any(|&(_, c)| (c - best.chi).abs() <= chi.step() + 1e-12),
            "{metric:?}: {} vs {:?}",
            best.chi,
            surface.argmax_points()
        );
    }
}
