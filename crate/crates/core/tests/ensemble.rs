use std::f64::consts::PI;

use qbatt_core::dynamics::{evolve_with, EvolveOptions, Generator};
use qbatt_core::executor::Sequential;
use qbatt_core::linalg;
use qbatt_core::metrics;
use qbatt_core::operators::battery_hamiltonian;
use qbatt_core::trajectories::{run_ensemble, EnsembleOptions, TrajectoryOptions};
use qbatt_core::{ChainSpec, ControlSpec, DensityMatrix};

fn ensemble(chain: &ChainSpec, ctrl: &ControlSpec, t_final: f64, n_traj: usize, base_seed: u64) -> qbatt_core::trajectories::EnsembleResult {
    let rho0 = DensityMatrix::ground_state(&battery_hamiltonian(chain).unwrap()).unwrap();
    let opts = EnsembleOptions {
        trajectory: TrajectoryOptions {
            t_final,
            ..TrajectoryOptions::default()
        },
        n_traj,
        base_seed,
    };
    let ens = run_ensemble(&rho0, chain, ctrl, &opts, &Sequential).unwrap();
    assert!(ens.failed.is_empty());
    ens
}

#[test]
fn ensemble_error_shrinks_as_inverse_root_count() {
    let chain = ChainSpec::xxx(2, 1.0, 1.0);
    let ctrl = ControlSpec::from_chi(0.5, PI, 1.0, 0.8);
    let t_final = 1.0;
    let rho0 = DensityMatrix::ground_state(&battery_hamiltonian(&chain).unwrap()).unwrap();
    let gen = Generator::new(&chain, &ctrl).unwrap();
    let me = evolve_with(
        &rho0,
        &gen,
        &EvolveOptions {
            t_final,
            dt: 1e-3,
            output_interval: 0.1,
            max_halvings: 0,
        },
    )
    .unwrap();
    let pool = ensemble(&chain, &ctrl, t_final, 6400, 2024);
    // RMS deviation of disjoint batch means from the master equation
    let error = |m: usize| {
        let mut sq = 0.0;
        let mut n = 0;
        for batch in pool.records.chunks_exact(m) {
            for (k, reference) in me.metrics.iter().enumerate() {
                let mean = batch.iter().map(|r| r.stored_energy[k]).sum::<f64>() / m as f64;
                sq += (mean - reference.stored_energy).powi(2);
                n += 1;
            }
        }
        (sq / n as f64).sqrt()
    };
    let errors = [error(50), error(200), error(800)];
    let per_quadrupling = (errors[2] / errors[0]).sqrt();
    assert!(
        (0.3..=0.7).contains(&per_quadrupling),
        "errors {errors:?}, ratio per 4x {per_quadrupling}"
    );
    println!(
        "errors {errors:?}, step ratios {:.3} {:.3}, ratio per 4x {per_quadrupling:.3}",
        errors[1] / errors[0],
        errors[2] / errors[1]
    );
}

#[test]
fn optimal_feedback_suppresses_fluctuations() {
    let chain = ChainSpec::xxx(2, 1.0, 1.0);
    let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 1.0);
    let ens = ensemble(&chain, &ctrl, 20.0, 200, 42);
    let capacity = metrics::capacity(&battery_hamiltonian(&chain).unwrap()).unwrap();
    let last = *ens.std_dev.last().unwrap();
    assert!(last < 0.05 * capacity, "std dev {last} vs capacity {capacity}");
    for r in &ens.records {
        let rho = r.final_state.matrix();
        assert!((linalg::trace(rho).re - 1.0).abs() < 1e-12);
        assert!(linalg::hermiticity_defect(rho) < 1e-12);
    }
}
