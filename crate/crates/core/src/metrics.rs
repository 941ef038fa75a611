//! Battery figures of merit: stored energy, ergotropy, capacity and the
//! effective space utilization rate.

use alloc::vec::Vec;

use crate::dynamics::DensityMatrix;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Operator};
use crate::operators;

/// Imaginary residue of `Tr[Hρ]` above which the trace is rejected.
const IMAGINARY_RESIDUE: f64 = 1e-10;

/// Below this `|ΔE|` the extraction ratio is reported as undefined.
pub const RATIO_FLOOR: f64 = 1e-12;

fn energy(rho: &Operator, h: &Operator) -> Result<f64> {
    linalg::ensure_square(rho, h.nrows())?;
    let e = linalg::trace_product(h, rho);
    if e.im.abs() > IMAGINARY_RESIDUE * (1.0 + e.re.abs()) {
        return Err(Error::NotHermitian { deviation: e.im.abs() });
    }
    Ok(e.re)
}

/// `ΔE = Tr[Hρ_t] - Tr[Hρ₀]`.
pub fn stored_energy(rho_t: &DensityMatrix, rho_0: &DensityMatrix, h: &Operator) -> Result<f64> {
    Ok(energy(rho_t.matrix(), h)? - energy(rho_0.matrix(), h)?)
}

/// State populations paired against Hamiltonian levels in the passive
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveDecomposition {
    /// Eigenvalues of `ρ`, descending.
    pub populations: Vec<f64>,
    /// Eigenvalues of `H`, ascending.
    pub energies: Vec<f64>,
    /// `Σ_k r_k ε_k`.
    pub passive_energy: f64,
}

/// Pairs descending state eigenvalues with the supplied ascending energies.
pub fn passive_decomposition(rho: &DensityMatrix, energies: &[f64]) -> Result<PassiveDecomposition> {
    if energies.len() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: energies.len(),
        });
    }
    let mut populations = linalg::hermitian_eigenvalues(rho.matrix())?;
    // ascending from the solver; a stable reverse keeps ties in index order
    populations.reverse();
    let passive_energy = populations
        .iter()
        .zip(energies)
        .map(|(r, e)| r * e)
        .sum();
    Ok(PassiveDecomposition {
        populations,
        energies: energies.to_vec(),
        passive_energy,
    })
}

/// `ℰ = Tr[Hρ] - Σ_k r_k ε_k`, with `r` descending and `ε` ascending.
pub fn ergotropy(rho: &DensityMatrix, h: &Operator) -> Result<f64> {
    let spec = operators::spectrum(h)?;
    ergotropy_with_levels(rho, h, &spec.values)
}

/// [`ergotropy`] with precomputed ascending Hamiltonian levels.
pub fn ergotropy_with_levels(rho: &DensityMatrix, h: &Operator, levels: &[f64]) -> Result<f64> {
    let passive = passive_decomposition(rho, levels)?;
    Ok(energy(rho.matrix(), h)? - passive.passive_energy)
}

/// `C_max = E_max - E_min`.
pub fn capacity(h: &Operator) -> Result<f64> {
    let spec = operators::spectrum(h)?;
    Ok(spec.max() - spec.min())
}

/// `R = ΔE / C_max`.
pub fn utilization(stored_energy: f64, capacity: f64) -> Result<f64> {
    if capacity == 0.0 || !capacity.is_finite() {
        return Err(invalid("capacity", "utilization needs a positive capacity"));
    }
    Ok(stored_energy / capacity)
}

/// Figures of merit of one state relative to the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub stored_energy: f64,
    pub ergotropy: f64,
    pub capacity: f64,
    pub utilization: f64,
    /// `ℰ/ΔE`, `None` when `|ΔE| < RATIO_FLOOR`.
    pub extraction_ratio: Option<f64>,
}

/// Caches the spectrum of `H` and the initial energy so that records along a
/// trajectory or across a sweep are cheap.
#[derive(Debug, Clone)]
pub struct BatteryMetrics {
    hamiltonian: Operator,
    levels: Vec<f64>,
    initial_energy: f64,
    capacity: f64,
}

impl BatteryMetrics {
    pub fn new(h: &Operator, rho_0: &DensityMatrix) -> Result<Self> {
        let spec = operators::spectrum(h)?;
        let capacity = spec.max() - spec.min();
        Ok(Self {
            hamiltonian: h.clone(),
            initial_energy: energy(rho_0.matrix(), h)?,
            levels: spec.values,
            capacity,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn stored_energy(&self, rho: &DensityMatrix) -> Result<f64> {
        Ok(energy(rho.matrix(), &self.hamiltonian)? - self.initial_energy)
    }

    pub fn ergotropy(&self, rho: &DensityMatrix) -> Result<f64> {
        ergotropy_with_levels(rho, &self.hamiltonian, &self.levels)
    }

    pub fn record(&self, rho: &DensityMatrix) -> Result<MetricsRecord> {
        let stored_energy = self.stored_energy(rho)?;
        let ergotropy = self.ergotropy(rho)?;
        Ok(MetricsRecord {
            stored_energy,
            ergotropy,
            capacity: self.capacity,
            utilization: utilization(stored_energy, self.capacity)?,
            extraction_ratio: (stored_energy.abs() >= RATIO_FLOOR)
                .then(|| ergotropy / stored_energy),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{battery_hamiltonian, ChainSpec};

    fn h2(j: f64) -> Operator {
        battery_hamiltonian(&ChainSpec::xxx(2, 1.0, j)).unwrap()
    }

    #[test]
    fn no_change_stores_nothing() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert_eq!(stored_energy(&rho, &rho, &h2(0.3)).unwrap(), 0.0);
    }

    #[test]
    fn four_site_full_flip_stores_four_h() {
        let h = battery_hamiltonian(&ChainSpec::xxx(4, 1.0, 1.3)).unwrap();
        let e = stored_energy(&DensityMatrix::all_up(4), &DensityMatrix::all_down(4), &h).unwrap();
        assert!((e - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_site_full_flip_stores_two_h() {
        let e = stored_energy(&DensityMatrix::all_up(2), &DensityMatrix::all_down(2), &h2(0.1)).unwrap();
        assert!((e - 2.0).abs() < 1e-12);
    }

    #[test]
    fn passive_states_hold_no_ergotropy() {
        let h = h2(0.5);
        let ground = DensityMatrix::ground_state(&h).unwrap();
        assert!(ergotropy(&ground, &h).unwrap().abs() < 1e-12);
        assert!(ergotropy(&DensityMatrix::maximally_mixed(4), &h).unwrap().abs() < 1e-12);
    }

    #[test]
    fn top_state_ergotropy_spans_the_spectrum() {
        // E_d - E_b = h + 4J
        let e = ergotropy(&DensityMatrix::all_up(2), &h2(0.5)).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_branches() {
        assert!((capacity(&h2(0.1)).unwrap() - 2.0).abs() < 1e-12);
        assert!((capacity(&h2(1.0)).unwrap() - 5.0).abs() < 1e-12);
        let flat = linalg::scaled(linalg::c64::new(2.5, 0.0), &linalg::identity(4));
        assert!(capacity(&flat).unwrap().abs() < 1e-12);
    }

    #[test]
    fn utilization_cases() {
        assert_eq!(utilization(5.0, 5.0).unwrap(), 1.0);
        assert_eq!(utilization(0.0, 5.0).unwrap(), 0.0);
        assert!(utilization(1.0, 0.0).is_err());
    }

    #[test]
    fn ratio_is_flagged_without_stored_energy() {
        let h = h2(0.2);
        let rho = DensityMatrix::all_down(2);
        let m = BatteryMetrics::new(&h, &rho).unwrap();
        let r = m.record(&rho).unwrap();
        assert_eq!(r.extraction_ratio, None);
        let up = m.record(&DensityMatrix::all_up(2)).unwrap();
        assert!((up.extraction_ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!((up.utilization - 1.0).abs() < 1e-12);
    }
}
