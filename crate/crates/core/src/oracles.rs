//! Closed-form two-site results.
//!
//! Everything here is scalar arithmetic on plain arrays so that it stays
//! independent of the matrix code it is used to check. Two-site states use
//! the basis `|1⟩ = |↑↑⟩, |2⟩ = |↑↓⟩, |3⟩ = |↓↑⟩, |4⟩ = |↓↓⟩`.
//!
//! The finite-temperature formulas carry no explicit feedback angle; they
//! hold at `α = π` (`cos α = -1`), the direction used for optimal charging.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::c64;
use crate::operators::{ChainSpec, ControlSpec};

/// Diagonal populations `(ρ₁₁, ρ₂₂, ρ₃₃, ρ₄₄)`.
pub type Populations = [f64; 4];

/// Two-site density matrix as a plain array, 0-based (`rho[0][0] = ρ₁₁`).
pub type TwoSiteMatrix = [[c64; 4]; 4];

fn xxx2_denominator(chi: f64, alpha: f64, eta: f64) -> Result<f64> {
    let d = 2.0 * chi * chi + 2.0 * chi * eta * alpha.cos() + eta;
    if d.abs() < 1e-300 {
        return Err(Error::Singular("2χ² + 2χη cos α + η vanishes"));
    }
    Ok(d)
}

/// Steady-state populations of the two-site XXX chain under feedback
/// (`χ = f/Γ`).
pub fn xxx2_steady_populations(chi: f64, alpha: f64, eta: f64) -> Result<Populations> {
    let d = xxx2_denominator(chi, alpha, eta)?;
    let d2 = d * d;
    let c = chi * chi;
    let m = c + 2.0 * chi * eta * alpha.cos() + eta;
    let p22 = c * m / d2;
    Ok([c * c / d2, p22, p22, m * m / d2])
}

/// Largest steady `ρ₁₁` at fixed `(η, α)` and the feedback strength that
/// reaches it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationOptimum {
    pub value: f64,
    pub chi: f64,
}

/// `ρ₁₁ᵐᵃˣ = 1/(2 - η cos²α)²` at `χ = -1/cos α`.
pub fn rho11_max(eta: f64, alpha: f64) -> Result<PopulationOptimum> {
    let c = alpha.cos();
    if c.abs() < 1e-12 {
        return Err(Error::Singular("cos α = 0 has no finite optimal χ"));
    }
    let d = 2.0 - eta * c * c;
    Ok(PopulationOptimum {
        value: 1.0 / (d * d),
        chi: -1.0 / c,
    })
}

/// Finite-temperature steady populations of the two-site XXX chain.
///
/// The `ρ₂₂` expression is evaluated exactly as written (leading minus plus
/// one quarter).
pub fn thermal_steady_populations(
    feedback: f64,
    decay: f64,
    eta: f64,
    eta_c: f64,
    n_thermal: f64,
) -> Result<Populations> {
    let f = feedback;
    let g2 = decay * decay;
    let lossy = n_thermal * g2 * eta - n_thermal * g2 * eta * eta_c;
    let d = 2.0 * f * f - 2.0 * f * decay * eta + (1.0 + 2.0 * n_thermal) * g2 * eta
        - 2.0 * n_thermal * g2 * eta * eta_c;
    if d.abs() < 1e-300 {
        return Err(Error::Singular("thermal steady-state denominator vanishes"));
    }
    let d2 = d * d;
    let top = f * f + lossy;
    let p11 = top * top / d2;
    let s = -2.0 * f + decay;
    let p22 = -(g2 * s * s * eta * eta) / (4.0 * d2) + 0.25;
    let bottom = f * f - 2.0 * f * decay * eta + (1.0 + n_thermal) * g2 * eta
        - n_thermal * g2 * eta * eta_c;
    let p44 = bottom * bottom / d2;
    Ok([p11, p22, p22, p44])
}

/// `μ = 4 n_T η (1 - η_c)`.
pub fn thermal_mu(n_thermal: f64, eta: f64, eta_c: f64) -> f64 {
    4.0 * n_thermal * eta * (1.0 - eta_c)
}

/// Optimal `f/Γ = [1 + √(1 + μ)]/2` for the stored energy.
pub fn optimal_f_thermal(n_thermal: f64, eta: f64, eta_c: f64) -> f64 {
    0.5 * (1.0 + (1.0 + thermal_mu(n_thermal, eta, eta_c)).sqrt())
}

/// `ρ₁₁ᵐᵃˣ = ¼[1 + η√(1+μ) / (1 + μ + (1-η)√(1+μ))]²`.
pub fn rho11_max_thermal(eta: f64, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(invalid("mu", "must be non-negative"));
    }
    let r = (1.0 + mu).sqrt();
    let t = 1.0 + eta * r / (1.0 + mu + (1.0 - eta) * r);
    Ok(0.25 * t * t)
}

/// Critical coupling `J_c/h = (2 - η) / 2(1 - η)` of the two-site chain;
/// `None` at `η = 1`, where feedback never fails.
pub fn critical_j_n2(eta: f64) -> Result<Option<f64>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", "must be in (0, 1]"));
    }
    if eta == 1.0 {
        return Ok(None);
    }
    Ok(Some((2.0 - eta) / (2.0 * (1.0 - eta))))
}

/// Steady stored energies `(ΔE₁, ΔE₂)` of the two-site XXX chain charged
/// from `|↓↓⟩` (ground for `J < h/4`) and from the singlet (ground for
/// `J > h/4`).
pub fn stored_energy_branches(
    chi: f64,
    alpha: f64,
    eta: f64,
    coupling: f64,
    field: f64,
) -> Result<(f64, f64)> {
    let d = xxx2_denominator(chi, alpha, eta)?;
    let theta = chi * chi / d;
    let (h, j) = (field, coupling);
    let de1 = 2.0 * (h - 2.0 * j) * theta * (eta + 2.0 * chi * eta * alpha.cos()) / d
        + 4.0 * (h - j) * theta * theta;
    let de2 = -h + 4.0 * j + 4.0 * j * theta * theta + 2.0 * (h - 2.0 * j) * theta;
    Ok((de1, de2))
}

/// Top level `Nh/2 + (N-1)J` of the XXX chain.
pub fn xxx_highest_energy(n_sites: usize, field: f64, coupling: f64) -> f64 {
    n_sites as f64 * field / 2.0 + (n_sites as f64 - 1.0) * coupling
}

/// Right-hand side of the two-site XXX feedback master equation written out
/// component by component.
pub fn xxx2_ode_rhs(rho: &TwoSiteMatrix, chain: &ChainSpec, ctrl: &ControlSpec) -> Result<TwoSiteMatrix> {
    if chain.n_sites != 2 || !chain.is_xxx() {
        return Err(invalid("chain", "the two-site equations need N = 2, γ = 0, Δ = 1"));
    }
    if !ctrl.is_zero_temperature() {
        return Err(Error::ThermalParameters);
    }
    let q = |i: usize, j: usize| rho[i - 1][j - 1];
    let h = chain.field;
    let jj = chain.coupling;
    let f = ctrl.feedback;
    let g = ctrl.decay;
    let a = ctrl.alpha;
    let (s, c) = a.sin_cos();
    let k = if f == 0.0 { 0.0 } else { f * f / (g * ctrl.efficiency()) };
    let i = c64::new(0.0, 1.0);
    let e = |phase: f64| c64::new(phase.cos(), phase.sin());
    let r = |x: f64| c64::new(x, 0.0);

    let mut d = [[c64::new(0.0, 0.0); 4]; 4];
    d[0][0] = r(-2.0 * g) * q(1, 1) - r(4.0 * f * c) * q(1, 1)
        + r(k) * (q(2, 2) + q(3, 3) - r(2.0) * q(1, 1));
    d[1][1] = i * r(2.0 * jj) * (q(2, 3) - q(3, 2))
        + r(g + 2.0 * f * c) * (q(1, 1) - q(2, 2))
        + r(k) * (q(1, 1) - r(2.0) * q(2, 2) + q(4, 4));
    d[2][2] = -i * r(2.0 * jj) * (q(2, 3) - q(3, 2))
        + r(g + 2.0 * f * c) * (q(1, 1) - q(3, 3))
        + r(k) * (q(1, 1) - r(2.0) * q(3, 3) + q(4, 4));
    d[3][3] = -d[0][0] - d[1][1] - d[2][2];

    d[0][1] = -i * (r(h) * q(1, 2) + r(2.0 * jj) * (q(1, 2) - q(1, 3)))
        - r(f) * ((r(3.0) * q(1, 2) + q(2, 1)) * r(c) + i * (q(1, 2) + q(2, 1)) * r(s))
        - r(k) * (r(2.0) * q(1, 2) + e(2.0 * a) * q(2, 1) - q(3, 4))
        - r(1.5 * g) * q(1, 2);
    d[0][2] = -i * (r(h) * q(1, 3) + r(2.0 * jj) * (q(1, 3) - q(1, 2)))
        - r(f) * ((r(3.0) * q(1, 3) + q(3, 1)) * r(c) + i * (q(1, 3) + q(3, 1)) * r(s))
        - r(k) * (r(2.0) * q(1, 3) + e(2.0 * a) * q(3, 1) - q(2, 4))
        - r(1.5 * g) * q(1, 3);
    d[0][3] = -e(a) * r(f) * (r(2.0) * q(1, 4) + q(2, 3) + q(3, 2))
        - i * r(2.0 * h) * q(1, 4)
        - r(g) * q(1, 4)
        - r(k) * (r(2.0) * q(1, 4) + e(2.0 * a) * (q(2, 3) + q(3, 2)));
    d[1][2] = i * r(2.0 * jj) * (q(2, 2) - q(3, 3)) - r(g) * q(2, 3)
        + r(k) * (-r(2.0) * q(2, 3) - e(-2.0 * a) * (q(1, 4) + e(4.0 * a) * q(4, 1)))
        - r(f * c) * (q(1, 4) + r(2.0) * q(2, 3) + q(4, 1))
        + i * r(f * s) * (q(1, 4) - q(4, 1));
    d[1][3] = (q(1, 3) - q(2, 4) / 2.0) * r(g)
        - i * (r(h) * q(2, 4) + r(2.0 * jj) * (q(3, 4) - q(2, 4)))
        + r(k) * (q(1, 3) - r(2.0) * q(2, 4) - e(2.0 * a) * q(4, 2))
        + r(f) * ((r(2.0) * q(1, 3) - q(2, 4) - q(4, 2)) * r(c) - i * (q(2, 4) + q(4, 2)) * r(s));
    d[2][3] = (q(1, 2) - q(3, 4) / 2.0) * r(g)
        - i * (r(h) * q(3, 4) + r(2.0 * jj) * (q(2, 4) - q(3, 4)))
        + r(k) * (q(1, 2) - r(2.0) * q(3, 4) - e(2.0 * a) * q(4, 3))
        + r(f) * ((r(2.0) * q(1, 2) - q(3, 4) - q(4, 3)) * r(c) - i * (q(3, 4) + q(4, 3)) * r(s));

    for row in 0..4 {
        for col in 0..row {
            d[row][col] = d[col][row].conj();
        }
    }
    Ok(d)
}

/// Stored energy of the two-site XXX chain from the diagonal and the
/// `ρ₂₃, ρ₃₂` coherences.
pub fn xxx2_stored_energy(rho_t: &TwoSiteMatrix, rho_0: &TwoSiteMatrix, field: f64, coupling: f64) -> f64 {
    let energy = |m: &TwoSiteMatrix| {
        let (h, j) = (field, coupling);
        (j + h) * m[0][0].re - j * m[1][1].re + 2.0 * j * m[2][1].re + 2.0 * j * m[1][2].re
            - j * m[2][2].re
            + (j - h) * m[3][3].re
    };
    energy(rho_t) - energy(rho_0)
}
