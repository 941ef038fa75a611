//! Chain and control parameters, and the operators built from them.
//!
//! Basis convention: site 1 is the leftmost tensor factor and `|↑⟩` is the
//! first single-site basis vector, so basis index 0 is `|↑↑…↑⟩` and the last
//! index is `|↓↓…↓⟩`. A bit value of 1 at a site means spin down.

use alloc::format;
use alloc::vec::Vec;

use faer::Mat;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c64, Operator, I, ONE, ZERO};

/// Largest chain the dense operator constructors accept.
pub const MAX_SITES: usize = 10;

/// Spin-chain battery parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub n_sites: usize,
    /// Field strength `h`.
    pub field: f64,
    /// Nearest-neighbour coupling `J`.
    pub coupling: f64,
    /// Anisotropy `γ` between the xx and yy bonds.
    pub gamma: f64,
    /// zz coupling weight `Δ`.
    pub delta: f64,
}

impl ChainSpec {
    /// Isotropic Heisenberg chain (`γ = 0`, `Δ = 1`).
    pub fn xxx(n_sites: usize, field: f64, coupling: f64) -> Self {
        Self {
            n_sites,
            field,
            coupling,
            gamma: 0.0,
            delta: 1.0,
        }
    }

    /// `Δ = 0`.
    pub fn xy(n_sites: usize, field: f64, coupling: f64, gamma: f64) -> Self {
        Self {
            n_sites,
            field,
            coupling,
            gamma,
            delta: 0.0,
        }
    }

    /// `Δ = 1` with anisotropy `γ`.
    pub fn xyz(n_sites: usize, field: f64, coupling: f64, gamma: f64) -> Self {
        Self {
            n_sites,
            field,
            coupling,
            gamma,
            delta: 1.0,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn is_xxx(&self) -> bool {
        self.gamma == 0.0 && self.delta == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > MAX_SITES {
            return Err(invalid(
                "n_sites",
                format!("must be in 1..={MAX_SITES}, got {}", self.n_sites),
            ));
        }
        if !(self.field > 0.0 && self.field.is_finite()) {
            return Err(invalid("h", format!("must be positive, got {}", self.field)));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(invalid(
                "j",
                format!("must be non-negative, got {}", self.coupling),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", format!("must be in [0, 1], got {}", self.gamma)));
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        Ok(())
    }
}

/// Feedback and measurement parameters.
///
/// The constant drive amplitude `Ω₀` is fixed to zero and the feedback delay
/// is taken in the Markovian limit, so neither is represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSpec {
    /// Feedback strength `f` (energy units).
    pub feedback: f64,
    /// Feedback field direction `α` in radians.
    pub alpha: f64,
    /// Spontaneous emission rate `Γ`.
    pub decay: f64,
    /// Detector efficiency `η_d`.
    pub detector_efficiency: f64,
    /// Photon collection efficiency `η_c`.
    pub collection_efficiency: f64,
    /// Thermal occupation `n_T` of the reservoir fed by uncollected photons.
    pub thermal_occupation: f64,
}

impl ControlSpec {
    /// Zero-temperature control with total efficiency `eta` (all of it
    /// attributed to the detector, `η_c = 1`).
    pub fn new(feedback: f64, alpha: f64, decay: f64, eta: f64) -> Self {
        Self {
            feedback,
            alpha,
            decay,
            detector_efficiency: eta,
            collection_efficiency: 1.0,
            thermal_occupation: 0.0,
        }
    }

    /// Same as [`ControlSpec::new`] with `f = χΓ`.
    pub fn from_chi(chi: f64, alpha: f64, decay: f64, eta: f64) -> Self {
        Self::new(chi * decay, alpha, decay, eta)
    }

    pub fn with_thermal(mut self, n_thermal: f64, collection: f64, detector: f64) -> Self {
        self.thermal_occupation = n_thermal;
        self.collection_efficiency = collection;
        self.detector_efficiency = detector;
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.feedback = chi * self.decay;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Dimensionless feedback strength `χ = f/Γ`.
    pub fn chi(&self) -> f64 {
        self.feedback / self.decay
    }

    /// Total measurement efficiency `η = η_c·η_d`.
    pub fn efficiency(&self) -> f64 {
        self.collection_efficiency * self.detector_efficiency
    }

    /// True when the generator reduces to the zero-temperature feedback
    /// master equation (no thermal excitation from the lossy channel).
    pub fn is_zero_temperature(&self) -> bool {
        self.thermal_occupation == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.feedback.is_finite() {
            return Err(invalid("f", "must be finite"));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(invalid("decay", format!("must be positive, got {}", self.decay)));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(invalid(
                "eta_d",
                format!("must be in (0, 1], got {}", self.detector_efficiency),
            ));
        }
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            return Err(invalid(
                "eta_c",
                format!("must be in [0, 1], got {}", self.collection_efficiency),
            ));
        }
        if self.feedback != 0.0 && self.efficiency() <= 0.0 {
            return Err(invalid("eta", "feedback needs a positive measurement efficiency"));
        }
        if !(self.thermal_occupation >= 0.0 && self.thermal_occupation.is_finite()) {
            return Err(invalid(
                "n_thermal",
                format!("must be non-negative, got {}", self.thermal_occupation),
            ));
        }
        Ok(())
    }
}

/// Single-site operator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
    /// `σ⁺ = |↑⟩⟨↓|`
    Raising,
    /// `σ⁻ = |↓⟩⟨↑|`
    Lowering,
}

impl Axis {
    fn matrix(self) -> [[c64; 2]; 2] {
        match self {
            Axis::X => [[ZERO, ONE], [ONE, ZERO]],
            Axis::Y => [[ZERO, -I], [I, ZERO]],
            Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
            Axis::Raising => [[ZERO, ONE], [ZERO, ZERO]],
            Axis::Lowering => [[ZERO, ZERO], [ONE, ZERO]],
        }
    }
}

fn check_site(site: usize, n_sites: usize) -> Result<()> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    Ok(())
}

/// Embeds a 2×2 matrix at `site` (1-based) of an `n_sites` chain.
fn embed(local: [[c64; 2]; 2], site: usize, n_sites: usize) -> Operator {
    let dim = 1usize << n_sites;
    let shift = n_sites - site;
    let mut out = Mat::zeros(dim, dim);
    for col in 0..dim {
        let b = (col >> shift) & 1;
        for (a, row_entries) in local.iter().enumerate() {
            let v = row_entries[b];
            if v != ZERO {
                let row = (col & !(1 << shift)) | (a << shift);
                out[(row, col)] = v;
            }
        }
    }
    out
}

/// `I ⊗ … ⊗ σ^axis ⊗ … ⊗ I` with the Pauli factor at `site` (1-based).
pub fn pauli(site: usize, axis: Axis, n_sites: usize) -> Result<Operator> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(invalid("n_sites", format!("must be in 1..={MAX_SITES}")));
    }
    check_site(site, n_sites)?;
    Ok(embed(axis.matrix(), site, n_sites))
}

/// Open-boundary battery Hamiltonian
/// `H_B = (h/2) Σ σᶻ + Σ J[(1+γ)σˣσˣ + (1-γ)σʸσʸ + Δ σᶻσᶻ]`.
pub fn battery_hamiltonian(spec: &ChainSpec) -> Result<Operator> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut h = linalg::zeros(spec.dim());
    let half_field = c64::new(spec.field / 2.0, 0.0);
    for site in 1..=n {
        linalg::add_scaled(&mut h, half_field, &embed(Axis::Z.matrix(), site, n));
    }
    let j = spec.coupling;
    let weights = [
        (Axis::X, j * (1.0 + spec.gamma)),
        (Axis::Y, j * (1.0 - spec.gamma)),
        (Axis::Z, j * spec.delta),
    ];
    for site in 1..n {
        for (axis, w) in weights {
            if w == 0.0 {
                continue;
            }
            let left = embed(axis.matrix(), site, n);
            let right = embed(axis.matrix(), site + 1, n);
            linalg::add_scaled(&mut h, c64::new(w, 0.0), &(&left * &right));
        }
    }
    Ok(h)
}

/// Local feedback operator `F_j = f[σˣ_j sin α + σʸ_j cos α]`.
pub fn feedback_operator(site: usize, ctrl: &ControlSpec, n_sites: usize) -> Result<Operator> {
    check_site(site, n_sites)?;
    let (s, c) = ctrl.alpha.sin_cos();
    let x = Axis::X.matrix();
    let y = Axis::Y.matrix();
    let mut local = [[ZERO; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            local[r][k] = (x[r][k] * s + y[r][k] * c) * ctrl.feedback;
        }
    }
    Ok(embed(local, site, n_sites))
}

/// Hermiticity threshold used for input validation.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Operator,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, k: usize) -> Vec<c64> {
        self.vectors.col_as_slice(k).to_vec()
    }
}

pub fn spectrum(h: &Operator) -> Result<Spectrum> {
    linalg::ensure_square(h, h.nrows())?;
    let deviation = linalg::hermiticity_defect(h);
    if deviation > HERMITIAN_TOLERANCE * h.norm_max().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, vectors) = linalg::hermitian_eigen(h)?;
    Ok(Spectrum { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn assert_close(a: &Operator, b: &Operator, tol: f64) {
        let mut d = a.clone();
        d -= b;
        assert!(linalg::max_abs(&d) < tol, "max diff {}", linalg::max_abs(&d));
    }

    #[test]
    fn single_site_z_is_diag_one_minus_one() {
        let z = pauli(1, Axis::Z, 1).unwrap();
        assert_eq!(z[(0, 0)], ONE);
        assert_eq!(z[(1, 1)], -ONE);
        assert_eq!(z[(0, 1)], ZERO);
    }

    #[test]
    fn lowering_on_second_site_maps_up_up_to_up_down() {
        let s = pauli(2, Axis::Lowering, 2).unwrap();
        // |↑↑⟩ = index 0, |↑↓⟩ = index 1
        assert_eq!(s[(1, 0)], ONE);
        for r in [0, 2, 3] {
            assert_eq!(s[(r, 0)], ZERO);
        }
    }

    #[test]
    fn pauli_x_squares_to_identity() {
        let x = pauli(1, Axis::X, 2).unwrap();
        assert_close(&(&x * &x), &linalg::identity(4), 0.0 + 1e-15);
    }

    #[test]
    fn out_of_range_site_is_rejected() {
        assert_eq!(
            pauli(3, Axis::X, 2).unwrap_err(),
            Error::SiteOutOfRange { site: 3, n_sites: 2 }
        );
        assert!(pauli(0, Axis::X, 2).is_err());
    }

    #[test]
    fn two_site_xxx_spectrum() {
        let h = battery_hamiltonian(&ChainSpec::xxx(2, 1.0, 0.5)).unwrap();
        let s = spectrum(&h).unwrap();
        for (got, want) in s.values.iter().zip([-1.5, -0.5, 0.5, 1.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        let free = battery_hamiltonian(&ChainSpec::xxx(2, 1.0, 0.0)).unwrap();
        let s = spectrum(&free).unwrap();
        for (got, want) in s.values.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_level_switches_at_quarter_field() {
        let weak = spectrum(&battery_hamiltonian(&ChainSpec::xxx(2, 1.0, 0.1)).unwrap()).unwrap();
        assert!((weak.min() + 0.9).abs() < 1e-12);
        let strong = spectrum(&battery_hamiltonian(&ChainSpec::xxx(2, 1.0, 1.0)).unwrap()).unwrap();
        assert!((strong.min() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn four_site_top_level() {
        let s = spectrum(&battery_hamiltonian(&ChainSpec::xxx(4, 1.0, 1.0)).unwrap()).unwrap();
        assert!((s.max() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn feedback_operator_directions() {
        let y = pauli(1, Axis::Y, 1).unwrap();
        let x = pauli(1, Axis::X, 1).unwrap();
        let f_pi = feedback_operator(1, &ControlSpec::new(1.0, PI, 1.0, 1.0), 1).unwrap();
        assert_close(&f_pi, &linalg::scaled(-ONE, &y), 1e-15);
        let f_zero = feedback_operator(1, &ControlSpec::new(1.0, 0.0, 1.0, 1.0), 1).unwrap();
        assert_close(&f_zero, &y, 1e-15);
        let f_half = feedback_operator(1, &ControlSpec::new(2.0, PI / 2.0, 1.0, 1.0), 1).unwrap();
        assert_close(&f_half, &linalg::scaled(c64::new(2.0, 0.0), &x), 1e-15);
    }

    #[test]
    fn identity_spectrum_is_flat() {
        let s = spectrum(&linalg::identity(8)).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut a = linalg::identity(2);
        a[(0, 1)] = ONE;
        assert!(matches!(spectrum(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn invalid_chain_is_rejected() {
        assert!(ChainSpec::xxx(0, 1.0, 1.0).validate().is_err());
        assert!(ChainSpec::xxx(2, 0.0, 1.0).validate().is_err());
        assert!(ChainSpec::xxx(2, 1.0, -1.0).validate().is_err());
        assert!(ChainSpec::xxx(11, 1.0, 1.0).validate().is_err());
    }
}
