//! Ensemble-averaged feedback master equation: generator, propagation and
//! steady states.
//!
//! The generator covers both the zero-temperature equation
//!
//! ```text
//! ρ̇ = -i[H_B, ρ] + Γ Σ_j D[σ⁻_j]ρ
//!      - i Σ_j { [F_j, σ⁻_j ρ + ρ σ⁺_j] + (1/2ηΓ) [F_j, -i[F_j, ρ]] }
//! ```
//!
//! and its finite-temperature extension, where a fraction `1 - η_c` of the
//! emission goes into a thermal reservoir with occupation `n_T`:
//! `η_c Γ D[σ⁻] + (1-η_c) Γ {(1+n_T) D[σ⁻] + n_T D[σ⁺]}`.

use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::Mat;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c64, Operator, I, ONE, ZERO};
use crate::metrics::{BatteryMetrics, MetricsRecord};
use crate::operators::{self, Axis, ChainSpec, ControlSpec};

/// Trace tolerance for [`DensityMatrix::check`].
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Hermiticity tolerance for [`DensityMatrix::check`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Most negative eigenvalue tolerated by the positivity monitor.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// A Hermitian, unit-trace state on the chain space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity, trace and positivity.
    pub fn new(matrix: Operator) -> Result<Self> {
        linalg::ensure_square(&matrix, matrix.nrows())?;
        let rho = Self(matrix);
        rho.check()?;
        Ok(rho)
    }

    /// Wraps a matrix without any check.
    pub fn from_matrix_unchecked(matrix: Operator) -> Self {
        Self(matrix)
    }

    /// Hermitizes and renormalizes the trace of `matrix`.
    pub fn normalized(mut matrix: Operator) -> Result<Self> {
        linalg::hermitize(&mut matrix);
        let tr = linalg::trace(&matrix).re;
        if !(tr.abs() > f64::MIN_POSITIVE) || !tr.is_finite() {
            return Err(Error::Singular("state has zero trace"));
        }
        let scale = c64::new(1.0 / tr, 0.0);
        Ok(Self(linalg::scaled(scale, &matrix)))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[c64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::Singular("zero state vector"));
        }
        let d = psi.len();
        Ok(Self(Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm2)))
    }

    /// Computational basis projector; index 0 is `|↑↑…↑⟩`.
    pub fn basis(index: usize, dim: usize) -> Self {
        Self(Mat::from_fn(dim, dim, |i, j| {
            if i == index && j == index {
                ONE
            } else {
                ZERO
            }
        }))
    }

    pub fn all_up(n_sites: usize) -> Self {
        Self::basis(0, 1 << n_sites)
    }

    pub fn all_down(n_sites: usize) -> Self {
        let d = 1 << n_sites;
        Self::basis(d - 1, d)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(linalg::scaled(c64::new(1.0 / dim as f64, 0.0), &linalg::identity(dim)))
    }

    /// Ground state of `h`; a degenerate ground level yields the uniform
    /// mixture over it.
    pub fn ground_state(h: &Operator) -> Result<Self> {
        let spec = operators::spectrum(h)?;
        let e0 = spec.min();
        let tol = 1e-9 * spec.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let members: Vec<usize> = (0..spec.values.len())
            .filter(|&k| spec.values[k] - e0 <= tol)
            .collect();
        let d = h.nrows();
        let weight = 1.0 / members.len() as f64;
        let mut rho = linalg::zeros(d);
        for &k in &members {
            let v = spec.vectors.col_as_slice(k);
            for j in 0..d {
                for i in 0..d {
                    rho[(i, j)] += v[i] * v[j].conj() * weight;
                }
            }
        }
        Ok(Self(rho))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn into_matrix(self) -> Operator {
        self.0
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(&self.0)
    }

    /// Diagonal populations in basis order.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.0)?[0])
    }

    /// Fidelity-like overlap `⟨ψ|ρ|ψ⟩` with a normalized pure state.
    pub fn overlap(&self, psi: &[c64]) -> f64 {
        let d = self.dim();
        let mut acc = ZERO;
        for j in 0..d {
            for i in 0..d {
                acc += psi[i].conj() * self.0[(i, j)] * psi[j];
            }
        }
        acc.re
    }

    /// Checks Hermiticity, unit trace and the positivity monitor.
    pub fn check(&self) -> Result<()> {
        let defect = linalg::hermiticity_defect(&self.0);
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(invalid("rho", alloc::format!("trace {tr} is not 1")));
        }
        if !linalg::exceeds_negative_margin(&self.0, POSITIVITY_TOLERANCE) {
            let min = self.min_eigenvalue()?;
            return Err(Error::Positivity {
                time: f64::NAN,
                min_eigenvalue: min,
                dt: f64::NAN,
                halvings: 0,
            });
        }
        Ok(())
    }
}

/// Lindblad dissipator `D[o]ρ = oρo† - (o†oρ + ρo†o)/2`.
pub fn dissipator(o: &Operator, rho: &Operator) -> Result<Operator> {
    linalg::ensure_square(o, o.nrows())?;
    linalg::ensure_square(rho, o.nrows())?;
    let od = linalg::adjoint(o);
    let odo = &od * o;
    let mut out = &(o * rho) * &od;
    let half = c64::new(-0.5, 0.0);
    linalg::add_scaled(&mut out, half, &(&odo * rho));
    linalg::add_scaled(&mut out, half, &(rho * &odo));
    Ok(out)
}

/// Per-site operators cached by [`Generator`].
#[derive(Debug, Clone)]
pub(crate) struct SiteOperators {
    pub lowering: Operator,
    pub raising: Operator,
    /// `σ⁺σ⁻`
    pub excited: Operator,
    /// `σ⁻σ⁺`
    pub ground: Operator,
    pub feedback: Operator,
    pub feedback_sq: Operator,
    /// `F σ⁻`
    pub feedback_lowering: Operator,
    /// `σ⁺ F`
    pub raising_feedback: Operator,
    /// `σˣ`
    pub x: Operator,
}

/// The feedback master-equation generator for one `(chain, control)` pair.
#[derive(Debug, Clone)]
pub struct Generator {
    chain: ChainSpec,
    ctrl: ControlSpec,
    hamiltonian: Operator,
    pub(crate) sites: Vec<SiteOperators>,
    /// Total `D[σ⁻]` rate: `Γ[η_c + (1-η_c)(1+n_T)]`.
    pub(crate) down_rate: f64,
    /// `D[σ⁺]` rate: `Γ(1-η_c) n_T`.
    pub(crate) up_rate: f64,
    /// `1/(2ηΓ)`, zero when feedback is off.
    noise_weight: f64,
    feedback_on: bool,
}

impl Generator {
    pub fn new(chain: &ChainSpec, ctrl: &ControlSpec) -> Result<Self> {
        chain.validate()?;
        ctrl.validate()?;
        let n = chain.n_sites;
        let hamiltonian = operators::battery_hamiltonian(chain)?;
        let mut sites = Vec::with_capacity(n);
        for site in 1..=n {
            let lowering = operators::pauli(site, Axis::Lowering, n)?;
            let raising = operators::pauli(site, Axis::Raising, n)?;
            let feedback = operators::feedback_operator(site, ctrl, n)?;
            sites.push(SiteOperators {
                excited: &raising * &lowering,
                ground: &lowering * &raising,
                feedback_sq: &feedback * &feedback,
                feedback_lowering: &feedback * &lowering,
                raising_feedback: &raising * &feedback,
                x: operators::pauli(site, Axis::X, n)?,
                lowering,
                raising,
                feedback,
            });
        }
        let g = ctrl.decay;
        let eta_c = ctrl.collection_efficiency;
        let n_t = ctrl.thermal_occupation;
        let feedback_on = ctrl.feedback != 0.0;
        Ok(Self {
            chain: *chain,
            ctrl: *ctrl,
            hamiltonian,
            sites,
            down_rate: g * (eta_c + (1.0 - eta_c) * (1.0 + n_t)),
            up_rate: g * (1.0 - eta_c) * n_t,
            noise_weight: if feedback_on {
                1.0 / (2.0 * ctrl.efficiency() * g)
            } else {
                0.0
            },
            feedback_on,
        })
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn control(&self) -> &ControlSpec {
        &self.ctrl
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Applies the generator to `rho`.
    pub fn apply(&self, rho: &Operator) -> Operator {
        let h = &self.hamiltonian;
        let mut out = linalg::scaled(-I, &linalg::commutator(h, rho));
        let half = c64::new(-0.5, 0.0);
        for s in &self.sites {
            if self.down_rate != 0.0 {
                let r = c64::new(self.down_rate, 0.0);
                linalg::add_scaled(&mut out, r, &(&(&s.lowering * rho) * &s.raising));
                linalg::add_scaled(&mut out, r * half, &(&s.excited * rho));
                linalg::add_scaled(&mut out, r * half, &(rho * &s.excited));
            }
            if self.up_rate != 0.0 {
                let r = c64::new(self.up_rate, 0.0);
                linalg::add_scaled(&mut out, r, &(&(&s.raising * rho) * &s.lowering));
                linalg::add_scaled(&mut out, r * half, &(&s.ground * rho));
                linalg::add_scaled(&mut out, r * half, &(rho * &s.ground));
            }
            if self.feedback_on {
                // -i[F, σ⁻ρ + ρσ⁺]
                let mut m = &s.lowering * rho;
                m += rho * &s.raising;
                linalg::add_scaled(&mut out, -I, &linalg::commutator(&s.feedback, &m));
                // (1/2ηΓ)[F, -i[F, ρ]] multiplied by -i  =  -(1/2ηΓ)[F, [F, ρ]]
                let inner = linalg::commutator(&s.feedback, rho);
                let outer = linalg::commutator(&s.feedback, &inner);
                linalg::add_scaled(&mut out, c64::new(-self.noise_weight, 0.0), &outer);
            }
        }
        out
    }

    /// Column-stacked superoperator `L` with `vec(ρ̇) = L vec(ρ)`.
    pub fn liouvillian(&self) -> Operator {
        let d = self.dim();
        let mut sup = Mat::zeros(d * d, d * d);
        let h = &self.hamiltonian;
        linalg::add_sandwich(&mut sup, -I, Some(h), None);
        linalg::add_sandwich(&mut sup, I, None, Some(h));
        let half = c64::new(-0.5, 0.0);
        for s in &self.sites {
            if self.down_rate != 0.0 {
                let r = c64::new(self.down_rate, 0.0);
                linalg::add_sandwich(&mut sup, r, Some(&s.lowering), Some(&s.raising));
                linalg::add_sandwich(&mut sup, r * half, Some(&s.excited), None);
                linalg::add_sandwich(&mut sup, r * half, None, Some(&s.excited));
            }
            if self.up_rate != 0.0 {
                let r = c64::new(self.up_rate, 0.0);
                linalg::add_sandwich(&mut sup, r, Some(&s.raising), Some(&s.lowering));
                linalg::add_sandwich(&mut sup, r * half, Some(&s.ground), None);
                linalg::add_sandwich(&mut sup, r * half, None, Some(&s.ground));
            }
            if self.feedback_on {
                // -i(Fσ⁻ρ + Fρσ⁺ - σ⁻ρF - ρσ⁺F)
                linalg::add_sandwich(&mut sup, -I, Some(&s.feedback_lowering), None);
                linalg::add_sandwich(&mut sup, -I, Some(&s.feedback), Some(&s.raising));
                linalg::add_sandwich(&mut sup, I, Some(&s.lowering), Some(&s.feedback));
                linalg::add_sandwich(&mut sup, I, None, Some(&s.raising_feedback));
                // -(1/2ηΓ)(F²ρ - 2FρF + ρF²)
                let k = c64::new(-self.noise_weight, 0.0);
                linalg::add_sandwich(&mut sup, k, Some(&s.feedback_sq), None);
                linalg::add_sandwich(&mut sup, k * -2.0, Some(&s.feedback), Some(&s.feedback));
                linalg::add_sandwich(&mut sup, k, None, Some(&s.feedback_sq));
            }
        }
        sup
    }
}

/// Zero-temperature feedback master equation right-hand side.
///
/// Rejects controls with `n_T ≠ 0`; use [`thermal_me_rhs`] for those.
pub fn feedback_me_rhs(rho: &Operator, chain: &ChainSpec, ctrl: &ControlSpec) -> Result<Operator> {
    if !ctrl.is_zero_temperature() {
        return Err(Error::ThermalParameters);
    }
    let gen = Generator::new(chain, ctrl)?;
    linalg::ensure_square(rho, gen.dim())?;
    Ok(gen.apply(rho))
}

/// Finite-temperature feedback master equation right-hand side.
pub fn thermal_me_rhs(rho: &Operator, chain: &ChainSpec, ctrl: &ControlSpec) -> Result<Operator> {
    let gen = Generator::new(chain, ctrl)?;
    linalg::ensure_square(rho, gen.dim())?;
    Ok(gen.apply(rho))
}

/// Fixed-step propagation settings. Times are in units of `1/Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Final time `Γt`.
    pub t_final: f64,
    /// Step `Γdt`.
    pub dt: f64,
    /// Spacing of stored snapshots in `Γt`; snapshots land on the nearest
    /// whole step.
    pub output_interval: f64,
    /// Retries with a halved step after a positivity violation.
    pub max_halvings: u32,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_final: 20.0,
            dt: 1e-2,
            output_interval: 0.1,
            max_halvings: 4,
        }
    }
}

/// Time series of a deterministic run.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Snapshot times `Γt`, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub metrics: Vec<MetricsRecord>,
    /// `Γdt` actually used after any step halving.
    pub dt: f64,
}

impl EvolutionResult {
    pub fn last_state(&self) -> &DensityMatrix {
        self.states.last().expect("at least the initial snapshot")
    }

    pub fn last_metrics(&self) -> &MetricsRecord {
        self.metrics.last().expect("at least the initial snapshot")
    }
}

/// Classical RK4 step of `ρ̇ = L ρ` followed by Hermitization.
pub fn rk4_step(gen: &Generator, rho: &Operator, h: f64) -> Operator {
    let half = c64::new(h / 2.0, 0.0);
    let k1 = gen.apply(rho);
    let mut y = rho.clone();
    linalg::add_scaled(&mut y, half, &k1);
    let k2 = gen.apply(&y);
    let mut y = rho.clone();
    linalg::add_scaled(&mut y, half, &k2);
    let k3 = gen.apply(&y);
    let mut y = rho.clone();
    linalg::add_scaled(&mut y, c64::new(h, 0.0), &k3);
    let k4 = gen.apply(&y);
    let mut out = rho.clone();
    let w = h / 6.0;
    linalg::add_scaled(&mut out, c64::new(w, 0.0), &k1);
    linalg::add_scaled(&mut out, c64::new(2.0 * w, 0.0), &k2);
    linalg::add_scaled(&mut out, c64::new(2.0 * w, 0.0), &k3);
    linalg::add_scaled(&mut out, c64::new(w, 0.0), &k4);
    linalg::hermitize(&mut out);
    out
}

/// Propagates `rho0` with the feedback generator of `(chain, ctrl)`.
pub fn evolve(
    rho0: &DensityMatrix,
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let gen = Generator::new(chain, ctrl)?;
    evolve_with(rho0, &gen, opts)
}

pub fn evolve_with(
    rho0: &DensityMatrix,
    gen: &Generator,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    linalg::ensure_square(rho0.matrix(), gen.dim())?;
    if !(opts.dt > 0.0) || !(opts.t_final >= 0.0) || !(opts.output_interval > 0.0) {
        return Err(invalid("dt", "step, final time and output interval must be positive"));
    }
    let metrics = BatteryMetrics::new(gen.hamiltonian(), rho0)?;
    let mut dt = opts.dt;
    let mut halvings = 0;
    loop {
        match propagate(rho0, gen, &metrics, opts, dt) {
            Ok(mut result) => {
                result.dt = dt;
                return Ok(result);
            }
            Err(Error::Positivity {
                time,
                min_eigenvalue,
                ..
            }) => {
                if halvings == opts.max_halvings {
                    return Err(Error::Positivity {
                        time,
                        min_eigenvalue,
                        dt,
                        halvings,
                    });
                }
                halvings += 1;
                dt /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
}

fn propagate(
    rho0: &DensityMatrix,
    gen: &Generator,
    metrics: &BatteryMetrics,
    opts: &EvolveOptions,
    dt_gamma: f64,
) -> Result<EvolutionResult> {
    let gamma = gen.control().decay;
    let h = dt_gamma / gamma;
    let n_steps = (opts.t_final / dt_gamma).round() as usize;
    let stride = ((opts.output_interval / dt_gamma).round() as usize).max(1);
    let mut rho = rho0.matrix().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut records = vec![metrics.record(rho0)?];
    for step in 1..=n_steps {
        rho = rk4_step(gen, &rho, h);
        if step % stride == 0 || step == n_steps {
            let t = step as f64 * dt_gamma;
            if !linalg::exceeds_negative_margin(&rho, POSITIVITY_TOLERANCE) {
                let min = linalg::hermitian_eigenvalues(&rho)?[0];
                return Err(Error::Positivity {
                    time: t,
                    min_eigenvalue: min,
                    dt: dt_gamma,
                    halvings: 0,
                });
            }
            let state = DensityMatrix(rho.clone());
            records.push(metrics.record(&state)?);
            states.push(state);
            times.push(t);
        }
    }
    Ok(EvolutionResult {
        times,
        states,
        metrics: records,
        dt: dt_gamma,
    })
}

/// How a steady state was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMethod {
    /// Kernel of the vectorized generator.
    NullSpace,
    /// Long-time RK4 integration from the maximally mixed state.
    Integration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Pivots of the rank-revealing QR of the generator with
    /// `|r_kk| < zero_tolerance·Γ` count as zero modes.
    pub zero_tolerance: f64,
    /// Required `‖L ρ∞‖_F / Γ`.
    pub residual_tolerance: f64,
    /// Largest chain handled by the null-space path.
    pub max_null_space_sites: usize,
    /// Step `Γdt` of the integration fallback.
    pub fallback_dt: f64,
    /// Time budget `Γt` of the integration fallback.
    pub fallback_t_max: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            zero_tolerance: 1e-9,
            residual_tolerance: 1e-9,
            max_null_space_sites: 6,
            fallback_dt: 1e-2,
            fallback_t_max: 1e4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// Number of generator eigenvalues inside the zero tolerance (`None`
    /// when the spectrum was not computed).
    pub multiplicity: Option<usize>,
    /// `‖L ρ∞‖_F / Γ`.
    pub residual: f64,
    pub method: SteadyStateMethod,
}

/// Stationary state of the feedback master equation.
pub fn steady_state(chain: &ChainSpec, ctrl: &ControlSpec) -> Result<SteadyState> {
    let gen = Generator::new(chain, ctrl)?;
    steady_state_with(&gen, &SteadyStateOptions::default())
}

/// The kernel vector is obtained from an LU solve of the generator with one
/// row replaced by the trace functional; zero modes are counted from a
/// column-pivoted QR of the generator. With more than one zero mode the
/// state is obtained by integrating from the maximally mixed state instead.
pub fn steady_state_with(gen: &Generator, opts: &SteadyStateOptions) -> Result<SteadyState> {
    let gamma = gen.control().decay;
    if gen.chain().n_sites > opts.max_null_space_sites {
        return integrate_to_steady_state(gen, opts, None);
    }
    let d = gen.dim();
    let sup = gen.liouvillian();
    let qr = sup.col_piv_qr();
    let r = qr.R();
    let multiplicity = (0..r.nrows().min(r.ncols()))
        .filter(|&k| linalg::abs(r[(k, k)]) < opts.zero_tolerance * gamma)
        .count();
    if multiplicity > 1 {
        return integrate_to_steady_state(gen, opts, Some(multiplicity));
    }
    // Row 0 belongs to ρ_00; the sum of all diagonal rows vanishes because
    // the generator is traceless, so replacing it loses no information.
    let mut a = sup;
    for c in 0..d * d {
        a[(0, c)] = ZERO;
    }
    for k in 0..d {
        a[(0, k + k * d)] = ONE;
    }
    let mut rhs = Mat::<c64>::zeros(d * d, 1);
    rhs[(0, 0)] = ONE;
    let x = a.partial_piv_lu().solve(&rhs);
    let v: Vec<c64> = (0..d * d).map(|k| x[(k, 0)]).collect();
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return integrate_to_steady_state(gen, opts, Some(multiplicity));
    }
    let state = DensityMatrix::normalized(linalg::unvectorize(&v, d))?;
    let residual = linalg::frobenius_norm(&gen.apply(state.matrix())) / gamma;
    if residual >= opts.residual_tolerance {
        return Err(Error::SteadyState {
            residual,
            tolerance: opts.residual_tolerance,
        });
    }
    Ok(SteadyState {
        state,
        multiplicity: Some(multiplicity),
        residual,
        method: SteadyStateMethod::NullSpace,
    })
}

fn integrate_to_steady_state(
    gen: &Generator,
    opts: &SteadyStateOptions,
    multiplicity: Option<usize>,
) -> Result<SteadyState> {
    let gamma = gen.control().decay;
    let h = opts.fallback_dt / gamma;
    let max_steps = (opts.fallback_t_max / opts.fallback_dt).ceil() as usize;
    let mut rho = DensityMatrix::maximally_mixed(gen.dim()).into_matrix();
    let mut residual = f64::INFINITY;
    for step in 0..max_steps {
        if step % 10 == 0 {
            residual = linalg::frobenius_norm(&gen.apply(&rho)) / gamma;
            if residual < opts.residual_tolerance {
                break;
            }
        }
        rho = rk4_step(gen, &rho, h);
    }
    residual = residual.min(linalg::frobenius_norm(&gen.apply(&rho)) / gamma);
    if residual >= opts.residual_tolerance {
        return Err(Error::SteadyState {
            residual,
            tolerance: opts.residual_tolerance,
        });
    }
    Ok(SteadyState {
        state: DensityMatrix::normalized(rho)?,
        multiplicity,
        residual,
        method: SteadyStateMethod::Integration,
    })
}
