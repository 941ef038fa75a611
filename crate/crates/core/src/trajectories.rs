//! Homodyne-conditioned stochastic master equation.
//!
//! A trajectory advances with Euler–Maruyama steps
//!
//! ```text
//! dρ = L_fb ρ dt + Σ_j dw_j [ √(ηΓ) H[σ⁻_j]ρ + (ηΓ)^{-1/2} K_j ρ ]
//! ```
//!
//! with `K_j ρ = -i[F_j, ρ]`, `H[o]ρ = oρ + ρo† - Tr[ρ(o+o†)]ρ` and `L_fb`
//! the ensemble generator of [`crate::dynamics`]. Increments are real.
//!
//! Two integrators are available. [`Scheme::EulerMaruyama`] applies the
//! update above literally. [`Scheme::PositiveMap`] (the default) uses the
//! same equation rewritten as a measurement of `G_j = √(ηΓ)σ⁻_j - iF_j/√(ηΓ)`
//! with the extra Hamiltonian `(F_jσ⁻_j + σ⁺_jF_j)/2` and the unmeasured
//! emission `(Γ_↓ - ηΓ) D[σ⁻_j] + Γ_↑ D[σ⁺_j]`, and advances it with
//!
//! ```text
//! M  = 1 + (-iH' - ½ Σ_k L_k†L_k) dt + Σ_j G_j dy_j,   dy_j = ⟨G_j + G_j†⟩dt + dw_j
//! ρ' = (M ρ M† + Σ_unmeasured L ρ L† dt) / Tr(…)
//! ```
//!
//! which agrees with the Euler–Maruyama update to first order in `dt` and
//! is positive by construction. Euler–Maruyama steps started from a pure
//! state routinely overshoot the positivity monitor at `Γdt = 10⁻³`.
//!
//! # Noise
//!
//! Each site `j` of trajectory seed `s` owns a ChaCha20 stream
//! (`seed_from_u64(s)`, stream `j`). Step `k` consumes the 64-bit words
//! `2k, 2k+1` of that stream and turns them into one standard normal with
//! the Box–Muller cosine branch, `u₁ = ((x₁ >> 11) + 1)·2⁻⁵³`,
//! `u₂ = (x₂ >> 11)·2⁻⁵³`, `z = √(-2 ln u₁) cos 2πu₂`, so `dw = z√dt`.
//! A rejected step is split in two by a Brownian bridge whose normals come
//! from stream `N + j` at word `2(32k + node)`, where `node` numbers the
//! binary subdivision tree breadth first from 0.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dynamics::{DensityMatrix, Generator};
use crate::error::{invalid, Error, Result};
use crate::executor::Executor;
use crate::linalg::{self, c64, Operator, I};
use crate::metrics::BatteryMetrics;
use crate::operators::{ChainSpec, ControlSpec};

/// Most negative eigenvalue an accepted step may produce.
pub const POSITIVITY_TOLERANCE: f64 = 1e-4;

const BRIDGE_SLOTS: u64 = 32;

/// Source of Wiener increments for one trajectory.
pub trait NoiseSource {
    /// Writes the increments of step `step` (width `dt`) for every site.
    fn increments(&mut self, step: u64, dt: f64, dw: &mut [f64]);
    /// Writes standard normals for bridge node `node` of step `step`.
    fn bridge_normals(&mut self, step: u64, node: u64, z: &mut [f64]);
}

/// Counter-based Gaussian noise; see the module docs for the layout.
#[derive(Debug, Clone)]
pub struct ChaChaNoise {
    main: Vec<ChaCha20Rng>,
    bridge: Vec<ChaCha20Rng>,
    next_step: u64,
}

impl ChaChaNoise {
    pub fn new(seed: u64, n_sites: usize) -> Self {
        let stream = |s: u64| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        let n = n_sites as u64;
        Self {
            main: (0..n).map(stream).collect(),
            bridge: (n..2 * n).map(stream).collect(),
            next_step: 0,
        }
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
}

impl NoiseSource for ChaChaNoise {
    fn increments(&mut self, step: u64, dt: f64, dw: &mut [f64]) {
        let sd = dt.sqrt();
        for (rng, out) in self.main.iter_mut().zip(dw.iter_mut()) {
            if step != self.next_step {
                // 32-bit words: two per u64
                rng.set_word_pos(4 * step as u128);
            }
            *out = normal(rng) * sd;
        }
        self.next_step = step + 1;
    }

    fn bridge_normals(&mut self, step: u64, node: u64, z: &mut [f64]) {
        for (rng, out) in self.bridge.iter_mut().zip(z.iter_mut()) {
            rng.set_word_pos(4 * (step as u128 * BRIDGE_SLOTS as u128 + node as u128));
            *out = normal(rng);
        }
    }
}

/// Noise that is identically zero. With [`Scheme::EulerMaruyama`] a
/// trajectory driven by it is the explicit-Euler solution of the ensemble
/// equation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn increments(&mut self, _step: u64, _dt: f64, dw: &mut [f64]) {
        dw.fill(0.0);
    }

    fn bridge_normals(&mut self, _step: u64, _node: u64, z: &mut [f64]) {
        z.fill(0.0);
    }
}

/// Homodyne current `⟨σˣ_j⟩ + (dw/dt)/√(ηΓ)` for site `j` (1-based).
pub fn homodyne_current(rho: &DensityMatrix, site: usize, ctrl: &ControlSpec, dw: f64, dt: f64) -> Result<f64> {
    let n = rho.dim().trailing_zeros() as usize;
    let x = crate::operators::pauli(site, crate::operators::Axis::X, n)?;
    let eta_gamma = ctrl.efficiency() * ctrl.decay;
    if !(eta_gamma > 0.0) {
        return Err(invalid("eta", "the homodyne current needs ηΓ > 0"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    Ok(linalg::trace_product(&x, rho.matrix()).re + dw / dt / eta_gamma.sqrt())
}

/// One Euler–Maruyama step of width `dt` (physical time) with the given
/// generator, Hermitized and renormalized to unit trace. No positivity
/// check is made.
pub fn step_with(gen: &Generator, rho: &Operator, dw: &[f64], dt: f64) -> Result<Operator> {
    if dw.len() != gen.sites.len() {
        return Err(Error::DimensionMismatch {
            expected: gen.sites.len(),
            found: dw.len(),
        });
    }
    let mut out = rho.clone();
    linalg::add_scaled(&mut out, c64::new(dt, 0.0), &gen.apply(rho));
    let eta_gamma = gen.control().efficiency() * gen.control().decay;
    if eta_gamma > 0.0 {
        let root = eta_gamma.sqrt();
        for (s, &w) in gen.sites.iter().zip(dw) {
            if w == 0.0 {
                continue;
            }
            let x = linalg::trace_product(&s.x, rho).re;
            let mut term = &s.lowering * rho;
            term += rho * &s.raising;
            linalg::add_scaled(&mut term, c64::new(-x, 0.0), rho);
            linalg::add_scaled(&mut out, c64::new(w * root, 0.0), &term);
            if gen.control().feedback != 0.0 {
                let k = linalg::commutator(&s.feedback, rho);
                linalg::add_scaled(&mut out, -I * (w / root), &k);
            }
        }
    }
    linalg::hermitize(&mut out);
    let tr = linalg::trace(&out).re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Singular("trace of the updated state is not positive"));
    }
    Ok(linalg::scaled(c64::new(1.0 / tr, 0.0), &out))
}

/// Zero-temperature step; rejects `n_T ≠ 0`.
pub fn sme_step(
    rho: &DensityMatrix,
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    dw: &[f64],
    dt: f64,
) -> Result<DensityMatrix> {
    if !ctrl.is_zero_temperature() {
        return Err(Error::ThermalParameters);
    }
    thermal_sme_step(rho, chain, ctrl, dw, dt)
}

/// Finite-temperature step. The measured channel has efficiency `η_c η_d`.
pub fn thermal_sme_step(
    rho: &DensityMatrix,
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    dw: &[f64],
    dt: f64,
) -> Result<DensityMatrix> {
    let gen = Generator::new(chain, ctrl)?;
    linalg::ensure_square(rho.matrix(), gen.dim())?;
    Ok(DensityMatrix::from_matrix_unchecked(step_with(&gen, rho.matrix(), dw, dt)?))
}

/// Integrator used by [`run_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    PositiveMap,
}

/// Operators of the [`Scheme::PositiveMap`] update for one generator.
#[derive(Debug, Clone)]
pub struct PositiveMap {
    /// `-iH' - ½ Σ_k L_k†L_k`
    drift: Operator,
    measured: Vec<Operator>,
    /// `G_j + G_j†`
    quadrature: Vec<Operator>,
    unmeasured: Vec<Operator>,
}

impl PositiveMap {
    pub fn new(gen: &Generator) -> Self {
        let ctrl = gen.control();
        let d = gen.dim();
        let eta_gamma = ctrl.efficiency() * ctrl.decay;
        let mut hamiltonian = gen.hamiltonian().clone();
        let mut channels = Vec::new();
        let mut measured = Vec::new();
        let mut unmeasured = Vec::new();
        let half = c64::new(0.5, 0.0);
        for s in &gen.sites {
            let mut down_rate = gen.down_rate;
            if eta_gamma > 0.0 {
                let root = eta_gamma.sqrt();
                let mut g = linalg::scaled(c64::new(root, 0.0), &s.lowering);
                if ctrl.feedback != 0.0 {
                    linalg::add_scaled(&mut g, -I / root, &s.feedback);
                    linalg::add_scaled(&mut hamiltonian, half, &s.feedback_lowering);
                    linalg::add_scaled(&mut hamiltonian, half, &s.raising_feedback);
                }
                channels.push(g.clone());
                measured.push(g);
                down_rate -= eta_gamma;
            }
            if down_rate > 0.0 {
                unmeasured.push(linalg::scaled(c64::new(down_rate.sqrt(), 0.0), &s.lowering));
            }
            if gen.up_rate > 0.0 {
                unmeasured.push(linalg::scaled(c64::new(gen.up_rate.sqrt(), 0.0), &s.raising));
            }
        }
        channels.extend(unmeasured.iter().cloned());
        let mut drift = linalg::scaled(-I, &hamiltonian);
        for l in &channels {
            linalg::add_scaled(&mut drift, c64::new(-0.5, 0.0), &(&linalg::adjoint(l) * l));
        }
        debug_assert_eq!(drift.nrows(), d);
        let quadrature = measured
            .iter()
            .map(|g| {
                let mut q = g.clone();
                q += linalg::adjoint(g);
                q
            })
            .collect();
        Self {
            drift,
            measured,
            quadrature,
            unmeasured,
        }
    }

    /// One step of width `dt` (physical time), normalized to unit trace.
    pub fn step(&self, rho: &Operator, dw: &[f64], dt: f64) -> Result<Operator> {
        let d = rho.nrows();
        let mut m = linalg::identity(d);
        linalg::add_scaled(&mut m, c64::new(dt, 0.0), &self.drift);
        if !self.measured.is_empty() && dw.len() != self.measured.len() {
            return Err(Error::DimensionMismatch {
                expected: self.measured.len(),
                found: dw.len(),
            });
        }
        for ((g, q), w) in self.measured.iter().zip(&self.quadrature).zip(dw) {
            let dy = linalg::trace_product(q, rho).re * dt + w;
            linalg::add_scaled(&mut m, c64::new(dy, 0.0), g);
        }
        let mut out = &(&m * rho) * linalg::adjoint(&m);
        for l in &self.unmeasured {
            let jump = &(l * rho) * linalg::adjoint(l);
            linalg::add_scaled(&mut out, c64::new(dt, 0.0), &jump);
        }
        linalg::hermitize(&mut out);
        let tr = linalg::trace(&out).re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::Singular("trace of the updated state is not positive"));
        }
        Ok(linalg::scaled(c64::new(1.0 / tr, 0.0), &out))
    }
}

/// Settings for a single trajectory. Times are in units of `1/Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub t_final: f64,
    /// Step `Γdt`.
    pub dt: f64,
    /// Spacing of recorded points in `Γt`, rounded to whole steps.
    pub output_interval: f64,
    /// Depth of the bridge subdivision tried on a rejected step.
    pub max_halvings: u32,
    /// Keep the homodyne current of every site at each recorded point.
    pub record_currents: bool,
    pub scheme: Scheme,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            t_final: 20.0,
            dt: 1e-3,
            output_interval: 0.1,
            max_halvings: 4,
            record_currents: false,
            scheme: Scheme::PositiveMap,
        }
    }
}

/// One stochastic run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Recorded times `Γt`, starting at 0.
    pub times: Vec<f64>,
    /// `ΔE(t)` at each recorded time.
    pub stored_energy: Vec<f64>,
    /// `currents[k][j]`: current of site `j+1` over the step ending at
    /// `times[k]` (zero at `t = 0`).
    pub currents: Option<Vec<Vec<f64>>>,
    pub final_state: DensityMatrix,
    /// Number of steps that needed subdivision.
    pub refined_steps: u64,
}

struct Stepper<'a, N> {
    gen: &'a Generator,
    map: Option<PositiveMap>,
    noise: &'a mut N,
    max_depth: u32,
    refined: u64,
}

impl<N: NoiseSource> Stepper<'_, N> {
    fn advance(&mut self, rho: &Operator, dw: &[f64], dt: f64, step: u64, node: u64, depth: u32, t: f64) -> Result<Operator> {
        let next = match &self.map {
            Some(map) => map.step(rho, dw, dt)?,
            None => step_with(self.gen, rho, dw, dt)?,
        };
        if linalg::exceeds_negative_margin(&next, POSITIVITY_TOLERANCE) {
            return Ok(next);
        }
        if depth == self.max_depth {
            let min = linalg::hermitian_eigenvalues(&next)?[0];
            return Err(Error::Positivity {
                time: t,
                min_eigenvalue: min,
                dt: dt * self.gen.control().decay,
                halvings: depth,
            });
        }
        if depth == 0 {
            self.refined += 1;
        }
        let mut z = vec![0.0; dw.len()];
        self.noise.bridge_normals(step, node, &mut z);
        let half_sd = 0.5 * dt.sqrt();
        let first: Vec<f64> = dw.iter().zip(&z).map(|(w, z)| 0.5 * w + half_sd * z).collect();
        let second: Vec<f64> = dw.iter().zip(&first).map(|(w, a)| w - a).collect();
        let mid = self.advance(rho, &first, dt / 2.0, step, 2 * node + 1, depth + 1, t)?;
        self.advance(&mid, &second, dt / 2.0, step, 2 * node + 2, depth + 1, t)
    }
}

/// Runs one trajectory with Gaussian noise derived from `seed`.
pub fn run_trajectory(
    rho0: &DensityMatrix,
    gen: &Generator,
    opts: &TrajectoryOptions,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut noise = ChaChaNoise::new(seed, gen.chain().n_sites);
    run_trajectory_with_noise(rho0, gen, opts, &mut noise, seed)
}

/// Runs one trajectory with an arbitrary noise source.
pub fn run_trajectory_with_noise<N: NoiseSource>(
    rho0: &DensityMatrix,
    gen: &Generator,
    opts: &TrajectoryOptions,
    noise: &mut N,
    seed: u64,
) -> Result<TrajectoryRecord> {
    linalg::ensure_square(rho0.matrix(), gen.dim())?;
    if !(opts.dt > 0.0) || !(opts.t_final >= 0.0) || !(opts.output_interval > 0.0) {
        return Err(invalid("dt", "step, final time and output interval must be positive"));
    }
    if opts.max_halvings as u64 >= BRIDGE_SLOTS.trailing_zeros() as u64 {
        return Err(invalid("max_halvings", "at most 4 subdivisions are supported"));
    }
    let ctrl = gen.control();
    let metrics = BatteryMetrics::new(gen.hamiltonian(), rho0)?;
    let n_sites = gen.chain().n_sites;
    let dt = opts.dt / ctrl.decay;
    let n_steps = (opts.t_final / opts.dt).round() as u64;
    let stride = ((opts.output_interval / opts.dt).round() as u64).max(1);
    let eta_gamma_root = (ctrl.efficiency() * ctrl.decay).sqrt();

    let mut times = vec![0.0];
    let mut energies = vec![0.0];
    let mut currents = opts.record_currents.then(|| vec![vec![0.0; n_sites]]);
    let mut dw = vec![0.0; n_sites];
    let mut rho = rho0.matrix().clone();
    let mut stepper = Stepper {
        gen,
        map: (opts.scheme == Scheme::PositiveMap).then(|| PositiveMap::new(gen)),
        noise,
        max_depth: opts.max_halvings,
        refined: 0,
    };
    for step in 0..n_steps {
        stepper.noise.increments(step, dt, &mut dw);
        let t = (step + 1) as f64 * opts.dt;
        let next = stepper.advance(&rho, &dw, dt, step, 0, 0, t)?;
        let done = step + 1;
        if done % stride == 0 || done == n_steps {
            if let Some(c) = currents.as_mut() {
                let row = gen
                    .sites
                    .iter()
                    .zip(&dw)
                    .map(|(s, w)| linalg::trace_product(&s.x, &rho).re + w / dt / eta_gamma_root)
                    .collect();
                c.push(row);
            }
            times.push(t);
            energies.push(metrics.stored_energy(&DensityMatrix::from_matrix_unchecked(next.clone()))?);
        }
        rho = next;
    }
    let refined_steps = stepper.refined;
    Ok(TrajectoryRecord {
        seed,
        times,
        stored_energy: energies,
        currents,
        final_state: DensityMatrix::from_matrix_unchecked(rho),
        refined_steps,
    })
}

/// Settings for [`run_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub trajectory: TrajectoryOptions,
    pub n_traj: usize,
    /// Trajectory `i` uses seed `base_seed + i`.
    pub base_seed: u64,
}

/// A trajectory that ran out of subdivisions.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedTrajectory {
    pub index: usize,
    pub seed: u64,
    pub error: Error,
}

/// Trajectories plus per-time statistics of `ΔE` over the successful ones.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub records: Vec<TrajectoryRecord>,
    pub failed: Vec<FailedTrajectory>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (zero for a single trajectory).
    pub std_dev: Vec<f64>,
    /// `std_dev / √M`.
    pub standard_error: Vec<f64>,
}

/// Runs `n_traj` independent trajectories from `rho0`.
pub fn run_ensemble<E: Executor>(
    rho0: &DensityMatrix,
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    opts: &EnsembleOptions,
    exec: &E,
) -> Result<EnsembleResult> {
    if opts.n_traj == 0 {
        return Err(invalid("n_traj", "must be at least 1"));
    }
    let gen = Generator::new(chain, ctrl)?;
    linalg::ensure_square(rho0.matrix(), gen.dim())?;
    let runs = exec.map(opts.n_traj, |i| {
        let seed = opts.base_seed.wrapping_add(i as u64);
        run_trajectory(rho0, &gen, &opts.trajectory, seed)
    });
    let mut records = Vec::with_capacity(runs.len());
    let mut failed = Vec::new();
    for (index, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => records.push(r),
            Err(error) => failed.push(FailedTrajectory {
                index,
                seed: opts.base_seed.wrapping_add(index as u64),
                error,
            }),
        }
    }
    let Some(first) = records.first() else {
        return Err(failed.swap_remove(0).error);
    };
    let times = first.times.clone();
    let m = records.len() as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut std_dev = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let mu = records.iter().map(|r| r.stored_energy[k]).sum::<f64>() / m;
        let ss: f64 = records
            .iter()
            .map(|r| {
                let d = r.stored_energy[k] - mu;
                d * d
            })
            .sum();
        mean.push(mu);
        std_dev.push(if records.len() > 1 { (ss / (m - 1.0)).sqrt() } else { 0.0 });
    }
    let standard_error = std_dev.iter().map(|s| s / m.sqrt()).collect();
    Ok(EnsembleResult {
        times,
        records,
        failed,
        mean,
        std_dev,
        standard_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::feedback_me_rhs;
    use crate::executor::Sequential;
    use core::f64::consts::PI;

    #[test]
    fn current_examples() {
        let ctrl = ControlSpec::new(0.0, PI, 1.0, 1.0);
        let down = DensityMatrix::all_down(1);
        assert_eq!(homodyne_current(&down, 1, &ctrl, 0.0, 1e-3).unwrap(), 0.0);
        let s = 1.0 / 2f64.sqrt();
        let plus = DensityMatrix::pure(&[c64::new(s, 0.0), c64::new(s, 0.0)]).unwrap();
        assert!((homodyne_current(&plus, 1, &ctrl, 0.0, 1e-3).unwrap() - 1.0).abs() < 1e-15);
        assert!((homodyne_current(&plus, 1, &ctrl, 2e-3, 1e-3).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_step_without_feedback_is_euler() {
        let chain = ChainSpec::xxx(2, 1.0, 0.7);
        let ctrl = ControlSpec::new(0.0, PI, 1.0, 1.0);
        let rho = DensityMatrix::maximally_mixed(4);
        let dt = 1e-2;
        let out = sme_step(&rho, &chain, &ctrl, &[0.0, 0.0], dt).unwrap();
        let mut want = rho.matrix().clone();
        linalg::add_scaled(&mut want, c64::new(dt, 0.0), &feedback_me_rhs(rho.matrix(), &chain, &ctrl).unwrap());
        let mut diff = out.into_matrix();
        diff -= &want;
        assert!(linalg::max_abs(&diff) < 1e-15);
    }

    #[test]
    fn locked_state_survives_any_noise() {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 1.0);
        let up = DensityMatrix::all_up(2);
        for dw in [[0.3, -0.1], [-2.0, 1.5]] {
            let out = sme_step(&up, &chain, &ctrl, &dw, 1e-3).unwrap();
            let mut diff = out.into_matrix();
            diff -= up.matrix();
            assert!(linalg::max_abs(&diff) < 1e-14);
        }
    }

    #[test]
    fn thermal_step_reduces_to_zero_temperature() {
        let chain = ChainSpec::xxx(2, 1.0, 0.4);
        let ctrl = ControlSpec::from_chi(0.8, 2.0, 1.0, 0.9);
        let rho = DensityMatrix::maximally_mixed(4);
        let a = sme_step(&rho, &chain, &ctrl, &[0.02, -0.01], 1e-3).unwrap();
        let b = thermal_sme_step(&rho, &chain, &ctrl.with_thermal(0.0, 1.0, 0.9), &[0.02, -0.01], 1e-3).unwrap();
        let mut diff = a.into_matrix();
        diff -= b.matrix();
        assert!(linalg::max_abs(&diff) < 1e-12);
        assert!(sme_step(&rho, &chain, &ctrl.with_thermal(0.1, 0.9, 1.0), &[0.0, 0.0], 1e-3).is_err());
    }

    #[test]
    fn increments_have_unit_variance_per_dt() {
        let mut noise = ChaChaNoise::new(7, 1);
        let dt = 1e-3;
        let n = 100_000;
        let mut dw = [0.0];
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..n {
            noise.increments(k, dt, &mut dw);
            s1 += dw[0];
            s2 += dw[0] * dw[0];
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let var = s2 / nf - mean * mean;
        assert!(mean.abs() < 4.0 * (dt / nf).sqrt());
        // Var of the sample variance of a normal is 2σ⁴/n
        assert!((var - dt).abs() < 4.0 * dt * (2.0 / nf).sqrt());
    }

    #[test]
    fn noise_is_counter_based() {
        let mut a = ChaChaNoise::new(11, 3);
        let mut b = ChaChaNoise::new(11, 3);
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        for k in 0..10 {
            a.increments(k, 1.0, &mut x);
        }
        b.increments(9, 1.0, &mut y);
        assert_eq!(x, y);
        assert_ne!(x[0], x[1]);
    }

    #[test]
    fn zero_noise_trajectory_without_feedback_is_deterministic_decay() {
        let chain = ChainSpec::xxx(2, 1.0, 0.5);
        let ctrl = ControlSpec::new(0.0, PI, 1.0, 1.0);
        let gen = Generator::new(&chain, &ctrl).unwrap();
        let opts = TrajectoryOptions {
            t_final: 2.0,
            dt: 1e-3,
            output_interval: 0.5,
            scheme: Scheme::EulerMaruyama,
            ..Default::default()
        };
        let up = DensityMatrix::all_up(2);
        let rec = run_trajectory_with_noise(&up, &gen, &opts, &mut ZeroNoise, 0).unwrap();
        let me = crate::dynamics::evolve_with(
            &up,
            &gen,
            &crate::dynamics::EvolveOptions {
                t_final: 2.0,
                dt: 1e-3,
                output_interval: 0.5,
                max_halvings: 0,
            },
        )
        .unwrap();
        assert_eq!(rec.times.len(), 5);
        for (a, b) in rec.stored_energy.iter().zip(&me.metrics) {
            assert!((a - b.stored_energy).abs() < 2e-3);
        }
    }

    #[test]
    fn positive_map_matches_euler_to_first_order() {
        let chain = ChainSpec::xxx(2, 1.0, 0.8);
        let ctrl = ControlSpec::from_chi(0.7, 2.5, 1.0, 0.6).with_thermal(0.2, 0.75, 0.8);
        let gen = Generator::new(&chain, &ctrl).unwrap();
        let map = PositiveMap::new(&gen);
        let rho = DensityMatrix::ground_state(gen.hamiltonian()).unwrap().into_matrix();
        let mut last = f64::INFINITY;
        for dt in [1e-3, 1e-4] {
            let z = [0.3, -1.1];
            let dw: Vec<f64> = z.iter().map(|z| z * dt.sqrt()).collect();
            let mut diff = map.step(&rho, &dw, dt).unwrap();
            diff -= step_with(&gen, &rho, &dw, dt).unwrap();
            let err = linalg::max_abs(&diff);
            // the schemes differ at order dw², i.e. dt
            assert!(err < 10.0 * dt, "{err}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn positive_map_keeps_locked_state() {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let gen = Generator::new(&chain, &ControlSpec::from_chi(1.0, PI, 1.0, 1.0)).unwrap();
        let up = DensityMatrix::all_up(2);
        let out = PositiveMap::new(&gen).step(up.matrix(), &[0.05, -0.02], 1e-3).unwrap();
        let mut diff = out;
        diff -= up.matrix();
        assert!(linalg::max_abs(&diff) < 1e-14);
    }

    #[test]
    fn ensemble_is_deterministic() {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 0.8);
        let rho0 = DensityMatrix::ground_state(&crate::operators::battery_hamiltonian(&chain).unwrap()).unwrap();
        let opts = EnsembleOptions {
            trajectory: TrajectoryOptions {
                t_final: 0.5,
                dt: 1e-2,
                output_interval: 0.1,
                ..Default::default()
            },
            n_traj: 4,
            base_seed: 3,
        };
        let a = run_ensemble(&rho0, &chain, &ctrl, &opts, &Sequential).unwrap();
        let b = run_ensemble(&rho0, &chain, &ctrl, &opts, &Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.failed.is_empty(), "{:?}", a.failed);
        assert_eq!(a.records[2].seed, 5);
        assert_ne!(a.records[0].stored_energy, a.records[1].stored_energy);
        assert_eq!(a.standard_error[0], 0.0);
    }
}
