//! Steady-state parameter scans, feedback-strength optimization and
//! critical-coupling search.

use alloc::string::ToString;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{self, DensityMatrix, Generator, SteadyStateOptions};
use crate::error::{invalid, Error, Result};
use crate::executor::Executor;
use crate::linalg;
use crate::metrics::{BatteryMetrics, MetricsRecord};
use crate::operators::{battery_hamiltonian, ChainSpec, ControlSpec};
use crate::search;

/// Points within this distance of the maximum belong to the argmax set.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;

/// Steady-state quantity to scan or optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    StoredEnergy,
    Ergotropy,
    Utilization,
    /// `ℰ/ΔE`; undefined points count as failures.
    ExtractionRatio,
    /// `ρ₁₁ = ⟨↑…↑|ρ|↑…↑⟩`.
    FullChargePopulation,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::StoredEnergy,
        Metric::Ergotropy,
        Metric::Utilization,
        Metric::ExtractionRatio,
        Metric::FullChargePopulation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::StoredEnergy => "stored_energy",
            Metric::Ergotropy => "ergotropy",
            Metric::Utilization => "utilization",
            Metric::ExtractionRatio => "ratio",
            Metric::FullChargePopulation => "rho11",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// State the battery is charged from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// Ground state of `H_B` (uniform mixture if degenerate).
    #[default]
    Ground,
    /// `|↓…↓⟩`.
    AllDown,
}

impl InitialState {
    pub fn prepare(self, chain: &ChainSpec) -> Result<DensityMatrix> {
        match self {
            InitialState::Ground => DensityMatrix::ground_state(&battery_hamiltonian(chain)?),
            InitialState::AllDown => Ok(DensityMatrix::all_down(chain.n_sites)),
        }
    }
}

/// Steady state of one parameter point with its figures of merit.
#[derive(Debug, Clone)]
pub struct SteadyPoint {
    pub state: DensityMatrix,
    pub record: MetricsRecord,
}

impl SteadyPoint {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::StoredEnergy => self.record.stored_energy,
            Metric::Ergotropy => self.record.ergotropy,
            Metric::Utilization => self.record.utilization,
            Metric::ExtractionRatio => self.record.extraction_ratio.unwrap_or(f64::NAN),
            Metric::FullChargePopulation => self.state.matrix()[(0, 0)].re,
        }
    }
}

/// Evaluates steady-state metrics for a fixed choice of initial state and
/// solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Evaluator {
    pub initial: InitialState,
    pub steady: SteadyStateOptions,
}

impl Evaluator {
    pub fn new(initial: InitialState) -> Self {
        Self {
            initial,
            steady: SteadyStateOptions::default(),
        }
    }

    pub fn point(&self, chain: &ChainSpec, ctrl: &ControlSpec) -> Result<SteadyPoint> {
        let gen = Generator::new(chain, ctrl)?;
        let rho0 = self.initial.prepare(chain)?;
        let ss = dynamics::steady_state_with(&gen, &self.steady)?;
        let record = BatteryMetrics::new(gen.hamiltonian(), &rho0)?.record(&ss.state)?;
        Ok(SteadyPoint {
            state: ss.state,
            record,
        })
    }

    pub fn metric(&self, chain: &ChainSpec, ctrl: &ControlSpec, metric: Metric) -> Result<f64> {
        let v = self.point(chain, ctrl)?.metric(metric);
        if v.is_nan() {
            return Err(invalid("metric", "ratio undefined at zero stored energy"));
        }
        Ok(v)
    }
}

/// Endpoint-inclusive uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SweepAxis {
    pub fn new(name: &'static str, min: f64, max: f64, count: usize) -> Self {
        Self { name, min, max, count }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.count <= 1 {
            self.min
        } else if k + 1 == self.count {
            self.max
        } else {
            self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }

    pub fn step(&self) -> f64 {
        if self.count <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }
}

/// Metric values on an `α × χ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSurface {
    pub alpha: SweepAxis,
    pub chi: SweepAxis,
    pub metric: Metric,
    /// Row-major: `values[i * chi.count + k]` at `(alpha.value(i), chi.value(k))`;
    /// NaN marks a failed point.
    pub values: Vec<f64>,
    /// Grid indices `(i, k)` within [`ARGMAX_TOLERANCE`] of the maximum.
    pub argmax: Vec<(usize, usize)>,
    pub max: f64,
    pub failures: usize,
}

impl SweepSurface {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.chi.count + k]
    }

    /// Argmax set as `(α, χ)` pairs.
    pub fn argmax_points(&self) -> Vec<(f64, f64)> {
        self.argmax
            .iter()
            .map(|&(i, k)| (self.alpha.value(i), self.chi.value(k)))
            .collect()
    }

    /// Builds a surface from precomputed values, locating the argmax set.
    pub fn from_values(alpha: SweepAxis, chi: SweepAxis, metric: Metric, values: Vec<f64>) -> Result<Self> {
        if values.len() != alpha.count * chi.count {
            return Err(Error::DimensionMismatch {
                expected: alpha.count * chi.count,
                found: values.len(),
            });
        }
        let max = values
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::EmptySweep);
        }
        let argmax = values
            .iter()
            .enumerate()
            .filter(|(_, v)| max - **v <= ARGMAX_TOLERANCE)
            .map(|(n, _)| (n / chi.count, n % chi.count))
            .collect();
        let failures = values.iter().filter(|v| v.is_nan()).count();
        Ok(Self {
            alpha,
            chi,
            metric,
            values,
            argmax,
            max,
            failures,
        })
    }
}

/// Steady-state metric over an `α × χ` grid; `f = χΓ` at each point.
pub fn grid_sweep<E: Executor>(
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    alpha: SweepAxis,
    chi: SweepAxis,
    metric: Metric,
    eval: &Evaluator,
    exec: &E,
) -> Result<SweepSurface> {
    chain.validate()?;
    if alpha.count == 0 || chi.count == 0 {
        return Err(Error::EmptySweep);
    }
    let values = exec.map(alpha.count * chi.count, |n| {
        let c = ctrl.with_alpha(alpha.value(n / chi.count)).with_chi(chi.value(n % chi.count));
        eval.metric(chain, &c, metric).unwrap_or(f64::NAN)
    });
    SweepSurface::from_values(alpha, chi, metric, values)
}

/// Bracket and resolution of [`optimize_chi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSearch {
    pub lo: f64,
    pub hi: f64,
    /// Points of the initial uniform scan.
    pub coarse: usize,
    pub tolerance: f64,
}

impl Default for ChiSearch {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 5.0,
            coarse: 26,
            tolerance: 1e-4,
        }
    }
}

/// Result of [`optimize_chi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiOptimum {
    /// Reported optimum: 0 when feedback is ineffective.
    pub chi: f64,
    pub value: f64,
    /// Best point found inside the bracket, before the ineffective check.
    pub searched_chi: f64,
    pub searched_value: f64,
    /// Metric without feedback.
    pub baseline: f64,
    /// No `χ` in the bracket beats `χ = 0` by more than `1e-12`.
    pub ineffective: bool,
    /// The metric varies by less than `1e-12` across the coarse scan.
    pub flat: bool,
}

/// Maximizes the steady-state metric over `χ` at the `α` of `ctrl`: a
/// uniform scan followed by golden-section refinement around its best
/// point.
pub fn optimize_chi<E: Executor>(
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    metric: Metric,
    eval: &Evaluator,
    search: &ChiSearch,
    exec: &E,
) -> Result<ChiOptimum> {
    if !(search.hi > search.lo) || search.coarse < 3 || !(search.tolerance > 0.0) {
        return Err(invalid("chi search", "needs hi > lo, at least 3 scan points and a positive tolerance"));
    }
    let axis = SweepAxis::new("chi", search.lo, search.hi, search.coarse);
    let f = |chi: f64| eval.metric(chain, &ctrl.with_chi(chi), metric);
    let scan: Vec<Result<f64>> = exec.map(axis.count + 1, |k| {
        if k == axis.count {
            f(0.0)
        } else {
            f(axis.value(k))
        }
    });
    let mut scan = scan.into_iter().collect::<Result<Vec<f64>>>()?;
    let baseline = scan.pop().expect("baseline entry");
    let (mut best, mut top, mut bottom) = (0, f64::NEG_INFINITY, f64::INFINITY);
    for (k, &v) in scan.iter().enumerate() {
        if v > top {
            top = v;
            best = k;
        }
        bottom = bottom.min(v);
    }
    if top - bottom < 1e-12 {
        return Ok(ChiOptimum {
            chi: 0.0,
            value: baseline,
            searched_chi: axis.value(best),
            searched_value: top,
            baseline,
            ineffective: true,
            flat: true,
        });
    }
    let lo = axis.value(best.saturating_sub(1));
    let hi = axis.value((best + 1).min(axis.count - 1));
    let refined = search::golden_max(f, lo, hi, search.tolerance)?;
    let (searched_chi, searched_value) = if refined.value >= top {
        (refined.x, refined.value)
    } else {
        (axis.value(best), top)
    };
    let ineffective = searched_value <= baseline + 1e-12;
    Ok(ChiOptimum {
        chi: if ineffective { 0.0 } else { searched_chi },
        value: if ineffective { baseline } else { searched_value },
        searched_chi,
        searched_value,
        baseline,
        ineffective,
        flat: false,
    })
}

/// Settings of [`find_critical_j`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSearch {
    pub j_lo: f64,
    pub j_hi: f64,
    /// Bisection stops below this width (in units of `h`).
    pub tolerance: f64,
    /// The `χ` bracket excludes a neighbourhood of zero so that the
    /// comparison is against feedback that is actually on.
    pub chi: ChiSearch,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            j_lo: 0.5,
            j_hi: 5.0,
            tolerance: 1e-3,
            chi: ChiSearch {
                lo: 0.05,
                ..ChiSearch::default()
            },
        }
    }
}

/// Advantage of the best feedback over none at coupling `j`:
/// `max_χ metric(χ) - metric(0)`.
pub fn feedback_advantage<E: Executor>(
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    metric: Metric,
    eval: &Evaluator,
    search: &ChiSearch,
    exec: &E,
) -> Result<f64> {
    let o = optimize_chi(chain, ctrl, metric, eval, search, exec)?;
    Ok(o.searched_value - o.baseline)
}

/// Coupling at which [`feedback_advantage`] changes sign, by bisection.
pub fn find_critical_j<E: Executor>(
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    metric: Metric,
    eval: &Evaluator,
    search: &CriticalSearch,
    exec: &E,
) -> Result<f64> {
    search::bisect(
        |j| feedback_advantage(&chain.with_coupling(j), ctrl, metric, eval, &search.chi, exec),
        search.j_lo,
        search.j_hi,
        search.tolerance,
    )
}

/// Parameter varied by [`scan_1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanParameter {
    /// `J`
    Coupling,
    /// `γ`
    Anisotropy,
    /// `n_T`
    ThermalOccupation,
    /// `Γ`, with `χ = f/Γ` held fixed.
    Decay,
    /// `η = η_c η_d`, varied through `η_d`.
    Efficiency,
}

impl ScanParameter {
    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::Coupling => "j",
            ScanParameter::Anisotropy => "gamma",
            ScanParameter::ThermalOccupation => "n_t",
            ScanParameter::Decay => "decay",
            ScanParameter::Efficiency => "eta",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            ScanParameter::Coupling,
            ScanParameter::Anisotropy,
            ScanParameter::ThermalOccupation,
            ScanParameter::Decay,
            ScanParameter::Efficiency,
        ]
        .into_iter()
        .find(|p| p.name() == name)
    }

    /// Chain and control with this parameter set to `x`.
    pub fn apply(self, chain: &ChainSpec, ctrl: &ControlSpec, x: f64) -> Result<(ChainSpec, ControlSpec)> {
        let (mut ch, mut c) = (*chain, *ctrl);
        match self {
            ScanParameter::Coupling => ch.coupling = x,
            ScanParameter::Anisotropy => ch.gamma = x,
            ScanParameter::ThermalOccupation => c.thermal_occupation = x,
            ScanParameter::Decay => {
                let chi = c.chi();
                c.decay = x;
                c = c.with_chi(chi);
            }
            ScanParameter::Efficiency => {
                if c.collection_efficiency <= 0.0 {
                    return Err(invalid("eta", "cannot vary η with η_c = 0"));
                }
                c.detector_efficiency = x / c.collection_efficiency;
            }
        }
        ch.validate()?;
        c.validate()?;
        Ok((ch, c))
    }
}

/// One abscissa of a [`ScanTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub x: f64,
    /// `χ` used at this point.
    pub chi: f64,
    /// One value per requested metric; NaN where the point failed.
    pub values: Vec<f64>,
    pub error: Option<alloc::string::String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub parameter: ScanParameter,
    pub metrics: Vec<Metric>,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn column(&self, metric: Metric) -> Option<Vec<f64>> {
        let k = self.metrics.iter().position(|m| *m == metric)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }
}

/// Steady-state metrics as one parameter varies. With `reoptimize`, `χ` is
/// optimized at every point for the first metric in `metrics`.
pub fn scan_1d<E: Executor>(
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    parameter: ScanParameter,
    xs: &[f64],
    metrics: &[Metric],
    eval: &Evaluator,
    reoptimize: Option<&ChiSearch>,
    exec: &E,
) -> Result<ScanTable> {
    if xs.is_empty() || metrics.is_empty() {
        return Err(Error::EmptySweep);
    }
    let point = |x: f64| -> Result<(f64, Vec<f64>)> {
        let (ch, mut c) = parameter.apply(chain, ctrl, x)?;
        if let Some(search) = reoptimize {
            let o = optimize_chi(&ch, &c, metrics[0], eval, search, &crate::executor::Sequential)?;
            c = c.with_chi(o.chi);
        }
        let p = eval.point(&ch, &c)?;
        Ok((c.chi(), metrics.iter().map(|m| p.metric(*m)).collect()))
    };
    let rows = exec.map(xs.len(), |k| match point(xs[k]) {
        Ok((chi, values)) => ScanRow {
            x: xs[k],
            chi,
            values,
            error: None,
        },
        Err(e) => ScanRow {
            x: xs[k],
            chi: f64::NAN,
            values: alloc::vec![f64::NAN; metrics.len()],
            error: Some(e.to_string()),
        },
    });
    Ok(ScanTable {
        parameter,
        metrics: metrics.to_vec(),
        rows,
    })
}

/// First `Γt` at which `‖L ρ(t)‖_F < threshold·Γ` along the RK4 solution
/// from `rho0`, checked after every step of width `dt` (`Γdt`).
pub fn relaxation_time(
    rho0: &DensityMatrix,
    chain: &ChainSpec,
    ctrl: &ControlSpec,
    threshold: f64,
    dt: f64,
    t_max: f64,
) -> Result<f64> {
    let gen = Generator::new(chain, ctrl)?;
    linalg::ensure_square(rho0.matrix(), gen.dim())?;
    let gamma = ctrl.decay;
    let h = dt / gamma;
    let mut rho = rho0.matrix().clone();
    let mut residual = linalg::frobenius_norm(&gen.apply(&rho)) / gamma;
    let steps = (t_max / dt).ceil() as usize;
    for step in 0..=steps {
        if residual < threshold {
            return Ok(step as f64 * dt);
        }
        rho = dynamics::rk4_step(&gen, &rho, h);
        residual = linalg::frobenius_norm(&gen.apply(&rho)) / gamma;
    }
    Err(Error::SteadyState {
        residual,
        tolerance: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::Sequential;
    use core::f64::consts::PI;

    #[test]
    fn axis_is_endpoint_inclusive() {
        let a = SweepAxis::new("alpha", -PI, PI, 5);
        let v = a.values();
        assert_eq!(v[0], -PI);
        assert_eq!(v[4], PI);
        assert_eq!(v[2], 0.0);
        assert_eq!(SweepAxis::new("x", 2.0, 3.0, 1).values(), [2.0]);
    }

    #[test]
    fn single_point_grid_is_its_own_argmax() {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 1.0);
        let s = grid_sweep(
            &chain,
            &ctrl,
            SweepAxis::new("alpha", 0.3, 0.3, 1),
            SweepAxis::new("chi", 0.7, 0.7, 1),
            Metric::StoredEnergy,
            &Evaluator::default(),
            &Sequential,
        )
        .unwrap();
        assert_eq!(s.argmax, [(0, 0)]);
    }

    #[test]
    fn nan_points_are_excluded() {
        let a = SweepAxis::new("alpha", 0.0, 1.0, 1);
        let c = SweepAxis::new("chi", 0.0, 1.0, 3);
        let s = SweepSurface::from_values(a.clone(), c.clone(), Metric::Ergotropy, alloc::vec![1.0, f64::NAN, 0.5]).unwrap();
        assert_eq!(s.argmax, [(0, 0)]);
        assert_eq!(s.failures, 1);
        assert!(matches!(
            SweepSurface::from_values(a, c, Metric::Ergotropy, alloc::vec![f64::NAN; 3]),
            Err(Error::EmptySweep)
        ));
    }

    #[test]
    fn two_site_full_charge_from_singlet() {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 1.0);
        let p = Evaluator::default().point(&chain, &ctrl).unwrap();
        assert!((p.metric(Metric::StoredEnergy) - 5.0).abs() < 1e-9);
        assert!((p.metric(Metric::FullChargePopulation) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn feedback_fails_beyond_critical_coupling() {
        let chain = ChainSpec::xxx(2, 1.0, 4.0);
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 0.8);
        let o = optimize_chi(&chain, &ctrl, Metric::StoredEnergy, &Evaluator::default(), &ChiSearch::default(), &Sequential).unwrap();
        assert!(o.ineffective);
        assert_eq!(o.chi, 0.0);
    }

    #[test]
    fn scan_parameter_names_round_trip() {
        for p in [
            ScanParameter::Coupling,
            ScanParameter::Anisotropy,
            ScanParameter::ThermalOccupation,
            ScanParameter::Decay,
            ScanParameter::Efficiency,
        ] {
            assert_eq!(ScanParameter::from_name(p.name()), Some(p));
        }
        for m in Metric::ALL {
            assert_eq!(Metric::from_name(m.name()), Some(m));
        }
    }

    #[test]
    fn decay_scan_keeps_chi() {
        let ctrl = ControlSpec::from_chi(0.7, PI, 1.0, 1.0);
        let (_, c) = ScanParameter::Decay.apply(&ChainSpec::xxx(2, 1.0, 1.0), &ctrl, 2.0).unwrap();
        assert!((c.chi() - 0.7).abs() < 1e-15);
        assert!((c.feedback - 1.4).abs() < 1e-15);
    }

    #[test]
    fn failed_scan_points_are_flagged() {
        let chain = ChainSpec::xxx(2, 1.0, 1.0);
        let ctrl = ControlSpec::from_chi(1.0, PI, 1.0, 1.0);
        let t = scan_1d(
            &chain,
            &ctrl,
            ScanParameter::Anisotropy,
            &[0.0, 2.0],
            &[Metric::StoredEnergy],
            &Evaluator::default(),
            None,
            &Sequential,
        )
        .unwrap();
        assert_eq!(t.failures(), 1);
        assert!(t.rows[1].values[0].is_nan());
        assert!(t.rows[0].error.is_none());
    }
}
