//! Subcommand implementations: each turns a configuration into tables.

use std::path::{Path, PathBuf};

use qbatt_core::dynamics::{evolve, EvolveOptions};
use qbatt_core::operators::{battery_hamiltonian, spectrum};
use qbatt_core::sweeps::{
    find_critical_j, grid_sweep, scan_1d, ChiSearch, CriticalSearch, Evaluator, Metric, ScanParameter, SweepAxis,
};
use qbatt_core::trajectories::{run_ensemble, EnsembleOptions, TrajectoryOptions};
use qbatt_core::Error as CoreError;

use crate::config::{ConfigError, RunConfig};
use crate::output::{fmt_float, Table};
use crate::parallel::Rayon;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Hamiltonian,
    Evolve,
    Steady,
    Traj,
    Sweep,
    Scan,
    CriticalJ,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Hamiltonian => "hamiltonian",
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::Traj => "traj",
            Command::Sweep => "sweep",
            Command::Scan => "scan",
            Command::CriticalJ => "critical-j",
        }
    }

    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Hamiltonian | Command::Steady => &[],
            Command::Evolve => &[("t_final", "20"), ("dt", "0.01"), ("output_interval", "0.1")],
            Command::Traj => &[
                ("t_final", "20"),
                ("dt", "0.001"),
                ("output_interval", "0.1"),
                ("num", "200"),
                ("seed", "0"),
            ],
            Command::Sweep => &[
                ("metric", "stored_energy"),
                ("alpha_min", "-pi"),
                ("alpha_max", "pi"),
                ("alpha_count", "101"),
                ("chi_min", "-2"),
                ("chi_max", "2"),
                ("chi_count", "101"),
            ],
            Command::Scan => &[("metric", "stored_energy"), ("count", "11"), ("reoptimize", "false")],
            Command::CriticalJ => &[("metric", "stored_energy"), ("j_lo", "0.5"), ("j_hi", "5")],
        }
    }

    fn uses_control(self) -> bool {
        self != Command::Hamiltonian
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. }
            | CoreError::SiteOutOfRange { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::ThermalParameters => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Fills command defaults and shared defaults for absent keys.
pub fn resolve(command: Command, cfg: &mut RunConfig) -> Result<(), CliError> {
    let mut defaults: Vec<(&str, String)> = vec![
        ("h", "1".into()),
        ("j", "1".into()),
        ("gamma", "0".into()),
        ("delta", "1".into()),
        ("output", format!("{}.csv", command.name())),
    ];
    if command.uses_control() {
        defaults.extend([
            ("alpha", "pi".into()),
            ("decay", "1".into()),
            ("n_t", "0".into()),
            ("initial", "ground".into()),
        ]);
        let chi_free = matches!(command, Command::Sweep | Command::CriticalJ);
        if chi_free && !cfg.contains("f") && !cfg.contains("chi") {
            defaults.push(("chi", "0".into()));
        }
        if !["eta", "eta_c", "eta_d"].iter().any(|k| cfg.contains(k)) {
            defaults.push(("eta", "1".into()));
        }
    }
    defaults.extend(command.defaults().iter().map(|(k, v)| (*k, v.to_string())));
    for (k, v) in defaults {
        if !cfg.contains(k) {
            cfg.set(k, &v)?;
        }
    }
    cfg.chain()?;
    if command.uses_control() {
        cfg.control()?;
    }
    Ok(())
}

/// Tables produced by a run plus any per-point failures.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(PathBuf, Table)>,
    pub flagged: Vec<String>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

/// Runs `command` on a resolved configuration.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let chain = cfg.chain()?;
    let out_path = PathBuf::from(cfg.get("output").unwrap_or("out.csv"));
    let mut out = RunOutput::default();
    match command {
        Command::Hamiltonian => {
            let spec = spectrum(&battery_hamiltonian(&chain)?)?;
            let mut t = Table::new(["level", "energy"]);
            for (k, e) in spec.values.iter().enumerate() {
                t.push(vec![(k + 1).to_string(), fmt_float(*e)]);
            }
            out.files.push((out_path, t));
        }
        Command::Evolve => {
            let ctrl = cfg.control()?;
            let rho0 = cfg.initial().prepare(&chain)?;
            let opts = EvolveOptions {
                t_final: cfg.f64_or("t_final", 20.0),
                dt: cfg.f64_or("dt", 1e-2),
                output_interval: cfg.f64_or("output_interval", 0.1),
                ..EvolveOptions::default()
            };
            let res = evolve(&rho0, &chain, &ctrl, &opts)?;
            let d = chain.dim();
            let mut header = vec!["gamma_t".to_string(), "delta_e".into(), "ergotropy".into(), "utilization".into()];
            header.extend((1..=d).map(|k| format!("pop_{k}")));
            let mut t = Table::new(header);
            for ((time, state), m) in res.times.iter().zip(&res.states).zip(&res.metrics) {
                let mut row = vec![*time, m.stored_energy, m.ergotropy, m.utilization];
                row.extend(state.populations());
                t.push_floats(row);
            }
            out.files.push((out_path, t));
        }
        Command::Steady => {
            let ctrl = cfg.control()?;
            let p = Evaluator::new(cfg.initial()).point(&chain, &ctrl)?;
            let d = chain.dim();
            let mut header: Vec<String> = (1..=d).map(|k| format!("pop_{k}")).collect();
            header.extend(["delta_e", "ergotropy", "utilization", "ratio"].map(String::from));
            let mut t = Table::new(header);
            let mut row = p.state.populations();
            row.extend([
                p.record.stored_energy,
                p.record.ergotropy,
                p.record.utilization,
                p.record.extraction_ratio.unwrap_or(f64::NAN),
            ]);
            t.push_floats(row);
            out.files.push((out_path, t));
        }
        Command::Traj => {
            let ctrl = cfg.control()?;
            let rho0 = cfg.initial().prepare(&chain)?;
            let opts = EnsembleOptions {
                trajectory: TrajectoryOptions {
                    t_final: cfg.f64_or("t_final", 20.0),
                    dt: cfg.f64_or("dt", 1e-3),
                    output_interval: cfg.f64_or("output_interval", 0.1),
                    ..TrajectoryOptions::default()
                },
                n_traj: cfg.usize_or("num", 200),
                base_seed: cfg.u64_or("seed", 0),
            };
            let ens = run_ensemble(&rho0, &chain, &ctrl, &opts, &Rayon)?;
            let mut summary = Table::new(["gamma_t", "mean_delta_e", "std_dev", "std_error"]);
            for k in 0..ens.times.len() {
                summary.push_floats([ens.times[k], ens.mean[k], ens.std_dev[k], ens.standard_error[k]]);
            }
            let mut each = Table::new(["seed", "gamma_t", "delta_e"]);
            for r in &ens.records {
                for (t, e) in r.times.iter().zip(&r.stored_energy) {
                    each.push(vec![r.seed.to_string(), fmt_float(*t), fmt_float(*e)]);
                }
            }
            out.flagged = ens
                .failed
                .iter()
                .map(|f| format!("trajectory {} (seed {}): {}", f.index, f.seed, f.error))
                .collect();
            out.files.push((sibling(&out_path, "_trajectories"), each));
            out.files.push((out_path, summary));
        }
        Command::Sweep => {
            let ctrl = cfg.control()?;
            let metric = cfg.metric_or(Metric::StoredEnergy);
            let alpha = SweepAxis::new(
                "alpha",
                cfg.f64_or("alpha_min", -std::f64::consts::PI),
                cfg.f64_or("alpha_max", std::f64::consts::PI),
                cfg.usize_or("alpha_count", 101),
            );
            let chi = SweepAxis::new(
                "chi",
                cfg.f64_or("chi_min", -2.0),
                cfg.f64_or("chi_max", 2.0),
                cfg.usize_or("chi_count", 101),
            );
            let s = grid_sweep(&chain, &ctrl, alpha, chi, metric, &Evaluator::new(cfg.initial()), &Rayon)?;
            let mut t = Table::new(["alpha", "chi", metric.name(), "argmax"]);
            for i in 0..s.alpha.count {
                for k in 0..s.chi.count {
                    let v = s.at(i, k);
                    if v.is_nan() {
                        out.flagged.push(format!("alpha = {}, chi = {}", fmt_float(s.alpha.value(i)), fmt_float(s.chi.value(k))));
                    }
                    t.push(vec![
                        fmt_float(s.alpha.value(i)),
                        fmt_float(s.chi.value(k)),
                        fmt_float(v),
                        u8::from(s.argmax.contains(&(i, k))).to_string(),
                    ]);
                }
            }
            out.files.push((out_path, t));
        }
        Command::Scan => {
            let ctrl = cfg.control()?;
            let parameter = cfg
                .get("parameter")
                .and_then(ScanParameter::from_name)
                .ok_or(ConfigError::Missing { key: "parameter" })?;
            let from = cfg.f64_required("from")?;
            let to = cfg.f64_required("to")?;
            let xs = SweepAxis::new(parameter.name(), from, to, cfg.usize_or("count", 11)).values();
            let first = cfg.metric_or(Metric::StoredEnergy);
            let mut metrics = vec![first];
            metrics.extend(Metric::ALL.into_iter().filter(|m| *m != first));
            let search = ChiSearch::default();
            let reopt = cfg.bool_or("reoptimize", false).then_some(&search);
            let table = scan_1d(
                &chain,
                &ctrl,
                parameter,
                &xs,
                &metrics,
                &Evaluator::new(cfg.initial()),
                reopt,
                &Rayon,
            )?;
            let mut header = vec![parameter.name().to_string(), "chi".into()];
            header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
            let mut t = Table::new(header);
            for row in &table.rows {
                if let Some(e) = &row.error {
                    out.flagged.push(format!("{} = {}: {e}", parameter.name(), fmt_float(row.x)));
                }
                let mut cells = vec![row.x, row.chi];
                for m in Metric::ALL {
                    let k = metrics.iter().position(|x| *x == m).expect("all metrics requested");
                    cells.push(row.values[k]);
                }
                t.push_floats(cells);
            }
            out.files.push((out_path, t));
        }
        Command::CriticalJ => {
            let ctrl = cfg.control()?;
            let metric = cfg.metric_or(Metric::StoredEnergy);
            let search = CriticalSearch {
                j_lo: cfg.f64_or("j_lo", 0.5),
                j_hi: cfg.f64_or("j_hi", 5.0),
                ..CriticalSearch::default()
            };
            let jc = find_critical_j(&chain, &ctrl, metric, &Evaluator::new(cfg.initial()), &search, &Rayon)?;
            let mut t = Table::new(["metric", "eta", "j_c"]);
            t.push(vec![metric.name().into(), fmt_float(ctrl.efficiency()), fmt_float(jc)]);
            out.files.push((out_path, t));
        }
    }
    Ok(out)
}
