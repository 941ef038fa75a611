//! Command-line parsing and the run driver.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, CliError, Command};
use crate::config::{parse_config, RunConfig};
use crate::output::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "qbatt", version, about = "Spin-chain quantum battery with measurement-based feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Spectrum of the battery Hamiltonian.
    Hamiltonian(Flags),
    /// Deterministic evolution of the averaged state.
    Evolve(Flags),
    /// Steady state and its figures of merit.
    Steady(Flags),
    /// Ensemble of stochastic trajectories.
    Traj(Flags),
    /// Metric over an (alpha, chi) grid.
    Sweep(Flags),
    /// One-parameter scan of all metrics.
    Scan(Flags),
    /// Critical coupling where feedback stops helping.
    #[command(name = "critical-j")]
    CriticalJ(Flags),
}

impl Sub {
    fn split(&self) -> (Command, &Flags) {
        match self {
            Sub::Hamiltonian(f) => (Command::Hamiltonian, f),
            Sub::Evolve(f) => (Command::Evolve, f),
            Sub::Steady(f) => (Command::Steady, f),
            Sub::Traj(f) => (Command::Traj, f),
            Sub::Sweep(f) => (Command::Sweep, f),
            Sub::Scan(f) => (Command::Scan, f),
            Sub::CriticalJ(f) => (Command::CriticalJ, f),
        }
    }
}

/// Flags shared by every subcommand; each overrides the config key of the
/// same name.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "n", allow_hyphen_values = true)]
    pub n_sites: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub chi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub decay: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta_c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta_d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub n_t: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_final: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub output_interval: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub num: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// stored_energy, ergotropy, utilization, ratio or rho11.
    #[arg(long)]
    pub metric: Option<String>,
    /// ground or all_down.
    #[arg(long)]
    pub initial: Option<String>,
    /// j, gamma, n_t, decay or eta.
    #[arg(long)]
    pub parameter: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub count: Option<String>,
    #[arg(long)]
    pub reoptimize: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_count: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub chi_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub chi_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub chi_count: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub j_lo: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub j_hi: Option<String>,
    /// Output CSV path; the manifest goes next to it.
    #[arg(long = "out")]
    pub output: Option<String>,
}

impl Flags {
    fn overrides(&self) -> [(&'static str, &Option<String>); 34] {
        [
            ("n_sites", &self.n_sites),
            ("h", &self.h),
            ("j", &self.j),
            ("gamma", &self.gamma),
            ("delta", &self.delta),
            ("f", &self.f),
            ("chi", &self.chi),
            ("alpha", &self.alpha),
            ("decay", &self.decay),
            ("eta", &self.eta),
            ("eta_c", &self.eta_c),
            ("eta_d", &self.eta_d),
            ("n_t", &self.n_t),
            ("t_final", &self.t_final),
            ("dt", &self.dt),
            ("output_interval", &self.output_interval),
            ("num", &self.num),
            ("seed", &self.seed),
            ("metric", &self.metric),
            ("initial", &self.initial),
            ("parameter", &self.parameter),
            ("from", &self.from),
            ("to", &self.to),
            ("count", &self.count),
            ("reoptimize", &self.reoptimize),
            ("alpha_min", &self.alpha_min),
            ("alpha_max", &self.alpha_max),
            ("alpha_count", &self.alpha_count),
            ("chi_min", &self.chi_min),
            ("chi_max", &self.chi_max),
            ("chi_count", &self.chi_count),
            ("j_lo", &self.j_lo),
            ("j_hi", &self.j_hi),
            ("output", &self.output),
        ]
    }

    /// Config file merged with flag overrides.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => RunConfig::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

/// Parses `args`, runs the command and writes outputs and the manifest.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (command, flags) = cli.command.split();
    let mut cfg = flags.load()?;
    commands::resolve(command, &mut cfg)?;
    let start = Instant::now();
    let out = commands::run(command, &cfg)?;
    let duration = start.elapsed();
    let mut paths = Vec::new();
    for (path, table) in &out.files {
        table
            .write(path)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        paths.push(path.clone());
    }
    let primary = paths.last().cloned().unwrap_or_default();
    let manifest_path = PathBuf::from(format!("{}.manifest", primary.display()));
    let manifest = RunManifest {
        command: command.name(),
        config: &cfg,
        seed: (command == Command::Traj).then(|| cfg.u64_or("seed", 0)),
        duration,
        outputs: &paths,
    };
    manifest
        .write(&manifest_path)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", manifest_path.display())))?;
    for path in &paths {
        println!("wrote {}", path.display());
    }
    if !out.flagged.is_empty() {
        for f in &out.flagged {
            eprintln!("failed: {f}");
        }
        return Err(CliError::Numerical(format!(
            "{} point(s) failed; partial results written",
            out.flagged.len()
        )));
    }
    Ok(())
}
