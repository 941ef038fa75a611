//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment (so the `#!` metadata lines
//! of a run manifest are ignored on input). Every value is checked when it
//! is read, and errors name the key and the line.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use qbatt_core::sweeps::{InitialState, Metric, ScanParameter};
use qbatt_core::{ChainSpec, ControlSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{}unknown key `{key}`", at(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("{}key `{key}` given twice", at(*.line))]
    Duplicate { key: String, line: Option<usize> },
    #[error("{}key `{key}`: {reason}", at(*.line))]
    Invalid {
        key: String,
        line: Option<usize>,
        reason: String,
    },
    #[error("missing required key `{key}`")]
    Missing { key: &'static str },
    #[error("{0}")]
    Inconsistent(String),
}

fn at(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => "command line: ".into(),
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Sites,
    Positive,
    NonNegative,
    Unit,
    OpenUnit,
    Real,
    Angle,
    Count,
    Seed,
    Bool,
    Metric,
    Initial,
    Parameter,
    Path,
}

const KEYS: &[(&str, Kind)] = &[
    ("n_sites", Kind::Sites),
    ("h", Kind::Positive),
    ("j", Kind::NonNegative),
    ("gamma", Kind::Unit),
    ("delta", Kind::Real),
    ("f", Kind::Real),
    ("chi", Kind::Real),
    ("alpha", Kind::Angle),
    ("decay", Kind::Positive),
    ("eta", Kind::OpenUnit),
    ("eta_c", Kind::Unit),
    ("eta_d", Kind::OpenUnit),
    ("n_t", Kind::NonNegative),
    ("initial", Kind::Initial),
    ("t_final", Kind::NonNegative),
    ("dt", Kind::Positive),
    ("output_interval", Kind::Positive),
    ("num", Kind::Count),
    ("seed", Kind::Seed),
    ("metric", Kind::Metric),
    ("alpha_min", Kind::Angle),
    ("alpha_max", Kind::Angle),
    ("alpha_count", Kind::Count),
    ("chi_min", Kind::Real),
    ("chi_max", Kind::Real),
    ("chi_count", Kind::Count),
    ("parameter", Kind::Parameter),
    ("from", Kind::Real),
    ("to", Kind::Real),
    ("count", Kind::Count),
    ("reoptimize", Kind::Bool),
    ("j_lo", Kind::NonNegative),
    ("j_hi", Kind::NonNegative),
    ("output", Kind::Path),
];

/// Parses an angle in radians; `pi` and `-pi` are accepted literally.
pub fn parse_angle(s: &str) -> Option<f64> {
    match s.trim() {
        "pi" => Some(PI),
        "-pi" => Some(-PI),
        t => t.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

fn check(kind: Kind, raw: &str) -> Result<String, String> {
    let num = |ok: fn(f64) -> bool, range: &str| -> Result<String, String> {
        let x: f64 = raw.parse().map_err(|_| format!("`{raw}` is not a number"))?;
        if !x.is_finite() || !ok(x) {
            return Err(format!("{raw} is out of range ({range})"));
        }
        Ok(raw.to_string())
    };
    match kind {
        Kind::Sites => match raw.parse::<usize>() {
            Ok(n) if (1..=qbatt_core::operators::MAX_SITES).contains(&n) => Ok(raw.into()),
            Ok(_) => Err(format!("{raw} is out of range (1..={})", qbatt_core::operators::MAX_SITES)),
            Err(_) => Err(format!("`{raw}` is not a whole number")),
        },
        Kind::Positive => num(|x| x > 0.0, "> 0"),
        Kind::NonNegative => num(|x| x >= 0.0, ">= 0"),
        Kind::Unit => num(|x| (0.0..=1.0).contains(&x), "0 <= x <= 1"),
        Kind::OpenUnit => num(|x| x > 0.0 && x <= 1.0, "0 < x <= 1"),
        Kind::Real => num(|_| true, "finite"),
        Kind::Angle => parse_angle(raw)
            .map(|_| raw.to_string())
            .ok_or_else(|| format!("`{raw}` is not an angle in radians (or pi, -pi)")),
        Kind::Count => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(raw.into()),
            _ => Err(format!("`{raw}` is not a positive whole number")),
        },
        Kind::Seed => raw
            .parse::<u64>()
            .map(|_| raw.to_string())
            .map_err(|_| format!("`{raw}` is not an unsigned 64-bit integer")),
        Kind::Bool => match raw {
            "true" | "false" => Ok(raw.into()),
            _ => Err(format!("`{raw}` is not true or false")),
        },
        Kind::Metric => Metric::from_name(raw)
            .map(|_| raw.to_string())
            .ok_or_else(|| format!("`{raw}` is not one of stored_energy, ergotropy, utilization, ratio, rho11")),
        Kind::Initial => match raw {
            "ground" | "all_down" => Ok(raw.into()),
            _ => Err(format!("`{raw}` is not ground or all_down")),
        },
        Kind::Parameter => ScanParameter::from_name(raw)
            .map(|_| raw.to_string())
            .ok_or_else(|| format!("`{raw}` is not one of j, gamma, n_t, decay, eta")),
        Kind::Path => {
            if raw.is_empty() {
                Err("empty path".into())
            } else {
                Ok(raw.into())
            }
        }
    }
}

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

/// Validated raw values keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (n, raw_line) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if cfg.values.contains_key(key) {
            return Err(ConfigError::Duplicate {
                key: key.into(),
                line: Some(line),
            });
        }
        cfg.insert(key, value, Some(line))?;
    }
    Ok(cfg)
}

impl RunConfig {
    fn insert(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey { key: key.into(), line })?;
        let v = check(kind, value).map_err(|reason| ConfigError::Invalid {
            key: key.into(),
            line,
            reason,
        })?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    /// Sets a value from the command line, replacing any file value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.insert(key, value, None)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// All values in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).map_or(default, |v| {
            if matches!(kind_of(key), Some(Kind::Angle)) {
                parse_angle(v).expect("checked on insert")
            } else {
                v.parse().expect("checked on insert")
            }
        })
    }

    pub fn f64_required(&self, key: &'static str) -> Result<f64, ConfigError> {
        if !self.contains(key) {
            return Err(ConfigError::Missing { key });
        }
        Ok(self.f64_or(key, 0.0))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> usize {
        self.get(key).map_or(default, |v| v.parse().expect("checked on insert"))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> u64 {
        self.get(key).map_or(default, |v| v.parse().expect("checked on insert"))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> bool {
        self.get(key).map_or(default, |v| v == "true")
    }

    pub fn metric_or(&self, default: Metric) -> Metric {
        self.get("metric").and_then(Metric::from_name).unwrap_or(default)
    }

    pub fn initial(&self) -> InitialState {
        match self.get("initial") {
            Some("all_down") => InitialState::AllDown,
            _ => InitialState::Ground,
        }
    }

    /// Chain from `n_sites` (required), `h`, `j`, `gamma`, `delta`.
    pub fn chain(&self) -> Result<ChainSpec, ConfigError> {
        let n = self.get("n_sites").ok_or(ConfigError::Missing { key: "n_sites" })?;
        let chain = ChainSpec {
            n_sites: n.parse().expect("checked on insert"),
            field: self.f64_or("h", 1.0),
            coupling: self.f64_or("j", 1.0),
            gamma: self.f64_or("gamma", 0.0),
            delta: self.f64_or("delta", 1.0),
        };
        chain.validate().map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        Ok(chain)
    }

    /// Control from `f` or `chi` (one required), `alpha`, `decay` and the
    /// efficiencies. With only `eta`, `η_c = 1`; `η = η_c η_d` is enforced
    /// when all three are given.
    pub fn control(&self) -> Result<ControlSpec, ConfigError> {
        let decay = self.f64_or("decay", 1.0);
        let feedback = match (self.get("f"), self.get("chi")) {
            (Some(_), Some(_)) => return Err(ConfigError::Inconsistent("give either `f` or `chi`, not both".into())),
            (Some(_), None) => self.f64_or("f", 0.0),
            (None, Some(_)) => self.f64_or("chi", 0.0) * decay,
            (None, None) => return Err(ConfigError::Missing { key: "chi" }),
        };
        let eta = self.get("eta").map(|_| self.f64_or("eta", 1.0));
        let eta_c = self.get("eta_c").map(|_| self.f64_or("eta_c", 1.0));
        let eta_d = self.get("eta_d").map(|_| self.f64_or("eta_d", 1.0));
        let (collection, detector) = match (eta, eta_c, eta_d) {
            (Some(e), Some(c), Some(d)) => {
                if (e - c * d).abs() > 1e-12 {
                    return Err(ConfigError::Inconsistent(format!("eta = {e} differs from eta_c * eta_d = {}", c * d)));
                }
                (c, d)
            }
            (Some(e), Some(c), None) => {
                if c <= 0.0 || e / c > 1.0 {
                    return Err(ConfigError::Inconsistent(format!("eta = {e} is not reachable with eta_c = {c}")));
                }
                (c, e / c)
            }
            (Some(e), None, Some(d)) => {
                if e / d > 1.0 {
                    return Err(ConfigError::Inconsistent(format!("eta = {e} is not reachable with eta_d = {d}")));
                }
                (e / d, d)
            }
            (Some(e), None, None) => (1.0, e),
            (None, c, d) => (c.unwrap_or(1.0), d.unwrap_or(1.0)),
        };
        let ctrl = ControlSpec::new(feedback, self.f64_or("alpha", PI), decay, detector).with_thermal(
            self.f64_or("n_t", 0.0),
            collection,
            detector,
        );
        ctrl.validate().map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        Ok(ctrl)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
