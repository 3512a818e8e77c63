//! Command-line front end: configuration parsing, command dispatch, CSV output.
//!
//! Configuration is a flat `key=value` file with `#` comments. Every
//! dimensioned key carries its unit in the name (`geometry.d_um`,
//! `patch.sigma_l_mV`); a few keys accept alternative units
//! (`geometry.d_nm`). Sweep bounds carry the unit in the value instead,
//! because it depends on the swept variable (`sweep.from=10um`).

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chameleon::MassModel;
use crate::experiment::{
    figure_dataset, oracle_table, point_table, sensitivity_table, sweep_table, Cell,
    ExperimentConfig, ExperimentError, Figure, Include, Spacing, SweepVariable, Table,
};
use crate::numerics::QuadratureMethod;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Where a configuration entry came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => write!(f, "--set"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax,
    UnknownKey { suggestions: Vec<String> },
    MissingUnit { expected: Vec<String> },
    Duplicate,
    InvalidValue,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", self.render())]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub key: String,
    pub kind: ConfigErrorKind,
    pub message: String,
}

impl ConfigError {
    fn render(&self) -> String {
        let mut s = String::new();
        if let Some(o) = &self.origin {
            let _ = write!(s, "{o}: ");
        }
        if !self.key.is_empty() {
            let _ = write!(s, "`{}`: ", self.key);
        }
        s.push_str(&self.message);
        match &self.kind {
            ConfigErrorKind::UnknownKey { suggestions } if !suggestions.is_empty() => {
                let _ = write!(s, " (did you mean {}?)", suggestions.join(", "));
            }
            ConfigErrorKind::MissingUnit { expected } => {
                let _ = write!(s, " (use {})", expected.join(" or "));
            }
            _ => {}
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    /// Dimensionless or text.
    Bare,
    /// A single accepted unit suffix.
    Fixed(&'static str),
    /// Canonical μm.
    Length,
    /// Canonical mV.
    Voltage,
}

const LENGTH_UNITS: &[(&str, f64)] = &[("um", 1.0), ("nm", 1e-3), ("mm", 1e3), ("m", 1e6)];
const VOLTAGE_UNITS: &[(&str, f64)] = &[("mV", 1.0), ("uV", 1e-3), ("V", 1e3)];

impl Family {
    fn units(self) -> Vec<(&'static str, f64)> {
        match self {
            Family::Bare => vec![],
            Family::Fixed(u) => vec![(u, 1.0)],
            Family::Length => LENGTH_UNITS.to_vec(),
            Family::Voltage => VOLTAGE_UNITS.to_vec(),
        }
    }
}

type Setter = fn(&mut ExperimentConfig, &str, f64) -> Result<(), String>;
type Getter = fn(&ExperimentConfig) -> String;

struct Entry {
    stem: &'static str,
    family: Family,
    set: Setter,
    get: Getter,
}

impl Entry {
    fn canonical(&self) -> String {
        match self.family.units().first() {
            Some((u, _)) => format!("{}_{}", self.stem, u),
            None => self.stem.to_string(),
        }
    }
}

/// Shortest text that parses back to the same value.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_list<T: Copy>(xs: &[T], f: impl Fn(T) -> String) -> String {
    xs.iter().map(|&x| f(x)).collect::<Vec<_>>().join(",")
}

fn num(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number, got {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got {s:?}"))
    }
}

fn positive(s: &str, factor: f64) -> Result<f64, String> {
    let v = num(s)? * factor;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {s}"))
    }
}

fn non_negative(s: &str, factor: f64) -> Result<f64, String> {
    let v = num(s)? * factor;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be ≥ 0, got {s}"))
    }
}

fn count(s: &str, min: usize) -> Result<usize, String> {
    let v: usize = s
        .parse()
        .map_err(|_| format!("expected a whole number, got {s:?}"))?;
    if v >= min {
        Ok(v)
    } else {
        Err(format!("must be ≥ {min}, got {v}"))
    }
}

fn exponent_n(s: &str) -> Result<u32, String> {
    let v: i64 = s
        .parse()
        .map_err(|_| format!("expected an integer, got {s:?}"))?;
    if v < 1 {
        return Err("n must be ≥ 1".into());
    }
    u32::try_from(v).map_err(|_| format!("n too large: {v}"))
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = s
        .split(',')
        .map(|x| f(x.trim()))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        Err("list must not be empty".into())
    } else {
        Ok(items)
    }
}

fn entries() -> Vec<Entry> {
    use Family::*;
    macro_rules! e {
        ($stem:expr, $fam:expr, |$c:ident, $v:ident, $f:ident| $set:expr, |$g:ident| $get:expr) => {
            Entry {
                stem: $stem,
                family: $fam,
                set: |$c, $v, $f| {
                    let _ = (&$c, $v, $f);
                    $set;
                    Ok(())
                },
                get: |$g| $get,
            }
        };
    }
    vec![
        e!("model.n", Bare, |c, v, f| c.model.n = exponent_n(v)?, |c| c
            .model
            .n
            .to_string()),
        e!(
            "model.beta",
            Bare,
            |c, v, f| c.model.beta = positive(v, 1.0)?,
            |c| fmt_num(c.model.beta)
        ),
        e!(
            "model.lambda",
            Fixed("GeV"),
            |c, v, f| c.model.lambda_gev = positive(v, f)?,
            |c| fmt_num(c.model.lambda_gev)
        ),
        e!(
            "model.m_pl",
            Fixed("GeV"),
            |c, v, f| c.model.m_pl_gev = positive(v, f)?,
            |c| fmt_num(c.model.m_pl_gev)
        ),
        e!(
            "model.mass",
            Bare,
            |c, v, f| c.model.mass_model = match v {
                "full" => MassModel::Full,
                "linearized" => MassModel::Linearized,
                _ => return Err(format!("expected full or linearized, got {v:?}")),
            },
            |c| match c.model.mass_model {
                MassModel::Full => "full".into(),
                MassModel::Linearized => "linearized".into(),
            }
        ),
        e!(
            "model.algebraic_below_mbd",
            Bare,
            |c, v, f| c.model.thresholds.algebraic_below = positive(v, 1.0)?,
            |c| fmt_num(c.model.thresholds.algebraic_below)
        ),
        e!(
            "model.screened_above_mbd",
            Bare,
            |c, v, f| c.model.thresholds.screened_above = positive(v, 1.0)?,
            |c| fmt_num(c.model.thresholds.screened_above)
        ),
        e!(
            "model.plate_density",
            Fixed("g_per_l"),
            |c, v, f| c.model.plate_density_g_per_l = if v == "none" {
                None
            } else {
                Some(positive(v, f)?)
            },
            |c| c.model.plate_density_g_per_l.map_or("none".into(), fmt_num)
        ),
        e!(
            "gas.name",
            Bare,
            |c, v, f| c.gas.name = if v.is_empty() || v.contains(',') {
                return Err("gas name must be non-empty and contain no commas".into());
            } else {
                v.to_string()
            },
            |c| c.gas.name.clone()
        ),
        e!(
            "gas.density_coeff",
            Fixed("g_per_l_per_atm"),
            |c, v, f| c.gas.density_coeff = positive(v, f)?,
            |c| fmt_num(c.gas.density_coeff)
        ),
        e!(
            "gas.polarizability",
            Fixed("F_m2"),
            |c, v, f| c.gas.polarizability = positive(v, f)?,
            |c| fmt_num(c.gas.polarizability)
        ),
        e!(
            "gas.temperature",
            Fixed("K"),
            |c, v, f| c.gas.temperature = positive(v, f)?,
            |c| fmt_num(c.gas.temperature)
        ),
        e!(
            "patch.sigma_l",
            Voltage,
            |c, v, f| c.patch.sigma_l_mv = non_negative(v, f)?,
            |c| fmt_num(c.patch.sigma_l_mv)
        ),
        e!(
            "patch.sigma_s",
            Voltage,
            |c, v, f| c.patch.sigma_s_mv = non_negative(v, f)?,
            |c| fmt_num(c.patch.sigma_s_mv)
        ),
        e!(
            "patch.lambda_min",
            Length,
            |c, v, f| c.patch.lambda_min_um = positive(v, f)?,
            |c| fmt_num(c.patch.lambda_min_um)
        ),
        e!(
            "patch.lambda_max",
            Length,
            |c, v, f| c.patch.lambda_max_um = positive(v, f)?,
            |c| fmt_num(c.patch.lambda_max_um)
        ),
        e!(
            "geometry.d",
            Length,
            |c, v, f| c.d_um = positive(v, f)?,
            |c| fmt_num(c.d_um)
        ),
        e!(
            "geometry.pressure",
            Fixed("atm"),
            |c, v, f| c.pressure_atm = non_negative(v, f)?,
            |c| fmt_num(c.pressure_atm)
        ),
        e!(
            "sweep.variable",
            Bare,
            |c, v, f| c.sweep.variable = match v {
                "d" => SweepVariable::D,
                "P" => SweepVariable::P,
                "beta_rho" => SweepVariable::BetaRho,
                _ => return Err(format!("expected d, P or beta_rho, got {v:?}")),
            },
            |c| c.sweep.variable.as_str().into()
        ),
        // Bounds are resolved after all keys are read; see `resolve_sweep_bound`.
        e!("sweep.from", Bare, |c, v, f| {}, |c| format!(
            "{}{}",
            fmt_num(c.sweep.from),
            sweep_unit(c.sweep.variable)
        )),
        e!("sweep.to", Bare, |c, v, f| {}, |c| format!(
            "{}{}",
            fmt_num(c.sweep.to),
            sweep_unit(c.sweep.variable)
        )),
        e!(
            "sweep.points",
            Bare,
            |c, v, f| c.sweep.points = count(v, 2)?,
            |c| c.sweep.points.to_string()
        ),
        e!(
            "sweep.spacing",
            Bare,
            |c, v, f| c.sweep.spacing = match v {
                "linear" => Spacing::Linear,
                "log" => Spacing::Log,
                _ => return Err(format!("expected linear or log, got {v:?}")),
            },
            |c| match c.sweep.spacing {
                Spacing::Linear => "linear".into(),
                Spacing::Log => "log".into(),
            }
        ),
        e!(
            "include",
            Bare,
            |c, v, f| c.include = parse_include(v)?,
            |c| {
                let mut parts = Vec::new();
                if c.include.chameleon {
                    parts.push("chameleon");
                }
                if c.include.casimir {
                    parts.push("casimir");
                }
                if c.include.electrostatic {
                    parts.push("electrostatic");
                }
                parts.join(",")
            }
        ),
        e!(
            "figure.fig1_d_from",
            Length,
            |c, v, f| c.figures.fig1_d_from_um = positive(v, f)?,
            |c| fmt_num(c.figures.fig1_d_from_um)
        ),
        e!(
            "figure.fig1_d_to",
            Length,
            |c, v, f| c.figures.fig1_d_to_um = positive(v, f)?,
            |c| fmt_num(c.figures.fig1_d_to_um)
        ),
        e!(
            "figure.fig1_points",
            Bare,
            |c, v, f| c.figures.fig1_points = count(v, 2)?,
            |c| c.figures.fig1_points.to_string()
        ),
        e!(
            "figure.fig1_rho",
            Fixed("g_per_l"),
            |c, v, f| c.figures.fig1_rho_g_per_l = positive(v, f)?,
            |c| fmt_num(c.figures.fig1_rho_g_per_l)
        ),
        e!(
            "figure.fig1_beta_rho",
            Fixed("g_per_l"),
            |c, v, f| c.figures.fig1_beta_rho_g_per_l = list(v, |x| positive(x, f))?,
            |c| fmt_list(&c.figures.fig1_beta_rho_g_per_l, fmt_num)
        ),
        e!(
            "figure.fig2_d",
            Length,
            |c, v, f| c.figures.fig2_d_um = positive(v, f)?,
            |c| fmt_num(c.figures.fig2_d_um)
        ),
        e!(
            "figure.fig2_beta_rho_from",
            Fixed("g_per_l"),
            |c, v, f| c.figures.fig2_beta_rho_from_g_per_l = positive(v, f)?,
            |c| fmt_num(c.figures.fig2_beta_rho_from_g_per_l)
        ),
        e!(
            "figure.fig2_beta_rho_to",
            Fixed("g_per_l"),
            |c, v, f| c.figures.fig2_beta_rho_to_g_per_l = positive(v, f)?,
            |c| fmt_num(c.figures.fig2_beta_rho_to_g_per_l)
        ),
        e!(
            "figure.fig2_points",
            Bare,
            |c, v, f| c.figures.fig2_points = count(v, 2)?,
            |c| c.figures.fig2_points.to_string()
        ),
        e!(
            "figure.fig2_n",
            Bare,
            |c, v, f| c.figures.fig2_n = list(v, exponent_n)?,
            |c| fmt_list(&c.figures.fig2_n, |n| n.to_string())
        ),
        e!(
            "figure.fig34_d",
            Length,
            |c, v, f| c.figures.fig34_d_um = positive(v, f)?,
            |c| fmt_num(c.figures.fig34_d_um)
        ),
        e!(
            "figure.fig34_p_to",
            Fixed("atm"),
            |c, v, f| c.figures.fig34_p_to_atm = positive(v, f)?,
            |c| fmt_num(c.figures.fig34_p_to_atm)
        ),
        e!(
            "figure.fig34_points",
            Bare,
            |c, v, f| c.figures.fig34_points = count(v, 2)?,
            |c| c.figures.fig34_points.to_string()
        ),
        e!(
            "figure.fig34_beta",
            Bare,
            |c, v, f| c.figures.fig34_beta = list(v, |x| positive(x, 1.0))?,
            |c| fmt_list(&c.figures.fig34_beta, fmt_num)
        ),
        e!(
            "oracle.rho",
            Fixed("g_per_l"),
            |c, v, f| c.oracle.rho_g_per_l = positive(v, f)?,
            |c| fmt_num(c.oracle.rho_g_per_l)
        ),
        e!(
            "oracle.n",
            Bare,
            |c, v, f| c.oracle.n = list(v, exponent_n)?,
            |c| fmt_list(&c.oracle.n, |n| n.to_string())
        ),
        e!(
            "oracle.z",
            Bare,
            |c, v, f| c.oracle.z = list(v, |x| {
                let z = num(x)?;
                if z > 0.0 && z < 1.0 {
                    Ok(z)
                } else {
                    Err(format!("z must lie in (0, 1), got {x}"))
                }
            })?,
            |c| fmt_list(&c.oracle.z, fmt_num)
        ),
        e!(
            "sensitivity.target",
            Fixed("pN_per_cm2"),
            |c, v, f| c.sensitivity_target_pn_per_cm2 = positive(v, f)?,
            |c| fmt_num(c.sensitivity_target_pn_per_cm2)
        ),
        e!(
            "quadrature.method",
            Bare,
            |c, v, f| c.quadrature.method = match v {
                "double_exponential" => QuadratureMethod::DoubleExponential,
                "adaptive_subdivision" => QuadratureMethod::AdaptiveSubdivision,
                _ =>
                    return Err(format!(
                        "expected double_exponential or adaptive_subdivision, got {v:?}"
                    )),
            },
            |c| match c.quadrature.method {
                QuadratureMethod::DoubleExponential => "double_exponential".into(),
                QuadratureMethod::AdaptiveSubdivision => "adaptive_subdivision".into(),
            }
        ),
        e!(
            "quadrature.rel_tol",
            Bare,
            |c, v, f| c.quadrature.rel_tol = {
                let t = positive(v, 1.0)?;
                if t < 1e-13 {
                    return Err(format!("must be ≥ 1e-13, got {v}"));
                }
                t
            },
            |c| fmt_num(c.quadrature.rel_tol)
        ),
        e!(
            "quadrature.max_levels",
            Bare,
            |c, v, f| c.quadrature.max_levels = {
                let l = count(v, 1)?;
                if l > 14 {
                    return Err(format!("must be ≤ 14, got {l}"));
                }
                l as u32
            },
            |c| c.quadrature.max_levels.to_string()
        ),
    ]
}

fn parse_include(v: &str) -> Result<Include, String> {
    let mut inc = Include {
        chameleon: false,
        casimir: false,
        electrostatic: false,
    };
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "chameleon" => inc.chameleon = true,
            "casimir" => inc.casimir = true,
            "electrostatic" => inc.electrostatic = true,
            _ => {
                return Err(format!(
                    "unknown component {part:?} (chameleon, casimir, electrostatic)"
                ))
            }
        }
    }
    if inc.is_empty() {
        return Err("include must name at least one component".into());
    }
    Ok(inc)
}

fn sweep_unit(v: SweepVariable) -> &'static str {
    match v {
        SweepVariable::D => "um",
        SweepVariable::P => "atm",
        SweepVariable::BetaRho => "g_per_l",
    }
}

fn sweep_units(v: SweepVariable) -> Vec<(&'static str, f64)> {
    match v {
        SweepVariable::D => LENGTH_UNITS.to_vec(),
        SweepVariable::P => vec![("atm", 1.0)],
        SweepVariable::BetaRho => vec![("g_per_l", 1.0)],
    }
}

fn resolve_sweep_bound(
    variable: SweepVariable,
    raw: &str,
) -> Result<f64, (ConfigErrorKind, String)> {
    let split = raw
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(raw.len());
    let (number, unit) = raw.split_at(split);
    let units = sweep_units(variable);
    if unit.is_empty() {
        return Err((
            ConfigErrorKind::MissingUnit {
                expected: units.iter().map(|(u, _)| format!("{raw}{u}")).collect(),
            },
            format!(
                "missing unit suffix for a {} sweep bound",
                variable.as_str()
            ),
        ));
    }
    let Some(&(_, factor)) = units.iter().find(|(u, _)| *u == unit) else {
        return Err((
            ConfigErrorKind::InvalidValue,
            format!(
                "unit {unit:?} does not fit a {} sweep (expected {})",
                variable.as_str(),
                units.iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
            ),
        ));
    };
    non_negative(number.trim(), factor).map_err(|m| (ConfigErrorKind::OutOfRange, m))
}

/// A config line before it is applied.
struct Assignment {
    origin: Origin,
    key: String,
    value: String,
}

fn lex(text: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let origin = Origin::Line(i + 1);
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError {
                origin: Some(origin),
                key: String::new(),
                kind: ConfigErrorKind::Syntax,
                message: format!("expected key=value, got {line:?}"),
            });
        };
        out.push(Assignment {
            origin,
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn parse_override(s: &str) -> Result<Assignment, ConfigError> {
    match s.split_once('=') {
        Some((k, v)) => Ok(Assignment {
            origin: Origin::Override,
            key: k.trim().into(),
            value: v.trim().into(),
        }),
        None => Err(ConfigError {
            origin: Some(Origin::Override),
            key: s.into(),
            kind: ConfigErrorKind::Syntax,
            message: "expected key=value".into(),
        }),
    }
}

fn suggestions(key: &str, table: &[Entry]) -> Vec<String> {
    let mut scored: Vec<(f64, String)> = table
        .iter()
        .map(|e| {
            let c = e.canonical();
            (strsim::jaro_winkler(key, &c), c)
        })
        .filter(|(s, _)| *s > 0.8)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(3).map(|(_, c)| c).collect()
}

/// Finds the entry for `key` and the factor to its canonical unit.
fn lookup(key: &str, table: &[Entry]) -> Result<(usize, f64), (ConfigErrorKind, String)> {
    for (i, e) in table.iter().enumerate() {
        if e.stem == key {
            if e.family == Family::Bare {
                return Ok((i, 1.0));
            }
            let expected = e
                .family
                .units()
                .iter()
                .map(|(u, _)| format!("{}_{}", e.stem, u))
                .collect();
            return Err((
                ConfigErrorKind::MissingUnit { expected },
                "missing unit suffix".into(),
            ));
        }
        if let Some(unit) = key.strip_prefix(e.stem).and_then(|r| r.strip_prefix('_')) {
            if let Some(&(_, factor)) = e.family.units().iter().find(|(u, _)| *u == unit) {
                return Ok((i, factor));
            }
        }
    }
    Err((
        ConfigErrorKind::UnknownKey {
            suggestions: suggestions(key, table),
        },
        "unknown key".into(),
    ))
}

fn apply(config: &mut ExperimentConfig, assignments: &[Assignment]) -> Result<(), ConfigError> {
    let table = entries();
    let mut seen: Vec<Option<Origin>> = vec![None; table.len()];
    let mut from_raw: Option<(&Assignment, String)> = None;
    let mut to_raw: Option<(&Assignment, String)> = None;
    for a in assignments {
        let err = |kind, message| ConfigError {
            origin: Some(a.origin.clone()),
            key: a.key.clone(),
            kind,
            message,
        };
        let (i, factor) = lookup(&a.key, &table).map_err(|(k, m)| err(k, m))?;
        if let (Some(Origin::Line(prev)), Origin::Line(_)) = (&seen[i], &a.origin) {
            return Err(err(
                ConfigErrorKind::Duplicate,
                format!("already set on line {prev}"),
            ));
        }
        seen[i] = Some(a.origin.clone());
        match table[i].stem {
            "sweep.from" => from_raw = Some((a, a.value.clone())),
            "sweep.to" => to_raw = Some((a, a.value.clone())),
            _ => (table[i].set)(config, &a.value, factor).map_err(|m| {
                let kind = if m.starts_with("expected") {
                    ConfigErrorKind::InvalidValue
                } else {
                    ConfigErrorKind::OutOfRange
                };
                err(kind, m)
            })?,
        }
    }
    for (slot, raw) in [
        (&mut config.sweep.from, from_raw),
        (&mut config.sweep.to, to_raw),
    ] {
        if let Some((a, value)) = raw {
            *slot =
                resolve_sweep_bound(config.sweep.variable, &value).map_err(|(kind, message)| {
                    ConfigError {
                        origin: Some(a.origin.clone()),
                        key: a.key.clone(),
                        kind,
                        message,
                    }
                })?;
        }
    }
    Ok(())
}

fn whole_config_error(e: ExperimentError) -> ConfigError {
    let message = e.to_string();
    let key = [
        ("sweep", "sweep.from"),
        ("λ_min", "patch.lambda_min_um"),
        ("include", "include"),
        ("separation", "geometry.d_um"),
        ("figure", "figure"),
    ]
    .iter()
    .find(|(needle, _)| message.contains(needle))
    .map_or(String::new(), |(_, k)| k.to_string());
    ConfigError {
        origin: None,
        key,
        kind: ConfigErrorKind::OutOfRange,
        message,
    }
}

/// Parses a configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut assignments = lex(text)?;
    for o in overrides {
        assignments.push(parse_override(o)?);
    }
    let mut config = ExperimentConfig::default();
    apply(&mut config, &assignments)?;
    config.validate().map_err(whole_config_error)?;
    Ok(config)
}

/// Fully resolved configuration as canonical `key=value` lines.
pub fn render_config(config: &ExperimentConfig) -> Vec<String> {
    entries()
        .iter()
        .map(|e| format!("{}={}", e.canonical(), (e.get)(config)))
        .collect()
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    for line in render_config(config) {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_field(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => format!("{v:.16e}"),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => csv_text(s),
        Cell::Empty => String::new(),
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Metadata preamble, echoed configuration, header and rows.
pub fn render_csv(command: &str, config: &ExperimentConfig, table: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} {}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(out, "# command={command}");
    let _ = writeln!(out, "# config_sha256={}", config_hash(config));
    let t = config.model.thresholds;
    let _ = writeln!(
        out,
        "# regime_algebraic_below_mbd={}",
        fmt_num(t.algebraic_below)
    );
    let _ = writeln!(
        out,
        "# regime_screened_above_mbd={}",
        fmt_num(t.screened_above)
    );
    for (k, v) in &table.notes {
        let _ = writeln!(out, "# {k}={v}");
    }
    for line in render_config(config) {
        let _ = writeln!(out, "#= {line}");
    }
    let header: Vec<String> = table.columns.iter().map(|c| csv_text(c)).collect();
    out.push_str(&header.join(","));
    out.push_str("\r\n");
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(csv_field).collect();
        out.push_str(&fields.join(","));
        out.push_str("\r\n");
    }
    out
}

/// Companion gnuplot script for a CSV written to `data_path`.
pub fn plot_script(figure: Option<Figure>, table: &Table, data_path: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(
        s,
        "set xlabel '{}'",
        table.columns.first().map_or("", String::as_str)
    );
    match figure {
        Some(Figure::Fig1) => {
            let _ = writeln!(s, "set logscale xy");
        }
        Some(Figure::Fig2) => {
            let _ = writeln!(s, "set logscale x");
        }
        _ => {}
    }
    let numeric: Vec<usize> = (1..table.columns.len())
        .filter(|&i| {
            table
                .rows
                .first()
                .is_some_and(|r| matches!(r[i], Cell::Num(_)))
        })
        .collect();
    let plots: Vec<String> = numeric
        .iter()
        .map(|i| format!("'{}' using 1:{} with linespoints", data_path, i + 1))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

#[derive(Debug, Parser)]
#[command(
    name = "chameleon-casimir",
    version,
    about = "Chameleon, Casimir and patch pressures between parallel plates"
)]
pub struct Cli {
    /// Configuration file (flat key=value).
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output file; standard output when omitted.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot script for the output.
    #[arg(long, value_name = "FILE", global = true)]
    pub plot_script: Option<PathBuf>,
    /// Worker threads for sweeps (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Pressures at the configured separation and gas pressure.
    Point,
    /// Pressures along the configured sweep.
    Sweep,
    /// Data behind one of the four figures.
    Figure {
        #[arg(value_parser = ["fig1", "fig2", "fig3", "fig4"])]
        which: String,
    },
    /// Parametric separation against direct quadrature.
    Oracle,
    /// Patch-potential and separation stability needed for a target resolution.
    Sensitivity,
    /// Print the resolved configuration.
    Config,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(#[from] ExperimentError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numerical(ExperimentError::Invalid(_)) => EXIT_CONFIG,
            RunError::Numerical(_) => EXIT_NUMERICAL,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let text = match &cli.config {
        Some(p) => {
            std::fs::read_to_string(p).map_err(io_err(format!("reading {}", p.display())))?
        }
        None => String::new(),
    };
    Ok(parse_config_with_overrides(&text, &cli.overrides)?)
}

fn warnings(config: &ExperimentConfig, table: &Table) -> Vec<String> {
    let mut w = Vec::new();
    let flag = |name: &str| {
        table
            .column_index(name)
            .is_some_and(|i| table.rows.iter().any(|r| r[i] == Cell::Int(1)))
    };
    if flag("linearization_warning") {
        w.push(
            "βφ_b/m_Pl exceeds 1e-2 at some points; the linearised coupling is questionable".into(),
        );
    }
    if flag("plate_warning") {
        w.push(
            "m_c d < 10 at some points; the φ = 0 plate boundary condition is questionable".into(),
        );
    }
    if config.pressure_atm > crate::background::GAS_VALIDITY_MAX_ATM {
        w.push("gas pressure above 1 atm is outside the ideal-gas window".into());
    }
    w
}

/// Runs one command and returns the CSV text.
pub fn execute(
    command: &Command,
    config: &ExperimentConfig,
) -> Result<(String, Table, Option<Figure>), RunError> {
    let (name, table, figure) = match command {
        Command::Point => ("point".to_string(), point_table(config)?, None),
        Command::Sweep => ("sweep".to_string(), sweep_table(config)?, None),
        Command::Figure { which } => {
            let fig = Figure::parse(which).expect("clap restricts the figure names");
            (
                format!("figure {which}"),
                figure_dataset(fig, config)?,
                Some(fig),
            )
        }
        Command::Oracle => ("oracle".to_string(), oracle_table(config)?, None),
        Command::Sensitivity => ("sensitivity".to_string(), sensitivity_table(config)?, None),
        Command::Config => {
            let t = Table {
                columns: vec![],
                rows: vec![],
                notes: vec![],
            };
            let mut s = String::new();
            for line in render_config(config) {
                let _ = writeln!(s, "{line}");
            }
            return Ok((s, t, None));
        }
    };
    Ok((render_csv(&name, config, &table), table, figure))
}

pub fn run(cli: &Cli) -> Result<(), RunError> {
    let config = load_config(cli)?;
    let work = || execute(&cli.command, &config);
    let (text, table, figure) = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| RunError::Io {
                context: "starting worker threads".into(),
                source: std::io::Error::other(e),
            })?
            .install(work)?,
        None => work()?,
    };
    for w in warnings(&config, &table) {
        eprintln!("warning: {w}");
    }
    match &cli.output {
        Some(p) => std::fs::write(p, &text).map_err(io_err(format!("writing {}", p.display())))?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(io_err("writing standard output"))?;
        }
    }
    if let Some(script) = &cli.plot_script {
        let data = cli
            .output
            .as_ref()
            .map_or("data.csv".to_string(), |p| p.display().to_string());
        std::fs::write(script, plot_script(figure, &table, &data))
            .map_err(io_err(format!("writing {}", script.display())))?;
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
