//! Observables of the force-vs-density experiment.
//!
//! This is the only module that mixes the natural-unit chameleon sector with
//! the SI background sector. Settings are held in the units a user would type
//! them in (μm, atm, g/l, mV) and converted on each evaluation, so that a
//! configuration echoed back out reproduces exactly the same numbers.

use rayon::prelude::*;
use thiserror::Error;

use crate::background::{
    casimir_pressure, electrostatic_pressure_vacuum, gas_state, BackgroundError, GasSpec, GasState,
    PatchModel,
};
use crate::chameleon::{ChameleonError, ChameleonModel, MassModel, Regime, RegimeThresholds};
use crate::numerics::{try_find_root_bracketed, NumericsError, QuadratureSpec, RootSpec};
use crate::units::{Constants, UnitsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Chameleon(#[from] ChameleonError),
    #[error(transparent)]
    Background(#[from] BackgroundError),
    #[error(transparent)]
    Units(#[from] UnitsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("sweep point {index} ({variable} = {value:e}): {source}")]
    AtPoint {
        index: usize,
        variable: &'static str,
        value: f64,
        source: Box<ExperimentError>,
    },
}

type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    /// Separation, μm.
    D,
    /// Gas pressure, atm.
    P,
    /// βρ, g/l.
    BetaRho,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::D => "d",
            SweepVariable::P => "P",
            SweepVariable::BetaRho => "beta_rho",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::D => "d_um",
            SweepVariable::P => "P_atm",
            SweepVariable::BetaRho => "beta_rho_g_per_l",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            variable: SweepVariable::D,
            from: 10.0,
            to: 100.0,
            points: 19,
            spacing: Spacing::Log,
        }
    }
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(ExperimentError::Invalid(
                "sweep needs at least 2 points".into(),
            ));
        }
        let zero_ok = self.variable == SweepVariable::P && self.spacing == Spacing::Linear;
        let lower_ok = if zero_ok {
            self.from >= 0.0
        } else {
            self.from > 0.0
        };
        if !(lower_ok && self.to > 0.0 && self.from.is_finite() && self.to.is_finite()) {
            return Err(ExperimentError::Invalid(format!(
                "sweep bounds must be positive, got {} to {}",
                self.from, self.to
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        spaced(self.from, self.to, self.points, self.spacing)
    }
}

/// `points` values from `from` to `to` inclusive; endpoints are exact.
pub fn spaced(from: f64, to: f64, points: usize, spacing: Spacing) -> Vec<f64> {
    let last = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|i| {
            if i == 0 {
                from
            } else if i + 1 == points {
                to
            } else {
                let t = i as f64 / last;
                match spacing {
                    Spacing::Linear => from + (to - from) * t,
                    Spacing::Log => (from.ln() + (to.ln() - from.ln()) * t).exp(),
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Include {
    pub chameleon: bool,
    pub casimir: bool,
    pub electrostatic: bool,
}

impl Default for Include {
    fn default() -> Self {
        Self {
            chameleon: true,
            casimir: true,
            electrostatic: true,
        }
    }
}

impl Include {
    pub fn is_empty(&self) -> bool {
        !(self.chameleon || self.casimir || self.electrostatic)
    }
}

/// Chameleon theory settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub n: u32,
    pub beta: f64,
    pub lambda_gev: f64,
    pub m_pl_gev: f64,
    pub mass_model: MassModel,
    pub thresholds: RegimeThresholds,
    /// Plate density for the m_c d validity check, g/l.
    pub plate_density_g_per_l: Option<f64>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let k = Constants::default();
        Self {
            n: 4,
            beta: 1e4,
            lambda_gev: k.lambda_de,
            m_pl_gev: k.planck_mass_reduced,
            mass_model: MassModel::Full,
            thresholds: RegimeThresholds::default(),
            plate_density_g_per_l: None,
        }
    }
}

/// Patch settings in mV and μm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSettings {
    pub sigma_l_mv: f64,
    pub sigma_s_mv: f64,
    pub lambda_min_um: f64,
    pub lambda_max_um: f64,
}

impl Default for PatchSettings {
    fn default() -> Self {
        Self {
            sigma_l_mv: 50.0,
            sigma_s_mv: 50.0,
            lambda_min_um: 20.0,
            lambda_max_um: 200.0,
        }
    }
}

impl PatchSettings {
    pub fn model(&self) -> PatchModel {
        PatchModel {
            sigma_l: self.sigma_l_mv * 1e-3,
            sigma_s: self.sigma_s_mv * 1e-3,
            lambda_min: self.lambda_min_um * 1e-6,
            lambda_max: self.lambda_max_um * 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSettings {
    pub fig1_d_from_um: f64,
    pub fig1_d_to_um: f64,
    pub fig1_points: usize,
    pub fig1_rho_g_per_l: f64,
    pub fig1_beta_rho_g_per_l: Vec<f64>,
    pub fig2_d_um: f64,
    pub fig2_beta_rho_from_g_per_l: f64,
    pub fig2_beta_rho_to_g_per_l: f64,
    pub fig2_points: usize,
    pub fig2_n: Vec<u32>,
    pub fig34_d_um: f64,
    pub fig34_p_to_atm: f64,
    pub fig34_points: usize,
    pub fig34_beta: Vec<f64>,
}

impl Default for FigureSettings {
    fn default() -> Self {
        Self {
            fig1_d_from_um: 10.0,
            fig1_d_to_um: 100.0,
            fig1_points: 46,
            fig1_rho_g_per_l: 5.0,
            fig1_beta_rho_g_per_l: vec![1e3, 1e4, 5e4, 1e5],
            fig2_d_um: 30.0,
            fig2_beta_rho_from_g_per_l: 1e1,
            fig2_beta_rho_to_g_per_l: 1e6,
            fig2_points: 51,
            fig2_n: vec![1, 2, 4, 6],
            fig34_d_um: 30.0,
            fig34_p_to_atm: 0.5,
            fig34_points: 26,
            fig34_beta: vec![1e3, 1e4, 1e5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub rho_g_per_l: f64,
    pub n: Vec<u32>,
    pub z: Vec<f64>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            rho_g_per_l: 5.0,
            n: vec![1, 2, 4, 6],
            z: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSettings,
    pub gas: GasSpec,
    pub patch: PatchSettings,
    pub d_um: f64,
    pub pressure_atm: f64,
    pub sweep: Sweep,
    pub include: Include,
    pub figures: FigureSettings,
    pub oracle: OracleSettings,
    pub sensitivity_target_pn_per_cm2: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSettings::default(),
            gas: GasSpec::xenon(),
            patch: PatchSettings::default(),
            d_um: 30.0,
            pressure_atm: 0.0,
            sweep: Sweep::default(),
            include: Include::default(),
            figures: FigureSettings::default(),
            oracle: OracleSettings::default(),
            sensitivity_target_pn_per_cm2: 0.01,
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn constants(&self) -> Constants {
        Constants {
            lambda_de: self.model.lambda_gev,
            planck_mass_reduced: self.model.m_pl_gev,
            ..Constants::default()
        }
    }

    pub fn chameleon_model(&self) -> Result<ChameleonModel> {
        self.chameleon_model_with(self.model.n, self.model.beta)
    }

    pub fn chameleon_model_with(&self, n: u32, beta: f64) -> Result<ChameleonModel> {
        let mut m = ChameleonModel::new(n, beta, self.model.lambda_gev, self.model.m_pl_gev)?
            .with_mass_model(self.model.mass_model)
            .with_thresholds(self.model.thresholds);
        m.quadrature = self.quadrature;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.chameleon_model()?;
        self.gas.validate()?;
        self.patch.model().validate()?;
        self.quadrature.validate()?;
        self.sweep.validate()?;
        if self.include.is_empty() {
            return Err(ExperimentError::Invalid(
                "include must name at least one component".into(),
            ));
        }
        if !(self.d_um > 0.0 && self.d_um.is_finite()) {
            return Err(ExperimentError::Invalid(format!(
                "separation must be positive, got {} μm",
                self.d_um
            )));
        }
        if !(self.pressure_atm >= 0.0 && self.pressure_atm.is_finite()) {
            return Err(ExperimentError::Invalid(format!(
                "gas pressure must be ≥ 0, got {} atm",
                self.pressure_atm
            )));
        }
        if !(self.sensitivity_target_pn_per_cm2 > 0.0) {
            return Err(ExperimentError::Invalid(
                "sensitivity target must be positive".into(),
            ));
        }
        let f = &self.figures;
        if f.fig1_points < 2 || f.fig2_points < 2 || f.fig34_points < 2 {
            return Err(ExperimentError::Invalid(
                "figure grids need at least 2 points".into(),
            ));
        }
        if f.fig2_n.iter().chain(&self.oracle.n).any(|&n| n < 1) {
            return Err(ExperimentError::Invalid("n must be ≥ 1".into()));
        }
        if self.oracle.z.iter().any(|z| !(*z > 0.0 && *z < 1.0)) {
            return Err(ExperimentError::Invalid(
                "oracle z values must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Pressures at one (d, P) point, pN/cm².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureBreakdown {
    pub d_um: f64,
    pub gas: GasState,
    pub chameleon: f64,
    pub casimir: f64,
    pub electrostatic: f64,
    pub total: f64,
    pub regime: Option<Regime>,
    pub m_b_d: Option<f64>,
    pub fully_screened: bool,
    /// Ratio of the pressure to `V(φ₀) − V(φ_b)`; absent in vacuum.
    pub oracle_ratio: Option<f64>,
    pub linearization_warning: bool,
    pub plate_warning: bool,
}

fn rho_natural(constants: &Constants, rho_g_per_l: f64) -> Result<f64> {
    Ok(constants.mass_density_to_natural(rho_g_per_l)?)
}

fn d_natural(constants: &Constants, d_um: f64) -> f64 {
    constants.metres_to_inverse_gev(d_um * 1e-6)
}

struct ChameleonPoint {
    value: f64,
    regime: Regime,
    m_b_d: f64,
    fully_screened: bool,
    oracle_ratio: Option<f64>,
    linearization_warning: bool,
}

fn chameleon_at(
    model: &ChameleonModel,
    constants: &Constants,
    rho_g_per_l: f64,
    d_um: f64,
) -> Result<ChameleonPoint> {
    let d = d_natural(constants, d_um);
    if rho_g_per_l == 0.0 {
        let f = model.vacuum_asymptotic_pressure(d)?;
        return Ok(ChameleonPoint {
            value: constants.pressure_natural_to_lab(f.value),
            regime: Regime::Algebraic,
            m_b_d: 0.0,
            fully_screened: false,
            oracle_ratio: None,
            linearization_warning: false,
        });
    }
    let bulk = model.bulk_state(rho_natural(constants, rho_g_per_l)?)?;
    let f = model.pressure_for_bulk(&bulk, d)?;
    let m_b_d = f.m_b_d.unwrap_or(bulk.m_b * d);
    Ok(ChameleonPoint {
        value: constants.pressure_natural_to_lab(f.value),
        regime: Regime::classify(m_b_d, &model.thresholds),
        m_b_d,
        fully_screened: f.fully_screened,
        oracle_ratio: f.profile.map(|p| model.energy_ratio(&bulk, &p)),
        linearization_warning: bulk.linearization_warning,
    })
}

/// All included pressures at separation `d_um` (μm) and gas pressure `p_atm`.
pub fn breakdown_at(config: &ExperimentConfig, d_um: f64, p_atm: f64) -> Result<PressureBreakdown> {
    let constants = config.constants();
    let gas = gas_state(&config.gas, p_atm, &constants)?;
    let d_m = d_um * 1e-6;
    let inc = config.include;
    let mut out = PressureBreakdown {
        d_um,
        gas,
        chameleon: 0.0,
        casimir: 0.0,
        electrostatic: 0.0,
        total: 0.0,
        regime: None,
        m_b_d: None,
        fully_screened: false,
        oracle_ratio: None,
        linearization_warning: false,
        plate_warning: false,
    };
    if inc.chameleon {
        let model = config.chameleon_model()?;
        let c = chameleon_at(&model, &constants, gas.rho_g_per_l, d_um)?;
        out.chameleon = c.value;
        out.regime = Some(c.regime);
        out.m_b_d = Some(c.m_b_d);
        out.fully_screened = c.fully_screened;
        out.oracle_ratio = c.oracle_ratio;
        out.linearization_warning = c.linearization_warning;
        if let Some(plate) = config.model.plate_density_g_per_l {
            let v = model
                .plate_validity(rho_natural(&constants, plate)?, d_natural(&constants, d_um))?;
            out.plate_warning = v.warning;
        }
    }
    if inc.casimir {
        out.casimir = casimir_pressure(d_m, gas.eps_rel, &constants)?;
    }
    if inc.electrostatic {
        out.electrostatic =
            gas.eps_rel * electrostatic_pressure_vacuum(&config.patch.model(), d_m, &constants)?;
    }
    out.total = [
        (inc.chameleon, out.chameleon),
        (inc.casimir, out.casimir),
        (inc.electrostatic, out.electrostatic),
    ]
    .iter()
    .filter(|(on, _)| *on)
    .map(|(_, v)| v)
    .sum();
    Ok(out)
}

/// Reduction of the chameleon pressure relative to the vacuum asymptote, percent.
pub fn screening_percentage(model: &ChameleonModel, rho: f64, d: f64) -> Result<f64> {
    let f = model.chameleon_pressure(rho, d)?.value;
    let vac = model.vacuum_asymptotic_pressure(d)?.value;
    Ok((100.0 * (1.0 - f / vac)).clamp(0.0, 100.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `key=value` lines for the output preamble.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; non-numeric cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[i].as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}

/// Short label for a value in a column name: `5`, `1e3`, `5e4`.
pub fn tag(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1000.0 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

fn par_map<T: Send, F>(xs: &[f64], variable: &'static str, f: F) -> Result<Vec<T>>
where
    F: Fn(f64) -> Result<T> + Sync,
{
    xs.par_iter()
        .enumerate()
        .map(|(index, &x)| {
            f(x).map_err(|e| ExperimentError::AtPoint {
                index,
                variable,
                value: x,
                source: Box::new(e),
            })
        })
        .collect()
}

pub const BREAKDOWN_COLUMNS: [&str; 14] = [
    "d_um",
    "P_atm",
    "rho_g_per_l",
    "eps_rel_minus_one",
    "chameleon_pN_per_cm2",
    "casimir_pN_per_cm2",
    "electrostatic_pN_per_cm2",
    "total_pN_per_cm2",
    "regime",
    "m_b_d",
    "fully_screened",
    "oracle_ratio",
    "linearization_warning",
    "plate_warning",
];

pub fn breakdown_row(b: &PressureBreakdown) -> Vec<Cell> {
    vec![
        b.d_um.into(),
        b.gas.pressure_atm.into(),
        b.gas.rho_g_per_l.into(),
        b.gas.eps_rel_minus_one.into(),
        b.chameleon.into(),
        b.casimir.into(),
        b.electrostatic.into(),
        b.total.into(),
        b.regime
            .map_or(Cell::Empty, |r| Cell::Text(r.as_str().into())),
        b.m_b_d.map_or(Cell::Empty, Cell::Num),
        Cell::Int(b.fully_screened as i64),
        b.oracle_ratio.map_or(Cell::Empty, Cell::Num),
        Cell::Int(b.linearization_warning as i64),
        Cell::Int(b.plate_warning as i64),
    ]
}

/// The configured single point.
pub fn point_table(config: &ExperimentConfig) -> Result<Table> {
    let b = breakdown_at(config, config.d_um, config.pressure_atm)?;
    Ok(Table {
        columns: BREAKDOWN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: vec![breakdown_row(&b)],
        notes: vec![],
    })
}

/// Breakdowns along the configured sweep, in sweep order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<(f64, PressureBreakdown)>> {
    config.sweep.validate()?;
    let xs = config.sweep.values();
    let var = config.sweep.variable;
    let rows = par_map(&xs, var.as_str(), |x| match var {
        SweepVariable::D => breakdown_at(config, x, config.pressure_atm),
        SweepVariable::P => breakdown_at(config, config.d_um, x),
        SweepVariable::BetaRho => {
            let p = x / config.model.beta / config.gas.density_coeff;
            breakdown_at(config, config.d_um, p)
        }
    })?;
    Ok(xs.into_iter().zip(rows).collect())
}

pub fn sweep_table(config: &ExperimentConfig) -> Result<Table> {
    let var = config.sweep.variable;
    let mut columns = vec![var.column().to_string()];
    columns.extend(BREAKDOWN_COLUMNS.iter().map(|s| s.to_string()));
    let rows = run_sweep(config)?
        .iter()
        .map(|(x, b)| {
            let mut r = vec![Cell::Num(*x)];
            r.extend(breakdown_row(b));
            r
        })
        .collect();
    Ok(Table {
        columns,
        rows,
        notes: vec![("sweep_variable".into(), var.as_str().into())],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    pub fn parse(s: &str) -> Option<Figure> {
        Figure::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

pub fn figure_dataset(which: Figure, config: &ExperimentConfig) -> Result<Table> {
    match which {
        Figure::Fig1 => fig1(config),
        Figure::Fig2 => fig2(config),
        Figure::Fig3 | Figure::Fig4 => gas_figure(which, config),
    }
}

fn fig1(config: &ExperimentConfig) -> Result<Table> {
    let f = &config.figures;
    let constants = config.constants();
    let model = config.chameleon_model()?;
    let ds = spaced(
        f.fig1_d_from_um,
        f.fig1_d_to_um,
        f.fig1_points,
        Spacing::Log,
    );
    let rho = rho_natural(&constants, f.fig1_rho_g_per_l)?;
    let tags: Vec<f64> = f.fig1_beta_rho_g_per_l.clone();
    let tag_rhos: Vec<f64> = tags
        .iter()
        .map(|br| rho_natural(&constants, br / model.beta()))
        .collect::<Result<_>>()?;
    let rows = par_map(&ds, "d", |d_um| {
        let d = d_natural(&constants, d_um);
        let vac = model.vacuum_asymptotic_pressure(d)?.value;
        let dense = model.chameleon_pressure(rho, d)?.value;
        let mut row = vec![
            Cell::Num(d_um),
            constants.pressure_natural_to_lab(vac).into(),
            constants.pressure_natural_to_lab(dense).into(),
        ];
        for &r in &tag_rhos {
            row.push(screening_percentage(&model, r, d)?.into());
        }
        Ok(row)
    })?;
    let mut columns = vec![
        "d_um".to_string(),
        "F_vacuum".into(),
        format!("F_rho{}", tag(f.fig1_rho_g_per_l)),
    ];
    columns.extend(tags.iter().map(|t| format!("screening_pct_{}", tag(*t))));
    Ok(Table {
        columns,
        rows,
        notes: vec![
            (
                "units".into(),
                "d in um; pressures in pN/cm2; screening in percent".into(),
            ),
            ("screening_baseline".into(), "vacuum_asymptote".into()),
        ],
    })
}

fn fig2(config: &ExperimentConfig) -> Result<Table> {
    let f = &config.figures;
    let constants = config.constants();
    let xs = spaced(
        f.fig2_beta_rho_from_g_per_l,
        f.fig2_beta_rho_to_g_per_l,
        f.fig2_points,
        Spacing::Log,
    );
    let d = d_natural(&constants, f.fig2_d_um);
    let models: Vec<ChameleonModel> = f
        .fig2_n
        .iter()
        .map(|&n| config.chameleon_model_with(n, config.model.beta))
        .collect::<Result<_>>()?;
    let plateaus: Vec<f64> = models
        .iter()
        .map(|m| Ok(constants.pressure_natural_to_lab(m.vacuum_asymptotic_pressure(d)?.value)))
        .collect::<Result<_>>()?;
    let rows = par_map(&xs, "beta_rho", |br| {
        let mut row = vec![Cell::Num(br)];
        for m in &models {
            let rho = rho_natural(&constants, br / m.beta())?;
            row.push(
                constants
                    .pressure_natural_to_lab(m.chameleon_pressure(rho, d)?.value)
                    .into(),
            );
        }
        row.extend(plateaus.iter().map(|&v| Cell::Num(v)));
        Ok(row)
    })?;
    let mut columns = vec!["beta_rho_g_per_l".to_string()];
    columns.extend(f.fig2_n.iter().map(|n| format!("F_n{n}")));
    columns.extend(f.fig2_n.iter().map(|n| format!("F_vacuum_n{n}")));
    Ok(Table {
        columns,
        rows,
        notes: vec![
            (
                "units".into(),
                "beta_rho in g/l; pressures in pN/cm2".into(),
            ),
            ("d_um".into(), format!("{}", f.fig2_d_um)),
        ],
    })
}

fn gas_figure(which: Figure, config: &ExperimentConfig) -> Result<Table> {
    let f = &config.figures;
    let constants = config.constants();
    let d_um = f.fig34_d_um;
    let d = d_natural(&constants, d_um);
    let d_m = d_um * 1e-6;
    let ps = spaced(0.0, f.fig34_p_to_atm, f.fig34_points, Spacing::Linear);
    let models: Vec<ChameleonModel> = f
        .fig34_beta
        .iter()
        .map(|&b| config.chameleon_model_with(config.model.n, b))
        .collect::<Result<_>>()?;
    let vacuum: Vec<f64> = models
        .iter()
        .map(|m| Ok(constants.pressure_natural_to_lab(m.vacuum_asymptotic_pressure(d)?.value)))
        .collect::<Result<_>>()?;
    let casimir_vacuum = casimir_pressure(d_m, 1.0, &constants)?;
    let electrostatic_vacuum =
        electrostatic_pressure_vacuum(&config.patch.model(), d_m, &constants)?;
    let rows = par_map(&ps, "P", |p| {
        let gas = gas_state(&config.gas, p, &constants)?;
        let mut cham = Vec::with_capacity(models.len());
        for (m, &vac) in models.iter().zip(&vacuum) {
            let v = chameleon_at(m, &constants, gas.rho_g_per_l, d_um)?.value;
            cham.push(v - vac);
        }
        let d_cas = casimir_pressure(d_m, gas.eps_rel, &constants)? - casimir_vacuum;
        let d_el = gas.eps_rel_minus_one * electrostatic_vacuum;
        let mut row = vec![Cell::Num(p)];
        match which {
            Figure::Fig3 => {
                row.extend(cham.iter().map(|&v| Cell::Num(v)));
                row.push(d_el.into());
                row.push(d_cas.into());
            }
            _ => {
                row.extend(cham.iter().map(|&v| Cell::Num(v + d_cas + d_el)));
                row.push((d_cas + d_el).into());
            }
        }
        Ok(row)
    })?;
    let mut columns = vec!["P_atm".to_string()];
    match which {
        Figure::Fig3 => {
            columns.extend(
                f.fig34_beta
                    .iter()
                    .map(|b| format!("dF_chameleon_beta{}", tag(*b))),
            );
            columns.push("dF_electrostatic".into());
            columns.push("dF_casimir".into());
        }
        _ => {
            columns.extend(
                f.fig34_beta
                    .iter()
                    .map(|b| format!("dF_total_beta{}", tag(*b))),
            );
            columns.push("dF_no_chameleon".into());
        }
    }
    Ok(Table {
        columns,
        rows,
        notes: vec![
            (
                "units".into(),
                "P in atm; pressure changes in pN/cm2 relative to P=0".into(),
            ),
            ("d_um".into(), format!("{d_um}")),
            ("gas".into(), config.gas.name.clone()),
        ],
    })
}

/// Separation from the closed-form profile law against direct quadrature of the first integral.
pub fn oracle_table(config: &ExperimentConfig) -> Result<Table> {
    let constants = config.constants();
    let rho = rho_natural(&constants, config.oracle.rho_g_per_l)?;
    let mut cases = Vec::new();
    for &n in &config.oracle.n {
        for &z in &config.oracle.z {
            cases.push((n, z));
        }
    }
    let rows: Vec<Vec<Cell>> = cases
        .par_iter()
        .enumerate()
        .map(|(index, &(n, z))| {
            let run = || -> Result<Vec<Cell>> {
                let m = config
                    .chameleon_model_with(n, config.model.beta)?
                    .with_mass_model(MassModel::Linearized);
                let bulk = m.bulk_state(rho)?;
                let d5 = m.separation_from_z(&bulk, z)?;
                let d0 = m.oracle_separation(&bulk, bulk.phi_b * z.powf(m.p()))?;
                let to_um = |v: f64| constants.inverse_gev_to_metres(v) * 1e6;
                Ok(vec![
                    Cell::Int(n as i64),
                    z.into(),
                    to_um(d5).into(),
                    to_um(d0).into(),
                    ((d5 - d0) / d0).abs().into(),
                ])
            };
            run().map_err(|e| ExperimentError::AtPoint {
                index,
                variable: "z",
                value: z,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let max = rows
        .iter()
        .filter_map(|r| r[4].as_f64())
        .fold(0.0, f64::max);
    Ok(Table {
        columns: ["n", "z", "d_profile_um", "d_oracle_um", "rel_diff"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
        notes: vec![
            ("mass_model".into(), "linearized".into()),
            ("max_rel_diff".into(), format!("{max:e}")),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    /// V.
    pub delta_sigma: f64,
    /// m.
    pub delta_d: f64,
}

/// Patch-potential and separation drifts that shift the electrostatic
/// pressure by `target` (pN/cm²). `d` in metres.
pub fn sensitivity_requirements(
    patch: &PatchModel,
    d: f64,
    target: f64,
    constants: &Constants,
) -> Result<Sensitivity> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(ExperimentError::Invalid(format!(
            "sensitivity target must be positive, got {target}"
        )));
    }
    let base = electrostatic_pressure_vacuum(patch, d, constants)?;
    let sigma = patch.sigma_l.max(patch.sigma_s);
    if sigma == 0.0 {
        return Err(ExperimentError::Invalid("patch potentials are zero".into()));
    }
    let shifted = |delta: f64| PatchModel {
        sigma_l: patch.sigma_l + delta,
        sigma_s: patch.sigma_s + delta,
        ..*patch
    };
    let delta_sigma = try_find_root_bracketed(
        |delta| -> Result<f64> {
            Ok(electrostatic_pressure_vacuum(&shifted(delta), d, constants)? - base - target)
        },
        &RootSpec::new(0.0, sigma).with_rel_tol(1e-10),
    )?;
    let delta_d = try_find_root_bracketed(
        |delta| -> Result<f64> {
            Ok(electrostatic_pressure_vacuum(patch, d - delta, constants)? - base - target)
        },
        &RootSpec::new(0.0, 0.5 * d).with_rel_tol(1e-10),
    )?;
    Ok(Sensitivity {
        delta_sigma,
        delta_d,
    })
}

pub fn sensitivity_table(config: &ExperimentConfig) -> Result<Table> {
    let target = config.sensitivity_target_pn_per_cm2;
    let s = sensitivity_requirements(
        &config.patch.model(),
        config.d_um * 1e-6,
        target,
        &config.constants(),
    )?;
    Ok(Table {
        columns: ["target_pN_per_cm2", "delta_sigma_uV", "delta_d_nm"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: vec![vec![
            target.into(),
            (s.delta_sigma * 1e6).into(),
            (s.delta_d * 1e9).into(),
        ]],
        notes: vec![("d_um".into(), format!("{}", config.d_um))],
    })
}
