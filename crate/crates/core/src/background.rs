//! Non-chameleon pressures between the plates and the gas that fills the gap.
//!
//! All inputs here are SI (metres, volts, kelvin) apart from gas pressure,
//! which is given in atmospheres. Returned pressures are pN/cm².

use thiserror::Error;

use crate::numerics::{integrate_endpoint_singular, NumericsError, QuadratureSpec};
use crate::units::{pascal_to_lab, Constants, PASCAL_PER_ATM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackgroundError {
    #[error("{what} out of domain: {value:e}")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid patch model: λ_min {lambda_min:e} m must be below λ_max {lambda_max:e} m")]
    PatchWindow { lambda_min: f64, lambda_max: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

type Result<T> = std::result::Result<T, BackgroundError>;

/// Pressures above this many atmospheres are outside the ideal-gas window.
pub const GAS_VALIDITY_MAX_ATM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GasSpec {
    pub name: String,
    /// Mass density per unit pressure, (g/l)/atm.
    pub density_coeff: f64,
    /// Atomic polarizability, F·m².
    pub polarizability: f64,
    /// K.
    pub temperature: f64,
}

impl GasSpec {
    pub fn xenon() -> Self {
        Self {
            name: "Xe".into(),
            density_coeff: 5.462,
            polarizability: 4e-40,
            temperature: 293.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, value) in [
            ("gas density coefficient", self.density_coeff),
            ("gas polarizability", self.polarizability),
            ("gas temperature", self.temperature),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(BackgroundError::Domain { what, value });
            }
        }
        Ok(())
    }
}

impl Default for GasSpec {
    fn default() -> Self {
        Self::xenon()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState {
    pub pressure_atm: f64,
    /// g/l (equal to kg/m³).
    pub rho_g_per_l: f64,
    /// Atoms per m³.
    pub number_density: f64,
    /// `ε_r − 1 = Nα/ε₀`, kept separately so small values are not rounded away.
    pub eps_rel_minus_one: f64,
    pub eps_rel: f64,
    pub validity_warning: bool,
}

pub fn gas_state(spec: &GasSpec, pressure_atm: f64, constants: &Constants) -> Result<GasState> {
    spec.validate()?;
    if !(pressure_atm >= 0.0 && pressure_atm.is_finite()) {
        return Err(BackgroundError::Domain {
            what: "gas pressure",
            value: pressure_atm,
        });
    }
    let per_atm = PASCAL_PER_ATM / (constants.boltzmann * spec.temperature);
    let number_density = pressure_atm * per_atm;
    let eps_rel_minus_one = number_density * (spec.polarizability / constants.vacuum_permittivity);
    Ok(GasState {
        pressure_atm,
        rho_g_per_l: spec.density_coeff * pressure_atm,
        number_density,
        eps_rel_minus_one,
        eps_rel: 1.0 + eps_rel_minus_one,
        validity_warning: pressure_atm > GAS_VALIDITY_MAX_ATM,
    })
}

/// Ideal Casimir pressure between perfect conductors in a medium of
/// relative permittivity `eps_rel`, pN/cm².
pub fn casimir_pressure(d: f64, eps_rel: f64, constants: &Constants) -> Result<f64> {
    check_separation(d)?;
    if !(eps_rel >= 1.0 && eps_rel.is_finite()) {
        return Err(BackgroundError::Domain {
            what: "relative permittivity",
            value: eps_rel,
        });
    }
    let vacuum = std::f64::consts::PI.powi(2) * constants.hbar_c_si() / (240.0 * d.powi(4));
    Ok(pascal_to_lab(vacuum / eps_rel.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchModel {
    /// V.
    pub sigma_l: f64,
    /// V.
    pub sigma_s: f64,
    /// m.
    pub lambda_min: f64,
    /// m.
    pub lambda_max: f64,
}

impl Default for PatchModel {
    fn default() -> Self {
        Self {
            sigma_l: 50e-3,
            sigma_s: 50e-3,
            lambda_min: 20e-6,
            lambda_max: 200e-6,
        }
    }
}

impl PatchModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0
            && self.lambda_min < self.lambda_max
            && self.lambda_max.is_finite())
        {
            return Err(BackgroundError::PatchWindow {
                lambda_min: self.lambda_min,
                lambda_max: self.lambda_max,
            });
        }
        for (what, value) in [("σ_L", self.sigma_l), ("σ_S", self.sigma_s)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(BackgroundError::Domain { what, value });
            }
        }
        Ok(())
    }

    pub fn k_min(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda_max
    }

    pub fn k_max(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda_min
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self {
            sigma_l: sigma,
            sigma_s: sigma,
            ..self
        }
    }
}

/// `∫_{k_min}^{k_max} k³/sinh²(kd) dk`, in m⁻⁴.
pub fn patch_k_integral(patch: &PatchModel, d: f64) -> Result<f64> {
    patch.validate()?;
    check_separation(d)?;
    let spec = QuadratureSpec::default();
    let r =
        integrate_endpoint_singular(patch_integrand, patch.k_min() * d, patch.k_max() * d, &spec)?;
    Ok(r.value / d.powi(4))
}

/// `u³/sinh²u`, written to stay finite for large u and tend to `u` for small u.
pub fn patch_integrand(u: f64) -> f64 {
    let csch = 2.0 * (-u).exp() / -(-2.0 * u).exp_m1();
    u.powi(3) * csch * csch
}

/// Patch pressure in vacuum, pN/cm²; the medium value is `ε_r` times this.
pub fn electrostatic_pressure_vacuum(
    patch: &PatchModel,
    d: f64,
    constants: &Constants,
) -> Result<f64> {
    let k_integral = patch_k_integral(patch, d)?;
    let (k_min, k_max) = (patch.k_min(), patch.k_max());
    let long = patch.sigma_l.powi(2) / (2.0 * d * d);
    let short = 2.0 * patch.sigma_s.powi(2) / (k_max * k_max - k_min * k_min) * k_integral;
    Ok(pascal_to_lab(
        constants.vacuum_permittivity * (long + short),
    ))
}

/// Patch pressure via `ε₀ → ε_r ε₀`, pN/cm².
pub fn electrostatic_pressure(
    patch: &PatchModel,
    d: f64,
    eps_rel: f64,
    constants: &Constants,
) -> Result<f64> {
    if !(eps_rel >= 1.0 && eps_rel.is_finite()) {
        return Err(BackgroundError::Domain {
            what: "relative permittivity",
            value: eps_rel,
        });
    }
    Ok(eps_rel * electrostatic_pressure_vacuum(patch, d, constants)?)
}

fn check_separation(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(BackgroundError::Domain {
            what: "separation",
            value: d,
        })
    }
}
