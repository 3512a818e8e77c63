//! Physical constants and conversions between natural units (powers of GeV,
//! with ħ = c = 1) and SI laboratory units.
//!
//! Every conversion factor is derived on demand from the base constants in
//! [`Constants`]; no derived factor is stored as a separate literal.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitsError {
    #[error("{what} must be positive, got {value:e}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("{what} must be non-negative, got {value:e}")]
    Negative { what: &'static str, value: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("unit system mismatch: {0}")]
    SystemMismatch(String),
    #[error("dimension {0} has no natural-unit representation")]
    NoNaturalForm(String),
}

/// Pascal per atmosphere (exact by definition).
pub const PASCAL_PER_ATM: f64 = 101_325.0;
/// pN/cm² per Pa: 10¹² pN/N divided by 10⁴ cm²/m².
pub const PN_PER_CM2_PER_PASCAL: f64 = 1.0e8;
/// eV per GeV.
pub const EV_PER_GEV: f64 = 1.0e9;

/// Base constants. SI entries are CODATA 2018; the two chameleon energy
/// scales default to the rounded values used throughout the experiment
/// discussion and can be overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Joule per electronvolt.
    pub ev_to_joule: f64,
    /// Vacuum permittivity ε₀, F/m.
    pub vacuum_permittivity: f64,
    /// Boltzmann constant, J/K.
    pub boltzmann: f64,
    /// Reduced Planck mass, GeV.
    pub planck_mass_reduced: f64,
    /// Dark-energy scale Λ, GeV.
    pub lambda_de: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            c: 299_792_458.0,
            ev_to_joule: 1.602_176_634e-19,
            vacuum_permittivity: 8.854_187_812_8e-12,
            boltzmann: 1.380_649e-23,
            planck_mass_reduced: 2.0e18,
            lambda_de: 2.4e-12,
        }
    }
}

impl Constants {
    /// ħc in GeV·m.
    pub fn hbar_c(&self) -> f64 {
        self.hbar * self.c / (self.ev_to_joule * EV_PER_GEV)
    }

    /// ħc in J·m.
    pub fn hbar_c_si(&self) -> f64 {
        self.hbar * self.c
    }

    /// Joule per GeV.
    pub fn joule_per_gev(&self) -> f64 {
        self.ev_to_joule * EV_PER_GEV
    }

    /// Pascal (J/m³) per GeV⁴.
    pub fn pascal_per_gev4(&self) -> f64 {
        let hc = self.hbar_c();
        self.joule_per_gev() / (hc * hc * hc)
    }

    /// Converts a length in metres to GeV⁻¹ (a plain factor, no validation).
    pub fn metres_to_inverse_gev(&self, metres: f64) -> f64 {
        metres / self.hbar_c()
    }

    /// Converts a length in GeV⁻¹ to metres.
    pub fn inverse_gev_to_metres(&self, inv_gev: f64) -> f64 {
        inv_gev * self.hbar_c()
    }

    /// ħc/E: the length corresponding to an energy, in metres.
    pub fn length_from_inverse_energy(&self, energy_gev: f64) -> Result<f64, UnitsError> {
        if !(energy_gev > 0.0) {
            return Err(UnitsError::NonPositive {
                what: "energy",
                value: energy_gev,
            });
        }
        Ok(self.hbar_c() / energy_gev)
    }

    /// ħc/d: the energy corresponding to a length, in GeV.
    pub fn energy_from_inverse_length(&self, metres: f64) -> Result<f64, UnitsError> {
        if !(metres > 0.0) {
            return Err(UnitsError::NonPositive {
                what: "length",
                value: metres,
            });
        }
        Ok(self.hbar_c() / metres)
    }

    /// ρc² expressed as an energy density in GeV⁴.
    pub fn mass_density_to_natural(&self, kg_per_m3: f64) -> Result<f64, UnitsError> {
        if !(kg_per_m3 >= 0.0) {
            return Err(UnitsError::Negative {
                what: "mass density",
                value: kg_per_m3,
            });
        }
        Ok(kg_per_m3 * self.c * self.c / self.pascal_per_gev4())
    }

    /// Inverse of [`Constants::mass_density_to_natural`].
    pub fn mass_density_from_natural(&self, gev4: f64) -> f64 {
        gev4 * self.pascal_per_gev4() / (self.c * self.c)
    }

    /// Energy density / pressure from GeV⁴ to pN/cm².
    pub fn pressure_natural_to_lab(&self, gev4: f64) -> f64 {
        pascal_to_lab(gev4 * self.pascal_per_gev4())
    }

    /// Pressure from pN/cm² to GeV⁴.
    pub fn pressure_lab_to_natural(&self, pn_per_cm2: f64) -> f64 {
        lab_to_pascal(pn_per_cm2) / self.pascal_per_gev4()
    }
}

/// Pa → pN/cm².
pub fn pascal_to_lab(pa: f64) -> f64 {
    pa * PN_PER_CM2_PER_PASCAL
}

/// pN/cm² → Pa.
pub fn lab_to_pascal(pn_per_cm2: f64) -> f64 {
    pn_per_cm2 / PN_PER_CM2_PER_PASCAL
}

/// 1 g/l is 1 kg/m³.
pub fn grams_per_litre_to_si(g_per_l: f64) -> f64 {
    g_per_l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitSystem {
    Natural,
    Si,
}

/// Exponents over the SI base dimensions kg, m, s, A, K.
///
/// A quantity in the natural system carries the SI dimension it came from so
/// that conversion back is unambiguous; its natural form is GeV^(kg − m − s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dimension {
    pub kg: i8,
    pub m: i8,
    pub s: i8,
    pub a: i8,
    pub k: i8,
}

impl Dimension {
    pub const DIMENSIONLESS: Dimension = Dimension {
        kg: 0,
        m: 0,
        s: 0,
        a: 0,
        k: 0,
    };
    pub const LENGTH: Dimension = Dimension {
        kg: 0,
        m: 1,
        s: 0,
        a: 0,
        k: 0,
    };
    pub const MASS: Dimension = Dimension {
        kg: 1,
        m: 0,
        s: 0,
        a: 0,
        k: 0,
    };
    pub const TIME: Dimension = Dimension {
        kg: 0,
        m: 0,
        s: 1,
        a: 0,
        k: 0,
    };
    pub const ENERGY: Dimension = Dimension {
        kg: 1,
        m: 2,
        s: -2,
        a: 0,
        k: 0,
    };
    pub const MASS_DENSITY: Dimension = Dimension {
        kg: 1,
        m: -3,
        s: 0,
        a: 0,
        k: 0,
    };
    pub const PRESSURE: Dimension = Dimension {
        kg: 1,
        m: -1,
        s: -2,
        a: 0,
        k: 0,
    };

    fn combine(self, other: Dimension, sign: i8) -> Dimension {
        Dimension {
            kg: self.kg + sign * other.kg,
            m: self.m + sign * other.m,
            s: self.s + sign * other.s,
            a: self.a + sign * other.a,
            k: self.k + sign * other.k,
        }
    }

    /// Power of GeV in natural units, if the dimension has one.
    pub fn energy_power(self) -> Option<i8> {
        (self.a == 0 && self.k == 0).then_some(self.kg - self.m - self.s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kg^{} m^{} s^{} A^{} K^{}",
            self.kg, self.m, self.s, self.a, self.k
        )
    }
}

/// A value tagged with its dimension and unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
    pub system: UnitSystem,
}

impl Quantity {
    pub fn si(value: f64, dimension: Dimension) -> Self {
        Self {
            value,
            dimension,
            system: UnitSystem::Si,
        }
    }

    /// A natural-unit value whose SI counterpart has `dimension`.
    pub fn natural(value: f64, dimension: Dimension) -> Self {
        Self {
            value,
            dimension,
            system: UnitSystem::Natural,
        }
    }

    fn check_compatible(&self, other: &Quantity) -> Result<(), UnitsError> {
        if self.system != other.system {
            return Err(UnitsError::SystemMismatch(format!(
                "{:?} vs {:?}",
                self.system, other.system
            )));
        }
        Ok(())
    }

    pub fn checked_add(self, other: Quantity) -> Result<Quantity, UnitsError> {
        self.check_compatible(&other)?;
        if self.dimension != other.dimension {
            return Err(UnitsError::DimensionMismatch {
                left: self.dimension.to_string(),
                right: other.dimension.to_string(),
            });
        }
        Ok(Quantity {
            value: self.value + other.value,
            ..self
        })
    }

    pub fn checked_sub(self, other: Quantity) -> Result<Quantity, UnitsError> {
        self.checked_add(Quantity {
            value: -other.value,
            ..other
        })
    }

    pub fn checked_mul(self, other: Quantity) -> Result<Quantity, UnitsError> {
        self.check_compatible(&other)?;
        Ok(Quantity {
            value: self.value * other.value,
            dimension: self.dimension.combine(other.dimension, 1),
            system: self.system,
        })
    }

    pub fn checked_div(self, other: Quantity) -> Result<Quantity, UnitsError> {
        self.check_compatible(&other)?;
        Ok(Quantity {
            value: self.value / other.value,
            dimension: self.dimension.combine(other.dimension, -1),
            system: self.system,
        })
    }

    /// value_natural / value_SI for this dimension.
    fn natural_per_si(dimension: Dimension, constants: &Constants) -> Result<f64, UnitsError> {
        if dimension.energy_power().is_none() {
            return Err(UnitsError::NoNaturalForm(dimension.to_string()));
        }
        // 1 kg = c²/(J/GeV) GeV, 1 m = 1/(ħc) GeV⁻¹, 1 s = c/(ħc) GeV⁻¹.
        let per_kg = constants.c * constants.c / constants.joule_per_gev();
        let per_m = 1.0 / constants.hbar_c();
        let per_s = constants.c / constants.hbar_c();
        Ok(per_kg.powi(dimension.kg as i32)
            * per_m.powi(dimension.m as i32)
            * per_s.powi(dimension.s as i32))
    }

    pub fn to_natural(self, constants: &Constants) -> Result<Quantity, UnitsError> {
        match self.system {
            UnitSystem::Natural => Ok(self),
            UnitSystem::Si => {
                let factor = Self::natural_per_si(self.dimension, constants)?;
                Ok(Quantity::natural(self.value * factor, self.dimension))
            }
        }
    }

    pub fn to_si(self, constants: &Constants) -> Result<Quantity, UnitsError> {
        match self.system {
            UnitSystem::Si => Ok(self),
            UnitSystem::Natural => {
                let factor = Self::natural_per_si(self.dimension, constants)?;
                Ok(Quantity::si(self.value / factor, self.dimension))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn lambda_length_scale() {
        let k = Constants::default();
        let l = k.length_from_inverse_energy(k.lambda_de).unwrap();
        assert!(rel(l, 82.2e-6) < 0.01, "{l}");
    }

    #[test]
    fn one_gev_length() {
        // ħc = 197.326 980 MeV fm
        let l = Constants::default()
            .length_from_inverse_energy(1.0)
            .unwrap();
        assert!(rel(l, 1.973_269_80e-16) < 1e-8, "{l}");
    }

    #[test]
    fn hbar_c_matches_codata_product() {
        let k = Constants::default();
        assert!(rel(k.hbar_c(), 1.973_269_804e-16) < 1e-9);
    }

    #[test]
    fn non_positive_energy_rejected() {
        let k = Constants::default();
        assert!(k.length_from_inverse_energy(0.0).is_err());
        assert!(k.length_from_inverse_energy(-1.0).is_err());
        assert!(k.energy_from_inverse_length(0.0).is_err());
        assert!(k.mass_density_to_natural(-1.0).is_err());
    }

    #[test]
    fn mass_density_anchor_and_linearity() {
        let k = Constants::default();
        let one = k.mass_density_to_natural(1.0).unwrap();
        assert!(rel(one, 4.310_130_5e-21) < 1e-6, "{one:e}");
        assert_eq!(k.mass_density_to_natural(0.0).unwrap(), 0.0);
        let xe = k.mass_density_to_natural(5.462).unwrap();
        assert!(rel(xe, 5.462 * one) < 1e-15);
    }

    #[test]
    fn gev4_pressure_anchor() {
        let k = Constants::default();
        let lab = k.pressure_natural_to_lab(1.0);
        assert!(rel(lab, 2.085_215_69e45) < 1e-8, "{lab:e}");
        assert_eq!(k.pressure_natural_to_lab(0.0), 0.0);
        assert_eq!(pascal_to_lab(1.0), 1.0e8);
        let lambda4 = k.pressure_natural_to_lab(k.lambda_de.powi(4));
        assert!(rel(lambda4, 6.918_245e-2) < 1e-6, "{lambda4:e}");
    }

    #[test]
    fn quantity_dimension_mismatch_is_error() {
        let a = Quantity::si(1.0, Dimension::LENGTH);
        let b = Quantity::si(1.0, Dimension::TIME);
        assert!(a.checked_add(b).is_err());
        let n = Quantity::natural(1.0, Dimension::LENGTH);
        assert!(a.checked_add(n).is_err());
        assert!(a.checked_mul(n).is_err());
        let area = a.checked_mul(a).unwrap();
        assert_eq!(area.dimension.m, 2);
    }

    #[test]
    fn electromagnetic_dimension_has_no_natural_form() {
        let q = Quantity::si(
            1.0,
            Dimension {
                a: 1,
                ..Dimension::DIMENSIONLESS
            },
        );
        assert!(q.to_natural(&Constants::default()).is_err());
    }

    #[test]
    fn quantity_conversion_matches_scalar_helpers() {
        let k = Constants::default();
        let rho = Quantity::si(3.0, Dimension::MASS_DENSITY)
            .to_natural(&k)
            .unwrap();
        assert!(rel(rho.value, k.mass_density_to_natural(3.0).unwrap()) < 1e-14);
        let p = Quantity::natural(1.0, Dimension::PRESSURE)
            .to_si(&k)
            .unwrap();
        assert!(rel(p.value, k.pascal_per_gev4()) < 1e-14);
        let e = Quantity::si(k.joule_per_gev(), Dimension::ENERGY)
            .to_natural(&k)
            .unwrap();
        assert!(rel(e.value, 1.0) < 1e-14);
    }

    proptest! {
        #[test]
        fn length_energy_involution(d in 1e-9f64..1.0) {
            let k = Constants::default();
            let e = k.energy_from_inverse_length(d).unwrap();
            let back = k.length_from_inverse_energy(e).unwrap();
            prop_assert!(rel(back, d) < 1e-12);
        }

        #[test]
        fn quantity_round_trip(v in -1e6f64..1e6, kg in -2i8..3, m in -4i8..3, s in -3i8..2) {
            let k = Constants::default();
            let q = Quantity::si(v, Dimension { kg, m, s, a: 0, k: 0 });
            let back = q.to_natural(&k).unwrap().to_si(&k).unwrap();
            prop_assert!((back.value - v).abs() <= 1e-12 * v.abs());
            prop_assert_eq!(back.dimension, q.dimension);
        }

        #[test]
        fn pressure_and_density_round_trip(v in 0.0f64..1e6) {
            let k = Constants::default();
            let p = k.pressure_lab_to_natural(k.pressure_natural_to_lab(v));
            prop_assert!((p - v).abs() <= 1e-12 * v);
            let r = k.mass_density_from_natural(k.mass_density_to_natural(v).unwrap());
            prop_assert!((r - v).abs() <= 1e-12 * v);
        }
    }
}
