//! Chameleon field between two parallel plates.
//!
//! Potential `V(φ) = Λ⁴ + Λ^{4+n}/φⁿ` coupled to matter through `ρ e^{βφ/m_Pl}`,
//! with the coupling linearised (`βφ/m_Pl ≪ 1`). Everything here is in
//! natural units: energies and fields in GeV, lengths in GeV⁻¹, energy
//! densities and pressures in GeV⁴.
//!
//! Between the plates the field rises from (effectively) zero at the plate
//! surfaces to `φ₀ = φ_b z^p` at the midline, `p = 1/(n+1)`. The separation
//! is a parametric function of `z`,
//!
//! ```text
//! d(z) = √2 z^{(1+p)/2} / m_b · ∫₀¹ x^{p-1} dx / √(h_{p-1}(x) − z h_p(x)),
//! h_p(x) = (1 − x^p)/p,
//! ```
//!
//! and the pressure on the plates is
//!
//! ```text
//! F/A = (n+1)/n · Λ^{4+n}/φ_bⁿ · z^{p-1} [h_{1-p}(z) − z h_{-p}(z)].
//! ```
//!
//! Both expressions contain the combination `h_{p-1}(x) − h_p(x)`, which
//! vanishes quadratically at `x = 1` and is evaluated here through a series
//! in `ln x` to keep full precision as `z → 1`.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use thiserror::Error;

use crate::numerics::{
    integrate_endpoint_singular_with_distance, try_find_root_bracketed, NumericsError,
    QuadratureSpec, RootSpec,
};
use crate::units::Constants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChameleonError {
    #[error("invalid chameleon model: {0}")]
    InvalidModel(String),
    #[error("{what} out of domain: {value:e}")]
    Domain { what: &'static str, value: f64 },
    #[error("the vacuum (ρ = 0) has no finite bulk minimum; use the vacuum asymptote")]
    VacuumBulk,
    #[error("separation {d:e} GeV⁻¹ is below the representable small-z range")]
    SeparationTooSmall { d: f64 },
    #[error("profile is fully screened (m_b d = {m_b_d:.3})")]
    FullyScreened { m_b_d: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

type Result<T> = std::result::Result<T, ChameleonError>;

/// Which bulk mass enters the separation integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MassModel {
    /// `m² = (βρ/m_Pl)((n+1)/φ_b + β/m_Pl)`.
    Full,
    /// Drops the `β/m_Pl` term: `m² = n(n+1)Λ^{4+n}/φ_b^{n+2}`.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub algebraic_below: f64,
    pub screened_above: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            algebraic_below: 0.1,
            screened_above: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Algebraic,
    Intermediate,
    Screened,
}

impl Regime {
    pub fn classify(m_b_d: f64, thresholds: &RegimeThresholds) -> Regime {
        if m_b_d < thresholds.algebraic_below {
            Regime::Algebraic
        } else if m_b_d > thresholds.screened_above {
            Regime::Screened
        } else {
            Regime::Intermediate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Algebraic => "algebraic",
            Regime::Intermediate => "intermediate",
            Regime::Screened => "screened",
        }
    }
}

/// Linearisation warning threshold on `βφ_b/m_Pl`.
pub const LINEARIZATION_WARNING: f64 = 1e-2;
/// Below this `1 − z` the profile is reported as fully screened.
pub const FULL_SCREENING_ONE_MINUS_Z: f64 = 1e-15;
/// Below this `1 − z` the pressure bracket is taken from its expansion about z = 1.
pub const NEAR_ONE_SWITCH: f64 = 1e-6;
/// Plate validity warning when `m_c d` falls below this.
pub const PLATE_VALIDITY_MIN: f64 = 10.0;

// Lower limit of the root search in u = ln(z/(1−z)); keeps z^{p−1} finite.
const LOGIT_MIN: f64 = -600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChameleonModel {
    n: u32,
    beta: f64,
    lambda: f64,
    m_pl: f64,
    pub mass_model: MassModel,
    pub thresholds: RegimeThresholds,
    pub quadrature: QuadratureSpec,
}

impl ChameleonModel {
    pub fn new(n: u32, beta: f64, lambda: f64, m_pl: f64) -> Result<Self> {
        if n < 1 {
            return Err(ChameleonError::InvalidModel("n must be ≥ 1".into()));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ChameleonError::InvalidModel(format!(
                "β must be > 0, got {beta}"
            )));
        }
        if !(lambda > 0.0 && m_pl > 0.0) {
            return Err(ChameleonError::InvalidModel(
                "Λ and m_Pl must be positive".into(),
            ));
        }
        Ok(Self {
            n,
            beta,
            lambda,
            m_pl,
            mass_model: MassModel::Full,
            thresholds: RegimeThresholds::default(),
            quadrature: QuadratureSpec::default(),
        })
    }

    /// Model with Λ and m_Pl taken from `constants`.
    pub fn from_constants(n: u32, beta: f64, constants: &Constants) -> Result<Self> {
        Self::new(n, beta, constants.lambda_de, constants.planck_mass_reduced)
    }

    pub fn with_mass_model(self, mass_model: MassModel) -> Self {
        Self { mass_model, ..self }
    }

    pub fn with_thresholds(self, thresholds: RegimeThresholds) -> Self {
        Self { thresholds, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.n, beta, self.lambda, self.m_pl)?;
        Ok(Self { beta, ..self })
    }

    pub fn with_n(self, n: u32) -> Result<Self> {
        Self::new(n, self.beta, self.lambda, self.m_pl)?;
        Ok(Self { n, ..self })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m_pl(&self) -> f64 {
        self.m_pl
    }

    /// `p = 1/(n+1)`, so that `n = (1 − p)/p`.
    pub fn p(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `ln Λ^{4+n}`.
    fn ln_lambda_power(&self) -> f64 {
        (4.0 + self.nf()) * self.lambda.ln()
    }

    /// Linearised effective potential `Λ^{4+n}φ^{−n} + (βρ/m_Pl)φ` (the
    /// constant `Λ⁴ + ρ` dropped).
    pub fn linearized_potential(&self, rho: f64, phi: f64) -> f64 {
        (self.ln_lambda_power() - self.nf() * phi.ln()).exp() + self.beta * rho / self.m_pl * phi
    }

    /// `∂_φ V(φ) = −nΛ^{4+n}/φ^{n+1}`.
    pub fn potential_slope(&self, phi: f64) -> f64 {
        -self.nf() * (self.ln_lambda_power() - (self.nf() + 1.0) * phi.ln()).exp()
    }

    /// Bulk minimum and mass for an ambient energy density `rho` (GeV⁴).
    pub fn bulk_state(&self, rho: f64) -> Result<BulkState> {
        if rho == 0.0 {
            return Err(ChameleonError::VacuumBulk);
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ChameleonError::Domain {
                what: "density",
                value: rho,
            });
        }
        let n = self.nf();
        let coupling = self.beta * rho / self.m_pl;
        let ln_phi_b =
            (n.ln() + self.ln_lambda_power() + self.m_pl.ln() - self.beta.ln() - rho.ln())
                / (n + 1.0);
        let phi_b = ln_phi_b.exp();
        let m_b_squared_full = coupling * ((n + 1.0) / phi_b + self.beta / self.m_pl);
        let m_b_squared_linearized = coupling * (n + 1.0) / phi_b;
        let m_b_squared = match self.mass_model {
            MassModel::Full => m_b_squared_full,
            MassModel::Linearized => m_b_squared_linearized,
        };
        let linearization_ratio = self.beta * phi_b / self.m_pl;
        Ok(BulkState {
            rho,
            phi_b,
            m_b: m_b_squared.sqrt(),
            m_b_squared_full,
            linearization_ratio,
            linearization_warning: linearization_ratio > LINEARIZATION_WARNING,
        })
    }

    /// Relative residual of `∂_φV(φ_b) = −βρ/m_Pl`.
    pub fn minimum_residual(&self, bulk: &BulkState) -> f64 {
        let coupling = self.beta * bulk.rho / self.m_pl;
        ((self.potential_slope(bulk.phi_b) + coupling) / coupling).abs()
    }

    /// The dimensionless separation integral `I(z)`, `0 ≤ z < 1`.
    pub fn separation_integral(&self, z: f64) -> Result<f64> {
        self.separation_integral_at(MidpointParam::from_z(z)?)
    }

    pub fn separation_integral_at(&self, param: MidpointParam) -> Result<f64> {
        let p = self.p();
        let eps = param.one_minus_z;
        let r = integrate_endpoint_singular_with_distance(
            |a| {
                let x = a.from_lo;
                let ln_x = if x < 0.5 {
                    x.ln()
                } else {
                    (-a.from_hi).ln_1p()
                };
                let denom = h_difference(p, ln_x) + eps * h_from_ln(p, ln_x);
                ((p - 1.0) * ln_x).exp() / denom.sqrt()
            },
            0.0,
            1.0,
            &self.quadrature,
        )?;
        Ok(r.value)
    }

    /// `I(0)`; cached per `n`.
    pub fn separation_integral_at_zero(&self) -> Result<f64> {
        static CACHE: OnceLock<RwLock<HashMap<u32, f64>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(&v) = cache.read().expect("cache poisoned").get(&self.n) {
            return Ok(v);
        }
        let reference = Self {
            quadrature: QuadratureSpec::default(),
            ..*self
        };
        let v = reference.separation_integral_at(MidpointParam {
            z: 0.0,
            one_minus_z: 1.0,
        })?;
        cache.write().expect("cache poisoned").insert(self.n, v);
        Ok(v)
    }

    /// `m_b d(z)` for the midpoint parameter.
    pub fn scaled_separation(&self, param: MidpointParam) -> Result<f64> {
        let p = self.p();
        let z_factor = (0.5 * (1.0 + p) * param.z.ln()).exp();
        Ok(std::f64::consts::SQRT_2 * z_factor * self.separation_integral_at(param)?)
    }

    /// Plate separation `d(z)` in GeV⁻¹, `0 < z < 1`.
    pub fn separation_from_z(&self, bulk: &BulkState, z: f64) -> Result<f64> {
        let param = MidpointParam::from_z(z)?;
        if z == 0.0 {
            return Err(ChameleonError::Domain {
                what: "z",
                value: z,
            });
        }
        Ok(self.scaled_separation(param)? / bulk.m_b)
    }

    /// Inverts `d(z)`; the search runs in `u = ln(z/(1−z))`.
    pub fn z_from_separation(&self, bulk: &BulkState, d: f64) -> Result<Profile> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(ChameleonError::Domain {
                what: "separation",
                value: d,
            });
        }
        let target = d * bulk.m_b;
        let ln_target = target.ln();
        let g = |u: f64| -> Result<f64> {
            Ok(self.scaled_separation(MidpointParam::from_logit(u))?.ln() - ln_target)
        };

        let logit_max = ((1.0 - FULL_SCREENING_ONE_MINUS_Z) / FULL_SCREENING_ONE_MINUS_Z).ln();
        if g(logit_max)? < 0.0 {
            return Ok(Profile::FullyScreened { m_b_d: target });
        }

        let p = self.p();
        let c_p = self.separation_integral_at_zero()?;
        let small_z = (target / (std::f64::consts::SQRT_2 * c_p)).powf(2.0 / (1.0 + p));
        let guess = if small_z < 0.5 {
            (small_z / (1.0 - small_z)).ln()
        } else {
            // 1 − z ~ e^{−m_b d/2} on the screened side
            0.5 * target
        }
        .clamp(LOGIT_MIN, logit_max);

        let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
        let mut step = 1.0;
        loop {
            lo = lo.max(LOGIT_MIN);
            if g(lo)? < 0.0 {
                break;
            }
            if lo == LOGIT_MIN {
                return Err(ChameleonError::SeparationTooSmall { d });
            }
            hi = lo;
            step *= 2.0;
            lo -= step;
        }
        step = 1.0;
        loop {
            hi = hi.min(logit_max);
            if g(hi)? >= 0.0 {
                break;
            }
            lo = hi;
            step *= 2.0;
            hi += step;
        }

        let spec = RootSpec::new(lo, hi)
            .with_rel_tol(1e-13)
            .with_abs_tol(1e-12);
        let u = try_find_root_bracketed(g, &spec)?;
        let param = MidpointParam::from_logit(u);
        Ok(Profile::Solved(ProfileSolution {
            z: param.z,
            one_minus_z: param.one_minus_z,
            phi_0: bulk.phi_b * param.z.powf(p),
            d,
            regime: Regime::classify(target, &self.thresholds),
            m_b_d: target,
        }))
    }

    /// `(n+1)/n · Λ^{4+n}/φ_bⁿ`.
    fn pressure_prefactor(&self, bulk: &BulkState) -> f64 {
        let n = self.nf();
        (n + 1.0) / n * (self.ln_lambda_power() - n * bulk.phi_b.ln()).exp()
    }

    /// `z^{p−1}[h_{1−p}(z) − z h_{−p}(z)]`.
    pub fn pressure_bracket(&self, param: MidpointParam) -> f64 {
        let p = self.p();
        if param.one_minus_z == 0.0 {
            return 0.0;
        }
        if param.one_minus_z < NEAR_ONE_SWITCH {
            return h_difference(p, (-param.one_minus_z).ln_1p());
        }
        let z = param.z;
        z.powf(p - 1.0) * (h_power(1.0 - p, z) - z * h_power(-p, z))
    }

    /// Pressure for a midpoint parameter `0 < z ≤ 1`.
    pub fn pressure_from_z(&self, bulk: &BulkState, z: f64) -> Result<ChameleonPressure> {
        if !(z > 0.0 && z <= 1.0) {
            return Err(ChameleonError::Domain {
                what: "z",
                value: z,
            });
        }
        let param = MidpointParam {
            z,
            one_minus_z: 1.0 - z,
        };
        Ok(ChameleonPressure {
            value: self.pressure_prefactor(bulk) * self.pressure_bracket(param),
            fully_screened: false,
            m_b_d: None,
            profile: None,
        })
    }

    fn pressure_from_profile(
        &self,
        bulk: &BulkState,
        profile: &ProfileSolution,
    ) -> ChameleonPressure {
        let param = MidpointParam {
            z: profile.z,
            one_minus_z: profile.one_minus_z,
        };
        ChameleonPressure {
            value: self.pressure_prefactor(bulk) * self.pressure_bracket(param),
            fully_screened: false,
            m_b_d: Some(profile.m_b_d),
            profile: Some(*profile),
        }
    }

    /// Pressure at density `rho` (GeV⁴) and separation `d` (GeV⁻¹).
    pub fn chameleon_pressure(&self, rho: f64, d: f64) -> Result<ChameleonPressure> {
        let bulk = self.bulk_state(rho)?;
        self.pressure_for_bulk(&bulk, d)
    }

    pub fn pressure_for_bulk(&self, bulk: &BulkState, d: f64) -> Result<ChameleonPressure> {
        Ok(match self.z_from_separation(bulk, d)? {
            Profile::Solved(profile) => self.pressure_from_profile(bulk, &profile),
            Profile::FullyScreened { m_b_d } => ChameleonPressure {
                value: 0.0,
                fully_screened: true,
                m_b_d: Some(m_b_d),
                profile: None,
            },
        })
    }

    /// `c_n` in `F/A = c_n Λ⁴ (Λd)^{−2n/(n+2)}`.
    pub fn vacuum_prefactor(&self) -> Result<f64> {
        let n = self.nf();
        let c_p = self.separation_integral_at_zero()?;
        let e = n / (n + 2.0);
        Ok(((n + 1.0) / n).powi(2)
            * (n * (n + 1.0)).powf(-e)
            * (std::f64::consts::SQRT_2 * c_p).powf(2.0 * e))
    }

    /// The ρ → 0 limit of the pressure (algebraic decay).
    pub fn vacuum_asymptotic_pressure(&self, d: f64) -> Result<ChameleonPressure> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(ChameleonError::Domain {
                what: "separation",
                value: d,
            });
        }
        let n = self.nf();
        let value = self.vacuum_prefactor()?
            * self.lambda.powi(4)
            * (self.lambda * d).powf(-2.0 * n / (n + 2.0));
        Ok(ChameleonPressure {
            value,
            fully_screened: false,
            m_b_d: None,
            profile: None,
        })
    }

    /// Separation from the first integral of the field equation,
    /// `d = 2∫₀^{φ₀} dφ/√(2(V(φ) − V(φ₀)))`, integrated directly in φ.
    pub fn oracle_separation(&self, bulk: &BulkState, phi_0: f64) -> Result<f64> {
        if !(phi_0 > 0.0 && phi_0 < bulk.phi_b) {
            return Err(ChameleonError::Domain {
                what: "midpoint field",
                value: phi_0,
            });
        }
        let n = self.nf();
        // φ = φ₀ s. ΔV = A[(s^{−n} − 1) − (k/A)(1 − s)], A = Λ^{4+n}φ₀^{−n}, k = βρφ₀/m_Pl.
        let ln_a = self.ln_lambda_power() - n * phi_0.ln();
        let k_over_a = (self.beta * bulk.rho / self.m_pl * phi_0).ln() - ln_a;
        let k_over_a = k_over_a.exp();
        let r = integrate_endpoint_singular_with_distance(
            |s| {
                let rest = s.from_hi;
                let dv = if s.from_lo < 0.5 {
                    s.from_lo.powf(-n) - 1.0 - k_over_a * rest
                } else {
                    (-n * (-rest).ln_1p()).exp_m1() - k_over_a * rest
                };
                1.0 / (2.0 * dv).sqrt()
            },
            0.0,
            1.0,
            &self.quadrature,
        )?;
        Ok(2.0 * phi_0 * (-0.5 * ln_a).exp() * r.value)
    }

    /// Ratio of the pressure formula to the directly evaluated potential
    /// difference `V(φ₀) − V(φ_b)` at `d`, and at `d ± δ`.
    pub fn oracle_energy_pressure(
        &self,
        bulk: &BulkState,
        d: f64,
        delta: f64,
    ) -> Result<EnergyRatio> {
        if !(delta > 0.0 && delta < d) {
            return Err(ChameleonError::Domain {
                what: "offset",
                value: delta,
            });
        }
        let ratio_at = |dd: f64| -> Result<f64> {
            match self.z_from_separation(bulk, dd)? {
                Profile::Solved(profile) => Ok(self.energy_ratio(bulk, &profile)),
                Profile::FullyScreened { m_b_d } => Err(ChameleonError::FullyScreened { m_b_d }),
            }
        };
        let ratio = ratio_at(d)?;
        let ratio_minus = ratio_at(d - delta)?;
        let ratio_plus = ratio_at(d + delta)?;
        let drift = ((ratio_minus - ratio).abs().max((ratio_plus - ratio).abs())) / ratio;
        Ok(EnergyRatio {
            ratio,
            ratio_minus,
            ratio_plus,
            drift,
        })
    }

    /// Pressure over `V(φ₀) − V(φ_b)` for a solved profile.
    pub fn energy_ratio(&self, bulk: &BulkState, profile: &ProfileSolution) -> f64 {
        let f = self.pressure_from_profile(bulk, profile).value;
        let dv = self.linearized_potential(bulk.rho, profile.phi_0)
            - self.linearized_potential(bulk.rho, bulk.phi_b);
        f / dv
    }

    /// `m_c d` for the plate material; the thin-wall boundary condition
    /// (φ ≈ 0 at the plates) needs it to be large.
    pub fn plate_validity(&self, plate_rho: f64, d: f64) -> Result<PlateValidity> {
        let plate = self.bulk_state(plate_rho)?;
        let m_c_d = plate.m_b * d;
        Ok(PlateValidity {
            m_c_d,
            warning: m_c_d < PLATE_VALIDITY_MIN,
        })
    }
}

/// Bulk (vacuum-like) state of the gas between the plates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkState {
    /// Energy density, GeV⁴.
    pub rho: f64,
    /// Field at the effective-potential minimum, GeV.
    pub phi_b: f64,
    /// Mass used in the separation integral, GeV.
    pub m_b: f64,
    /// Full mass squared including the `β/m_Pl` term, GeV².
    pub m_b_squared_full: f64,
    /// `βφ_b/m_Pl`.
    pub linearization_ratio: f64,
    pub linearization_warning: bool,
}

/// Midpoint parameter with `1 − z` carried separately so it keeps full
/// precision when `z` is close to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointParam {
    pub z: f64,
    pub one_minus_z: f64,
}

impl MidpointParam {
    pub fn from_z(z: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&z) {
            return Err(ChameleonError::Domain {
                what: "z",
                value: z,
            });
        }
        Ok(Self {
            z,
            one_minus_z: 1.0 - z,
        })
    }

    /// From `u = ln(z/(1−z))`.
    pub fn from_logit(u: f64) -> Self {
        Self {
            z: 1.0 / (1.0 + (-u).exp()),
            one_minus_z: 1.0 / (1.0 + u.exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSolution {
    pub z: f64,
    pub one_minus_z: f64,
    /// Midpoint field, GeV.
    pub phi_0: f64,
    /// Separation, GeV⁻¹.
    pub d: f64,
    pub regime: Regime,
    pub m_b_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Solved(ProfileSolution),
    FullyScreened { m_b_d: f64 },
}

impl Profile {
    pub fn solution(&self) -> Option<&ProfileSolution> {
        match self {
            Profile::Solved(s) => Some(s),
            Profile::FullyScreened { .. } => None,
        }
    }
}

/// Attractive pressure magnitude, GeV⁴.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChameleonPressure {
    pub value: f64,
    pub fully_screened: bool,
    pub m_b_d: Option<f64>,
    pub profile: Option<ProfileSolution>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRatio {
    pub ratio: f64,
    pub ratio_minus: f64,
    pub ratio_plus: f64,
    /// Largest relative change of the ratio across `d ± δ`.
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateValidity {
    pub m_c_d: f64,
    pub warning: bool,
}

/// `h_p(x) = (1 − x^p)/p`, with the `p → 0` limit `−ln x`.
pub fn h(p_index: f64, x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(ChameleonError::Domain {
            what: "x",
            value: x,
        });
    }
    Ok(h_from_ln(p_index, x.ln()))
}

fn h_power(p_index: f64, x: f64) -> f64 {
    (1.0 - x.powf(p_index)) / p_index
}

fn h_from_ln(p_index: f64, ln_x: f64) -> f64 {
    if p_index.abs() < 1e-8 {
        -ln_x * (1.0 + 0.5 * p_index * ln_x)
    } else {
        -(p_index * ln_x).exp_m1() / p_index
    }
}

/// `h_{p−1}(x) − h_p(x)` as a function of `L = ln x`;
/// equals `Σ_{k≥2} (p^{k−1} − (p−1)^{k−1}) L^k/k!`, i.e. `L²/2 + O(L³)`.
fn h_difference(p: f64, ln_x: f64) -> f64 {
    if ln_x.abs() < 0.1 {
        let q = p - 1.0;
        let (mut pk, mut qk) = (p, q);
        let mut lk = ln_x * ln_x * 0.5;
        let mut sum = 0.0;
        for k in 2..=16u32 {
            sum += (pk - qk) * lk;
            pk *= p;
            qk *= q;
            lk *= ln_x / (k + 1) as f64;
        }
        sum
    } else {
        h_from_ln(p - 1.0, ln_x) - h_from_ln(p, ln_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn model(n: u32) -> ChameleonModel {
        ChameleonModel::from_constants(n, 1e4, &Constants::default()).unwrap()
    }

    fn rho_g_per_l(v: f64) -> f64 {
        Constants::default().mass_density_to_natural(v).unwrap()
    }

    fn um(v: f64) -> f64 {
        Constants::default().metres_to_inverse_gev(v * 1e-6)
    }

    #[test]
    fn h_edge_cases() {
        for p in [-0.8, 0.2, 1.0, 3.0] {
            assert_eq!(h(p, 1.0).unwrap(), 0.0);
        }
        assert!((h(1.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert!(rel(h(1e-12, 0.5).unwrap(), std::f64::consts::LN_2) < 1e-10);
        assert!(h(0.5, 0.0).is_err());
        assert!(h(0.5, -1.0).is_err());
    }

    #[test]
    fn h_difference_series_matches_direct() {
        for p in [0.5, 0.2, 1.0 / 9.0] {
            for ln_x in [-0.099f64, -0.05, -0.01] {
                let x = ln_x.exp();
                let direct = h_power(p - 1.0, x) - h_power(p, x);
                let series = h_difference(p, ln_x);
                assert!(
                    rel(series, direct) < 1e-10,
                    "p={p} L={ln_x}: {series} {direct}"
                );
            }
            // Two leading terms once the direct form has cancelled away.
            let ln_x: f64 = -1e-6;
            let leading = 0.5 * ln_x * ln_x + (2.0 * p - 1.0) * ln_x.powi(3) / 6.0;
            assert!(rel(h_difference(p, ln_x), leading) < 1e-12);
        }
    }

    #[test]
    fn invalid_models() {
        let k = Constants::default();
        assert!(ChameleonModel::from_constants(0, 1e4, &k).is_err());
        assert!(ChameleonModel::from_constants(4, 0.0, &k).is_err());
        assert!(ChameleonModel::from_constants(4, -1.0, &k).is_err());
        let m = model(4);
        assert_eq!(m.p(), 0.2);
        assert_eq!((1.0 - m.p()) / m.p(), 4.0);
    }

    #[test]
    fn bulk_minimum_and_mass() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        assert!(m.minimum_residual(&bulk) < 1e-10);
        assert!(bulk.m_b > 0.0);
        let n = 4.0;
        let lin = n * (n + 1.0) * (m.ln_lambda_power() - (n + 2.0) * bulk.phi_b.ln()).exp();
        assert!(rel(bulk.m_b * bulk.m_b, lin) <= bulk.linearization_ratio + 1e-12);
        assert!(!bulk.linearization_warning);
        assert_eq!(m.bulk_state(0.0).unwrap_err(), ChameleonError::VacuumBulk);
        assert!(m.bulk_state(-1.0).is_err());
    }

    #[test]
    fn bulk_field_scaling() {
        let m = model(4);
        let a = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let b = m.bulk_state(rho_g_per_l(5.0) * 32.0).unwrap();
        assert!(rel(a.phi_b / b.phi_b, 2.0) < 1e-13);
    }

    #[test]
    fn linearization_warning_at_huge_coupling() {
        let m = ChameleonModel::from_constants(1, 1e50, &Constants::default()).unwrap();
        let bulk = m.bulk_state(rho_g_per_l(1e-3)).unwrap();
        assert!(bulk.linearization_warning, "{}", bulk.linearization_ratio);
    }

    #[test]
    fn separation_integral_increasing_in_z() {
        let m = model(4);
        let values: Vec<f64> = (1..=9)
            .map(|i| m.separation_integral(i as f64 / 10.0).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
        assert!(m.separation_integral(1.0).is_err());
    }

    #[test]
    fn separation_integral_log_growth_near_one() {
        let m = model(4);
        let i0 = m.separation_integral_at_zero().unwrap();
        let at = |eps: f64| {
            m.separation_integral_at(MidpointParam {
                z: 1.0 - eps,
                one_minus_z: eps,
            })
            .unwrap()
        };
        let a = at(1e-4) - i0;
        let b = at(1e-8) - i0;
        // Slope of I against −ln(1−z) tends to √2.
        let slope = (at(1e-12) - at(1e-8)) / (4.0 * std::f64::consts::LN_10);
        assert!(rel(slope, std::f64::consts::SQRT_2) < 0.05, "{slope}");
        assert!(rel(b / a, 2.0) < 0.15, "{}", b / a);
    }

    #[test]
    fn scaled_separation_independent_of_density_and_coupling() {
        let m = model(4);
        let a = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let b = m.bulk_state(rho_g_per_l(0.3)).unwrap();
        let m2 = m.with_beta(3e5).unwrap();
        let c = m2.bulk_state(rho_g_per_l(2.0)).unwrap();
        let z = 0.37;
        let da = m.separation_from_z(&a, z).unwrap() * a.m_b;
        let db = m.separation_from_z(&b, z).unwrap() * b.m_b;
        let dc = m2.separation_from_z(&c, z).unwrap() * c.m_b;
        assert!(rel(da, db) < 1e-14 && rel(da, dc) < 1e-14);
    }

    #[test]
    fn separation_monotone_and_small_z_law() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let d = |z| m.separation_from_z(&bulk, z).unwrap();
        assert!(d(0.2) < d(0.5) && d(0.5) < d(0.8));
        let p = m.p();
        let ratio = |z: f64| d(z) / z.powf(0.5 * (1.0 + p));
        let limit = std::f64::consts::SQRT_2 * m.separation_integral_at_zero().unwrap() / bulk.m_b;
        for z in [1e-3, 1e-4, 1e-5] {
            assert!(rel(ratio(z), limit) < 0.01, "z={z}");
        }
        assert!(m.separation_from_z(&bulk, 0.0).is_err());
    }

    #[test]
    fn round_trip_midpoint() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let d = m.separation_from_z(&bulk, 0.5).unwrap();
        let sol = *m.z_from_separation(&bulk, d).unwrap().solution().unwrap();
        assert!((sol.z - 0.5).abs() < 1e-8);
        assert!(rel(sol.phi_0, bulk.phi_b * 0.5f64.powf(0.2)) < 1e-8);
    }

    #[test]
    fn regimes_from_m_b_d() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let sol = *m
            .z_from_separation(&bulk, 1e-3 / bulk.m_b)
            .unwrap()
            .solution()
            .unwrap();
        assert!(sol.z < 1e-2);
        assert_eq!(sol.regime, Regime::Algebraic);
        let sol = *m
            .z_from_separation(&bulk, 20.0 / bulk.m_b)
            .unwrap()
            .solution()
            .unwrap();
        assert!(sol.one_minus_z < 1e-3);
        assert_eq!(sol.regime, Regime::Screened);
        let sol = *m
            .z_from_separation(&bulk, 1.0 / bulk.m_b)
            .unwrap()
            .solution()
            .unwrap();
        assert_eq!(sol.regime, Regime::Intermediate);
    }

    #[test]
    fn full_screening_marker() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let p = m.pressure_for_bulk(&bulk, 200.0 / bulk.m_b).unwrap();
        assert!(p.fully_screened);
        assert_eq!(p.value, 0.0);
        assert!((p.m_b_d.unwrap() - 200.0).abs() < 1e-9);
        assert!(m.z_from_separation(&bulk, -1.0).is_err());
    }

    #[test]
    fn pressure_bracket_edges() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        assert_eq!(m.pressure_from_z(&bulk, 1.0).unwrap().value, 0.0);
        assert!(m.pressure_from_z(&bulk, 0.0).is_err());
        // Leading small-z term ((n+1)/n)² Λ^{4+n}/φ_bⁿ z^{p−1}.
        let z: f64 = 1e-4;
        let full = m.pressure_from_z(&bulk, z).unwrap().value;
        let leading = m.pressure_prefactor(&bulk) * 1.25 * z.powf(-0.8);
        assert!(rel(full, leading) < 0.01);
        // Expansion about z = 1 against direct evaluation.
        let eps = 1e-4;
        let direct = m.pressure_bracket(MidpointParam {
            z: 1.0 - eps,
            one_minus_z: eps,
        });
        let series = h_difference(m.p(), (-eps).ln_1p());
        assert!(rel(series, direct) < 1e-6);
        assert!(rel(series, 0.5 * eps * eps) < 2.0 * eps);
    }

    #[test]
    fn pressure_monotone_in_separation_and_density() {
        let m = model(4);
        let rho5 = rho_g_per_l(5.0);
        let p30 = m.chameleon_pressure(rho5, um(30.0)).unwrap().value;
        let p40 = m.chameleon_pressure(rho5, um(40.0)).unwrap().value;
        assert!(p40 < p30);
        let thin = m
            .chameleon_pressure(rho_g_per_l(0.05), um(30.0))
            .unwrap()
            .value;
        assert!(p30 < thin);
    }

    #[test]
    fn deep_vacuum_density_independence() {
        let m = model(4);
        let d = um(30.0);
        let lo = m.chameleon_pressure(rho_g_per_l(1e-4), d).unwrap();
        let hi = m.chameleon_pressure(rho_g_per_l(1e-3), d).unwrap();
        assert!(hi.m_b_d.unwrap() < 0.02);
        assert!(rel(lo.value, hi.value) < 0.01, "{} {}", lo.value, hi.value);
        let vac = m.vacuum_asymptotic_pressure(d).unwrap().value;
        assert!(rel(lo.value, vac) < 0.05);
    }

    fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
        let k = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        (sxy / sxx, sxy * sxy / (sxx * syy))
    }

    // Density swept at fixed d. The prefactor grows like (m_b d)^{2n/(n+2)},
    // so the raw slope sits somewhat above -1.
    #[test]
    fn screening_tail_in_density() {
        let m = model(4);
        let d = um(30.0);
        let reference = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        let t_ref = reference.m_b * d;
        let (mut t, mut y) = (Vec::new(), Vec::new());
        for i in 0..21 {
            let target = 5.0 + 0.5 * i as f64;
            let rho = reference.rho * (target / t_ref).powf(10.0 / 6.0);
            let p = m.chameleon_pressure(rho, d).unwrap();
            t.push(p.m_b_d.unwrap());
            y.push(p.value.ln());
        }
        let (slope, r2) = line_fit(&t, &y);
        assert!(r2 > 0.999 && slope < 0.0, "{slope} {r2}");
        let shape: Vec<f64> = t.iter().map(|&s| -s + (8.0 / 6.0) * s.ln()).collect();
        let (expected, _) = line_fit(&t, &shape);
        assert!(rel(slope, expected) < 0.02, "{slope} vs {expected}");
        let corrected: Vec<f64> = y
            .iter()
            .zip(&t)
            .map(|(v, s)| v - (8.0 / 6.0) * s.ln())
            .collect();
        let (bare, _) = line_fit(&t, &corrected);
        assert!(rel(bare, -1.0) < 0.02, "{bare}");
    }

    #[test]
    fn vacuum_slope_is_closed_form() {
        for n in [1, 4, 6] {
            let m = model(n);
            let f = |d: f64| m.vacuum_asymptotic_pressure(um(d)).unwrap().value.ln();
            let slope = (f(31.0) - f(29.0)) / (31f64.ln() - 29f64.ln());
            let expected = -2.0 * n as f64 / (n as f64 + 2.0);
            assert!((slope - expected).abs() < 1e-6, "n={n} {slope}");
        }
    }

    #[test]
    fn oracle_separation_agrees_with_parametric_form() {
        let m = model(4).with_mass_model(MassModel::Linearized);
        let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
        for z in [0.1, 0.5, 0.9] {
            let d5 = m.separation_from_z(&bulk, z).unwrap();
            let d0 = m
                .oracle_separation(&bulk, bulk.phi_b * z.powf(m.p()))
                .unwrap();
            assert!(rel(d5, d0) < 1e-6, "z={z}: {d5} {d0}");
        }
        assert!(m.oracle_separation(&bulk, bulk.phi_b).is_err());
        let a = m.oracle_separation(&bulk, 0.4 * bulk.phi_b).unwrap();
        let b = m.oracle_separation(&bulk, 0.2 * bulk.phi_b).unwrap();
        assert!(b < a);
    }

    #[test]
    fn energy_ratio_is_constant() {
        let m = model(4);
        let bulk = m.bulk_state(rho_g_per_l(0.05)).unwrap();
        let expected = (5.0f64 / 4.0).powi(2);
        for d_um in [10.0, 30.0, 100.0] {
            let e = m.oracle_energy_pressure(&bulk, um(d_um), um(1.0)).unwrap();
            assert!(rel(e.ratio, expected) < 1e-6, "{e:?}");
            assert!(e.drift < 1e-6);
        }
        let dense = m.bulk_state(rho_g_per_l(50.0)).unwrap();
        let e = m
            .oracle_energy_pressure(&dense, 15.0 / dense.m_b, 0.5 / dense.m_b)
            .unwrap();
        assert!(
            e.ratio.is_finite() && rel(e.ratio, expected) < 1e-3,
            "{e:?}"
        );
    }

    #[test]
    fn plate_validity_flag() {
        let m = model(4);
        let gold = rho_g_per_l(19.3e3);
        let v = m.plate_validity(gold, um(30.0)).unwrap();
        assert!(!v.warning && v.m_c_d > 10.0);
        let v = m.plate_validity(rho_g_per_l(1e-3), um(30.0)).unwrap();
        assert!(v.warning);
    }

    #[test]
    fn grid_monotonicity_all_n() {
        for n in 1..=8 {
            let m = model(n);
            let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
            assert!(m.minimum_residual(&bulk) < 1e-10);
            let zs: Vec<f64> = (1..=50).map(|i| i as f64 / 51.0).collect();
            let d: Vec<f64> = zs
                .iter()
                .map(|&z| m.separation_from_z(&bulk, z).unwrap())
                .collect();
            let f: Vec<f64> = zs
                .iter()
                .map(|&z| m.pressure_from_z(&bulk, z).unwrap().value)
                .collect();
            assert!(d.windows(2).all(|w| w[1] > w[0]), "n={n}");
            assert!(f.windows(2).all(|w| w[1] < w[0]), "n={n}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn round_trip(n in 1u32..=8, log_eps in -6.0f64..0.0, log_z in -4.0f64..0.0, near_one in any::<bool>()) {
                let m = model(n);
                let bulk = m.bulk_state(rho_g_per_l(5.0)).unwrap();
                let param = if near_one {
                    let eps = 10f64.powf(log_eps);
                    MidpointParam { z: 1.0 - eps, one_minus_z: eps }
                } else {
                    MidpointParam::from_z(10f64.powf(log_z).min(0.999_999)).unwrap()
                };
                let d = m.scaled_separation(param).unwrap() / bulk.m_b;
                let sol = *m.z_from_separation(&bulk, d).unwrap().solution().unwrap();
                prop_assert!((sol.z - param.z).abs() < 1e-8, "{} vs {}", sol.z, param.z);
                prop_assert!(sol.phi_0 > 0.0 && sol.phi_0 < bulk.phi_b);
            }

            #[test]
            fn residual_at_any_density(n in 1u32..=8, log_rho in -6.0f64..4.0, log_beta in 0.0f64..8.0) {
                let m = ChameleonModel::from_constants(n, 10f64.powf(log_beta), &Constants::default()).unwrap();
                let bulk = m.bulk_state(rho_g_per_l(10f64.powf(log_rho))).unwrap();
                prop_assert!(m.minimum_residual(&bulk) < 1e-10);
                prop_assert!(bulk.m_b > 0.0);
            }

            #[test]
            fn pressure_non_negative(n in 1u32..=8, log_d in -6.0f64..-3.0, log_rho in -4.0f64..2.0) {
                let m = model(n);
                let d = Constants::default().metres_to_inverse_gev(10f64.powf(log_d));
                let f = m.chameleon_pressure(rho_g_per_l(10f64.powf(log_rho)), d).unwrap();
                prop_assert!(f.value >= 0.0);
                prop_assert_eq!(f.fully_screened, f.value == 0.0);
            }
        }
    }
}
