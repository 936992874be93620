//! Physical constants, O₂ molecular constants and energy-unit conversion.
//!
//! Everything inside the crate is SI. Spectroscopic units (cm⁻¹, GHz) and
//! temperature-equivalent energies only appear at I/O boundaries through
//! [`convert_energy`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant h (J·s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Pascals per bar.
pub const PASCAL_PER_BAR: f64 = 1.0e5;

/// CODATA 2018 universal constants used by the models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniversalConstants {
    /// Bohr magneton µB (J/T).
    pub mu_b: f64,
    /// Reduced Planck constant ħ (J·s).
    pub hbar: f64,
    /// Boltzmann constant k_B (J/K).
    pub k_b: f64,
    /// Vacuum permeability µ0 (T·m/A).
    pub mu_0: f64,
}

/// The one set of universal constants. Read-only by construction.
pub const CODATA: UniversalConstants = UniversalConstants {
    mu_b: 9.274_010_078_3e-24,
    hbar: PLANCK / (2.0 * std::f64::consts::PI),
    k_b: 1.380_649e-23,
    mu_0: 1.256_637_062_12e-6,
};

/// Default O₂ X³Σg⁻ spin-spin constant λ, in GHz.
pub const O2_LAMBDA_GHZ: f64 = 59.501;
/// Default O₂ spin-rotation constant γ, in GHz.
pub const O2_GAMMA_GHZ: f64 = -0.2526;
/// Signed electron g-factor entering the Zeeman term −g µB S·B.
pub const ELECTRON_G: f64 = -2.0023;

/// Molecular constants of the spin-rotation Hamiltonian, stored in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MolecularConstants {
    /// Spin-rotation constant γ (J).
    pub gamma: f64,
    /// Spin-spin constant λ (J).
    pub lambda: f64,
    /// Signed electron g-factor.
    pub g_factor: f64,
}

impl Default for MolecularConstants {
    fn default() -> Self {
        Self::oxygen()
    }
}

impl MolecularConstants {
    /// Ground-state O₂ values (standard spectroscopic constants, not fitted here).
    pub fn oxygen() -> Self {
        Self {
            gamma: ghz_to_joule(O2_GAMMA_GHZ),
            lambda: ghz_to_joule(O2_LAMBDA_GHZ),
            g_factor: ELECTRON_G,
        }
    }

    /// Builds constants from spectroscopic GHz values.
    pub fn from_ghz(gamma_ghz: f64, lambda_ghz: f64, g_factor: f64) -> Result<Self> {
        let c = Self {
            gamma: ghz_to_joule(gamma_ghz),
            lambda: ghz_to_joule(lambda_ghz),
            g_factor,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.lambda.is_finite() && self.g_factor.is_finite()) {
            return Err(Error::InvalidInput("molecular constants must be finite".into()));
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "spin-spin constant must be positive, got {} J",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn gamma_ghz(&self) -> f64 {
        joule_to_ghz(self.gamma)
    }

    pub fn lambda_ghz(&self) -> f64 {
        joule_to_ghz(self.lambda)
    }

    /// |g|·µB, the spin magnetic moment scale (J/T).
    pub fn spin_moment(&self) -> f64 {
        self.g_factor.abs() * CODATA.mu_b
    }
}

/// Energy unit tags accepted at I/O boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyUnit {
    Joule,
    InverseCentimeter,
    Gigahertz,
    Kelvin,
}

impl EnergyUnit {
    /// Joules per one unit of `self`.
    fn joules_per_unit(self) -> f64 {
        match self {
            EnergyUnit::Joule => 1.0,
            // E = h c ν̃, ν̃ in m⁻¹
            EnergyUnit::InverseCentimeter => PLANCK * SPEED_OF_LIGHT * 100.0,
            EnergyUnit::Gigahertz => PLANCK * 1.0e9,
            EnergyUnit::Kelvin => CODATA.k_b,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            EnergyUnit::Joule => "joule",
            EnergyUnit::InverseCentimeter => "inverse-centimeter",
            EnergyUnit::Gigahertz => "gigahertz",
            EnergyUnit::Kelvin => "kelvin",
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EnergyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "joule" | "j" => Ok(EnergyUnit::Joule),
            "inverse-centimeter" | "cm-1" | "cm^-1" | "wavenumber" => {
                Ok(EnergyUnit::InverseCentimeter)
            }
            "gigahertz" | "ghz" => Ok(EnergyUnit::Gigahertz),
            "kelvin" | "k" => Ok(EnergyUnit::Kelvin),
            other => Err(Error::InvalidInput(format!("unknown energy unit tag '{other}'"))),
        }
    }
}

/// Converts an energy between unit tags.
pub fn convert_energy(value: f64, from: EnergyUnit, to: EnergyUnit) -> f64 {
    if from == to {
        return value;
    }
    value * (from.joules_per_unit() / to.joules_per_unit())
}

/// String-tagged variant of [`convert_energy`]; unknown tags are rejected.
pub fn convert_energy_tagged(value: f64, from: &str, to: &str) -> Result<f64> {
    Ok(convert_energy(value, from.parse()?, to.parse()?))
}

pub fn ghz_to_joule(ghz: f64) -> f64 {
    convert_energy(ghz, EnergyUnit::Gigahertz, EnergyUnit::Joule)
}

pub fn joule_to_ghz(joule: f64) -> f64 {
    convert_energy(joule, EnergyUnit::Joule, EnergyUnit::Gigahertz)
}
