//! Apparatus configuration, physical constants and the directly derived
//! cavity quantities.
//!
//! All angular frequencies are rad/s. Conversions to Hz happen only at the
//! I/O boundary (see [`hz_to_rad`] / [`rad_to_hz`]).

use std::f64::consts::PI;

use crate::error::{Error, Result, Violation};

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Coupling efficiency that places the optical-spring resonance of
/// [`ExperimentConfig::nominal`] at 2 pi x 1018 Hz; obtained with
/// `spring::calibrate_coupling_efficiency`.
pub const CALIBRATED_COUPLING_EFFICIENCY: f64 = 0.646_507_334;

/// Exact SI / CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Speed of light, m/s.
    pub c: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    c: 299_792_458.0,
    k_b: 1.380_649e-23,
    hbar: 1.054_571_817e-34,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CONSTANTS
    }
}

/// Physical inputs of the detuned-cavity apparatus.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Cavity length, m.
    pub cavity_length: f64,
    /// Input mirror power transmissivity.
    pub input_transmissivity: f64,
    /// End mirror power transmissivity. Carried for completeness; no
    /// derived quantity depends on it.
    pub end_transmissivity: f64,
    /// Laser wavelength, m.
    pub wavelength: f64,
    /// Incident laser power, W.
    pub input_power: f64,
    /// Fraction of the input power that couples into the cavity mode.
    pub coupling_efficiency: f64,
    /// Detuning in units of the cavity linewidth; the sign is the detuning
    /// direction.
    pub detuning_over_gamma: f64,
    pub input_mirror_mass: f64,
    pub end_mirror_mass: f64,
    /// Free mechanical resonance of the end-mirror longitudinal mode, rad/s.
    pub free_resonance: f64,
    pub mechanical_q: f64,
    /// Ambient temperature, K.
    pub ambient_temperature: f64,
}

impl ExperimentConfig {
    /// The gram-scale mirror apparatus at 100 mW, locked at half a linewidth,
    /// with unit coupling efficiency.
    pub fn nominal() -> Self {
        Self {
            cavity_length: 0.1,
            input_transmissivity: 800e-6,
            end_transmissivity: 1e-5,
            wavelength: 1.064e-6,
            input_power: 0.1,
            coupling_efficiency: 1.0,
            detuning_over_gamma: 0.5,
            input_mirror_mass: 0.25,
            end_mirror_mass: 1e-3,
            free_resonance: hz_to_rad(12.7),
            mechanical_q: 19950.0,
            ambient_temperature: 295.0,
        }
    }

    /// [`Self::nominal`] with the coupling efficiency calibrated to the measured
    /// resonance.
    pub fn calibrated() -> Self {
        Self {
            coupling_efficiency: CALIBRATED_COUPLING_EFFICIENCY,
            ..Self::nominal()
        }
    }

    /// Same apparatus with the light switched off.
    pub fn without_light(&self) -> Self {
        Self {
            input_power: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_config(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Returns every violated invariant. An empty list means the config is valid.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |field: &'static str, value: f64, ok: bool, rule: &str| {
        if !value.is_finite() {
            out.push(Violation {
                field,
                message: format!("must be finite, got {value}"),
            });
        } else if !ok {
            out.push(Violation {
                field,
                message: format!("{rule}, got {value}"),
            });
        }
    };
    let c = config;
    check("cavity_length", c.cavity_length, c.cavity_length > 0.0, "must be > 0");
    check(
        "input_transmissivity",
        c.input_transmissivity,
        c.input_transmissivity > 0.0 && c.input_transmissivity < 1.0,
        "must lie in (0, 1)",
    );
    check(
        "end_transmissivity",
        c.end_transmissivity,
        (0.0..1.0).contains(&c.end_transmissivity),
        "must lie in [0, 1)",
    );
    check("wavelength", c.wavelength, c.wavelength > 0.0, "must be > 0");
    check("input_power", c.input_power, c.input_power >= 0.0, "must be >= 0");
    check(
        "coupling_efficiency",
        c.coupling_efficiency,
        c.coupling_efficiency > 0.0 && c.coupling_efficiency <= 1.0,
        "must lie in (0, 1]",
    );
    check("detuning_over_gamma", c.detuning_over_gamma, true, "");
    check(
        "input_mirror_mass",
        c.input_mirror_mass,
        c.input_mirror_mass > 0.0,
        "must be > 0",
    );
    check(
        "end_mirror_mass",
        c.end_mirror_mass,
        c.end_mirror_mass > 0.0,
        "must be > 0",
    );
    check(
        "free_resonance",
        c.free_resonance,
        c.free_resonance > 0.0,
        "must be > 0",
    );
    check("mechanical_q", c.mechanical_q, c.mechanical_q >= 0.5, "must be >= 0.5");
    check(
        "ambient_temperature",
        c.ambient_temperature,
        c.ambient_temperature > 0.0,
        "must be > 0",
    );
    out
}

/// Quantities that follow directly from an [`ExperimentConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityDerived {
    /// Cavity half-width at half-maximum, rad/s.
    pub linewidth: f64,
    pub resonant_gain: f64,
    /// Intracavity power at the operating detuning, W.
    pub circulating_power: f64,
    /// Reduced mass of the two mirrors, kg.
    pub reduced_mass: f64,
    /// Mechanical damping rate Omega_M / Q_M, rad/s.
    pub mechanical_damping: f64,
}

impl CavityDerived {
    /// Absolute detuning in rad/s.
    pub fn detuning(&self, config: &ExperimentConfig) -> f64 {
        config.detuning_over_gamma * self.linewidth
    }
}

pub fn reduced_mass(m1: f64, m2: f64) -> f64 {
    m1 * m2 / (m1 + m2)
}

pub fn derive_cavity(config: &ExperimentConfig) -> Result<CavityDerived> {
    config.validate()?;
    let ti = config.input_transmissivity;
    let linewidth = ti * CONSTANTS.c / (4.0 * config.cavity_length);
    let resonant_gain = 4.0 / ti;
    let d = config.detuning_over_gamma;
    let circulating_power =
        config.coupling_efficiency * config.input_power * resonant_gain / (1.0 + d * d);
    Ok(CavityDerived {
        linewidth,
        resonant_gain,
        circulating_power,
        reduced_mass: reduced_mass(config.input_mirror_mass, config.end_mirror_mass),
        mechanical_damping: config.free_resonance / config.mechanical_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn linewidth_and_gain_match_apparatus() {
        let d = derive_cavity(&ExperimentConfig::nominal()).unwrap();
        assert!(rel(d.linewidth, hz_to_rad(95e3)) < 0.02);
        assert!(rel(d.resonant_gain, 5e3) < 0.02);
        assert_eq!(d.resonant_gain, 4.0 / 800e-6);
        assert_eq!(d.linewidth, 800e-6 * CONSTANTS.c / 0.4);
    }

    #[test]
    fn reduced_mass_of_mirror_pair() {
        let d = derive_cavity(&ExperimentConfig::nominal()).unwrap();
        // 0.25 * 1e-3 / 0.251
        assert!(rel(d.reduced_mass, 9.960_159_362_549_8e-4) < 1e-12);
        assert!(d.reduced_mass < 1e-3);
        assert_eq!(reduced_mass(0.25, 1e-3), reduced_mass(1e-3, 0.25));
    }

    #[test]
    fn circulating_power_and_damping() {
        let mut c = ExperimentConfig::nominal();
        c.coupling_efficiency = 0.5;
        let d = derive_cavity(&c).unwrap();
        assert!(rel(d.circulating_power, 0.5 * 0.1 * 5000.0 / 1.25) < 1e-12);
        assert!(rel(d.mechanical_damping, hz_to_rad(12.7) / 19950.0) < 1e-15);
    }

    #[test]
    fn defaults_validate() {
        assert!(validate_config(&ExperimentConfig::nominal()).is_empty());
    }

    #[test]
    fn zero_transmissivity_is_flagged() {
        let mut c = ExperimentConfig::nominal();
        c.input_transmissivity = 0.0;
        let v = validate_config(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "input_transmissivity");
    }

    #[test]
    fn negative_mass_is_flagged() {
        let mut c = ExperimentConfig::nominal();
        c.end_mirror_mass = -1e-3;
        let v = validate_config(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "end_mirror_mass");
        assert!(matches!(derive_cavity(&c), Err(Error::Validation(_))));
    }

    #[test]
    fn non_finite_and_multiple_violations() {
        let mut c = ExperimentConfig::nominal();
        c.detuning_over_gamma = f64::NAN;
        c.mechanical_q = 0.1;
        c.coupling_efficiency = 1.5;
        let fields: Vec<_> = validate_config(&c).iter().map(|v| v.field).collect();
        assert_eq!(
            fields,
            ["coupling_efficiency", "detuning_over_gamma", "mechanical_q"]
        );
    }

    #[test]
    fn linewidth_scaling() {
        let base = derive_cavity(&ExperimentConfig::nominal()).unwrap();
        let mut c = ExperimentConfig::nominal();
        c.input_transmissivity *= 2.0;
        assert!(rel(derive_cavity(&c).unwrap().linewidth, 2.0 * base.linewidth) < 1e-15);
        let mut c = ExperimentConfig::nominal();
        c.cavity_length *= 2.0;
        assert!(rel(derive_cavity(&c).unwrap().linewidth, 0.5 * base.linewidth) < 1e-15);
    }

    #[test]
    fn derivation_is_deterministic() {
        let c = ExperimentConfig::nominal();
        let a = derive_cavity(&c).unwrap();
        let b = derive_cavity(&c).unwrap();
        assert_eq!(a.linewidth.to_bits(), b.linewidth.to_bits());
        assert_eq!(a.circulating_power.to_bits(), b.circulating_power.to_bits());
        assert_eq!(a.reduced_mass.to_bits(), b.reduced_mass.to_bits());
    }
}
