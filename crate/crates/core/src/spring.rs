//! Radiation-pressure optical spring of a detuned cavity.
//!
//! The force on the cavity length is `F = -K x + M Gamma (i Omega x)`, so a
//! positive `Gamma` is anti-damping. Both coefficients are evaluated from
//! the static spring constant `K0`, the linewidth and the detuning.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{CavityDerived, ExperimentConfig, CONSTANTS};

const RELAXATION: f64 = 0.5;
const MAX_ITERATIONS: usize = 200;
const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Optical spring constant and mass-normalized optical (anti-)damping at one
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringResponse {
    /// rad/s
    pub frequency: f64,
    /// N/m
    pub spring_constant: f64,
    /// rad/s, already divided by the reduced mass.
    pub damping_coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringSummary {
    /// Static optical spring constant, N/m.
    pub k0: f64,
    /// Shifted resonance, rad/s.
    pub omega_eff: f64,
    /// Optical anti-damping evaluated at `omega_eff`, rad/s.
    pub optical_antidamping: f64,
    /// Optical spring constant at `omega_eff`, N/m.
    pub spring_at_resonance: f64,
    pub dilution_factor: f64,
    pub diluted_q: f64,
    /// Thermal-noise-only temperature bound at critical damping, K.
    pub thermal_cooling_bound: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilutionMetrics {
    pub dilution_factor: f64,
    pub diluted_q: f64,
    pub thermal_cooling_bound: f64,
}

/// Static spring constant `K0 = 2/c dP/dL`, N/m. Odd in the detuning.
pub fn static_spring_k0(config: &ExperimentConfig, _derived: &CavityDerived) -> f64 {
    let d = config.detuning_over_gamma;
    let ti = config.input_transmissivity;
    let power = config.coupling_efficiency * config.input_power;
    128.0 * PI * power * d / (ti * ti * CONSTANTS.c * config.wavelength) / (1.0 + d * d)
}

fn response_with_k0(omega: f64, k0: f64, config: &ExperimentConfig, derived: &CavityDerived) -> SpringResponse {
    let d = config.detuning_over_gamma;
    let w = omega / derived.linewidth;
    let a = 1.0 + d * d - w * w;
    let denom = a * a + 4.0 * w * w;
    SpringResponse {
        frequency: omega,
        spring_constant: k0 * a / denom,
        damping_coefficient: 2.0 * k0 / (derived.reduced_mass * derived.linewidth) / denom,
    }
}

pub fn spring_response(omega: f64, config: &ExperimentConfig, derived: &CavityDerived) -> SpringResponse {
    response_with_k0(omega, static_spring_k0(config, derived), config, derived)
}

/// Solves `Omega_eff^2 = Omega_M^2 + K(Omega_eff)/M` by relaxed fixed-point
/// iteration started from the adiabatic value.
pub fn effective_resonance(config: &ExperimentConfig, derived: &CavityDerived) -> Result<SpringSummary> {
    config.validate()?;
    let k0 = static_spring_k0(config, derived);
    let m = derived.reduced_mass;
    let om2 = config.free_resonance * config.free_resonance;

    let target = |omega: f64| om2 + response_with_k0(omega, k0, config, derived).spring_constant / m;

    let start = target(0.0);
    if start <= 0.0 {
        return Err(Error::StaticallyUnstable { omega_sq: start });
    }
    let mut omega = start.sqrt();
    let mut residual = f64::INFINITY;
    for iteration in 0..=MAX_ITERATIONS {
        let t = target(omega);
        residual = (omega * omega - t).abs() / (omega * omega);
        if residual <= RESIDUAL_TOLERANCE {
            let r = response_with_k0(omega, k0, config, derived);
            let dil = dilution_from(omega, config);
            return Ok(SpringSummary {
                k0,
                omega_eff: omega,
                optical_antidamping: r.damping_coefficient,
                spring_at_resonance: r.spring_constant,
                dilution_factor: dil.dilution_factor,
                diluted_q: dil.diluted_q,
                thermal_cooling_bound: dil.thermal_cooling_bound,
                iterations: iteration,
                residual,
            });
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
        if t <= 0.0 {
            return Err(Error::StaticallyUnstable { omega_sq: t });
        }
        omega = (1.0 - RELAXATION) * omega + RELAXATION * t.sqrt();
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        last: omega,
        residual,
    })
}

fn dilution_from(omega_eff: f64, config: &ExperimentConfig) -> DilutionMetrics {
    let dilution_factor = omega_eff / config.free_resonance;
    let mechanical_damping = config.free_resonance / config.mechanical_q;
    DilutionMetrics {
        dilution_factor,
        diluted_q: config.mechanical_q * dilution_factor,
        thermal_cooling_bound: config.ambient_temperature * mechanical_damping / omega_eff,
    }
}

pub fn dilution_metrics(summary: &SpringSummary, config: &ExperimentConfig) -> DilutionMetrics {
    dilution_from(summary.omega_eff, config)
}

/// Finds the coupling efficiency in (0, 1] that places the shifted resonance
/// at `target_omega` (rad/s), by bisection on the monotone map from coupling
/// to resonance.
pub fn calibrate_coupling_efficiency(config: &ExperimentConfig, target_omega: f64) -> Result<f64> {
    let omega_at = |eta: f64| -> Result<f64> {
        let c = ExperimentConfig {
            coupling_efficiency: eta,
            ..config.clone()
        };
        let d = crate::model::derive_cavity(&c)?;
        Ok(effective_resonance(&c, &d)?.omega_eff - target_omega)
    };
    let (mut lo, mut hi) = (1e-9, 1.0);
    let f_lo = omega_at(lo)?;
    let f_hi = omega_at(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidArgument {
            name: "target_omega",
            reason: format!(
                "{target_omega:.6e} rad/s not reachable with coupling efficiency in (0, 1]"
            ),
        });
    }
    let rising = f_hi > f_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = omega_at(mid)?;
        if (f > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
