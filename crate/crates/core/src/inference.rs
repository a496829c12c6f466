//! Thermometry and lifetime metrics of the oscillator mode.
//!
//! Band-limited motion is converted to an effective temperature by matching
//! it to the thermally driven displacement spectrum
//! `4 k_B T G/M / ((w0^2 - w^2)^2 + G^2 w^2)` integrated over the same band,
//! with `(w0, G)` taken from a resonance fit of the same configuration.

use serde::{Deserialize, Serialize};

use crate::dynamics::Plant;
use crate::error::{Error, Result};
use crate::fit::LorentzianFit;
use crate::model::{hz_to_rad, CONSTANTS};
use crate::noise::{BudgetModel, NoiseBudget};
use crate::quadrature::integrate_relative;
use crate::spectral::BandRms;

const QUADRATURE_REL_TOL: f64 = 1e-9;

/// Resonance parameters used for band correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// rad/s
    pub omega: f64,
    /// rad/s
    pub gamma: f64,
}

impl From<&LorentzianFit> for Resonance {
    fn from(fit: &LorentzianFit) -> Self {
        Self {
            omega: fit.omega_eff,
            gamma: fit.gamma_eff,
        }
    }
}

impl From<&Plant> for Resonance {
    fn from(p: &Plant) -> Self {
        Self {
            omega: p.omega_eff(),
            gamma: p.net_damping(),
        }
    }
}

/// One-sided thermally driven displacement PSD, m^2/Hz, at `f_hz`.
pub fn thermal_displacement_psd(f_hz: f64, temperature: f64, res: Resonance, mass: f64) -> f64 {
    let w = hz_to_rad(f_hz);
    let a = res.omega * res.omega - w * w;
    4.0 * CONSTANTS.k_b * temperature * res.gamma / mass / (a * a + res.gamma * res.gamma * w * w)
}

/// `int_{lo}^{hi} S_thermal df` per kelvin, m^2/K.
pub fn thermal_band_power_per_kelvin(f_lo: f64, f_hi: f64, res: Resonance, mass: f64) -> f64 {
    let f0 = res.omega / (2.0 * std::f64::consts::PI);
    let f = |x: f64| thermal_displacement_psd(x, 1.0, res, mass);
    integrate_relative(&f, f_lo, f_hi, &[f0], QUADRATURE_REL_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thermometry {
    /// K
    pub t_eff: f64,
    /// Full-band rms from equipartition, m.
    pub x_rms: f64,
    /// Fraction of the thermal-shape power that falls in the band.
    pub band_fraction: f64,
}

/// Solves `x_band^2 = T int_band S_thermal(T = 1) df` for `T`.
pub fn effective_temperature(band: &BandRms, res: Resonance, mass: f64) -> Result<Thermometry> {
    let power = band.x_rms * band.x_rms;
    if !(power > 0.0) {
        return Err(Error::NonPositiveBandPower(power));
    }
    let per_k = thermal_band_power_per_kelvin(band.f_lo, band.f_hi, res, mass);
    let t_eff = power / per_k;
    let full_per_k = CONSTANTS.k_b / (mass * res.omega * res.omega);
    Ok(Thermometry {
        t_eff,
        x_rms: (t_eff * full_per_k).sqrt(),
        band_fraction: per_k / full_per_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoherence {
    /// s
    pub tau: f64,
    pub n_osc: f64,
    pub occupation: f64,
}

pub fn decoherence_metrics(t_eff: f64, omega_eff: f64, gamma_eff: f64) -> Decoherence {
    let (kb, hbar) = (CONSTANTS.k_b, CONSTANTS.hbar);
    Decoherence {
        tau: 2.0 * std::f64::consts::PI * hbar * omega_eff / (gamma_eff * kb * t_eff),
        n_osc: hbar * omega_eff / (kb * t_eff) * omega_eff / gamma_eff,
        occupation: kb * t_eff / (hbar * omega_eff),
    }
}

/// Inferred state of the oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub omega_eff_rad_s: f64,
    pub gamma_eff_rad_s: f64,
    pub q_eff: f64,
    pub t_eff_k: f64,
    pub t_eff_uncertainty_k: f64,
    pub x_rms_m: f64,
    pub occupation: f64,
    pub decoherence_time_s: f64,
    pub n_osc: f64,
    pub cooling_factor: f64,
}

impl ModeSummary {
    pub fn from_state(omega_eff: f64, gamma_eff: f64, t_eff: f64, mass: f64, ambient: f64) -> Self {
        let d = decoherence_metrics(t_eff, omega_eff, gamma_eff);
        Self {
            omega_eff_rad_s: omega_eff,
            gamma_eff_rad_s: gamma_eff,
            q_eff: omega_eff / gamma_eff,
            t_eff_k: t_eff,
            t_eff_uncertainty_k: 0.0,
            x_rms_m: (CONSTANTS.k_b * t_eff / (mass * omega_eff * omega_eff)).sqrt(),
            occupation: d.occupation,
            decoherence_time_s: d.tau,
            n_osc: d.n_osc,
            cooling_factor: ambient / t_eff,
        }
    }

    /// Free mechanical mode in equilibrium with the environment.
    pub fn mechanical(plant: &Plant) -> Self {
        let c = &plant.config;
        Self::from_state(
            c.free_resonance,
            plant.mechanical_damping(),
            c.ambient_temperature,
            plant.mass(),
            c.ambient_temperature,
        )
    }

    pub fn with_uncertainty(mut self, sigma: f64) -> Self {
        self.t_eff_uncertainty_k = sigma;
        self
    }
}

/// Relative uncertainty of a band temperature: statistical scatter of the
/// averaged periodogram in quadrature with a calibration systematic.
pub fn temperature_relative_uncertainty(band: &BandRms, segment_count: usize, rbw_hz: f64, calibration_systematic: f64) -> f64 {
    let independent = ((band.f_hi - band.f_lo) / rbw_hz).max(1.0) * segment_count.max(1) as f64;
    (1.0 / independent + calibration_systematic * calibration_systematic).sqrt()
}

/// Model-level temperature of the mirror motion from equipartition, K.
/// Exact for the two-pole plant since every driving source shares its shape.
pub fn modeled_temperature(plant: &Plant, budget: &NoiseBudget) -> f64 {
    let g = plant.net_damping();
    let w = plant.omega_eff();
    let thermal = if budget.thermal {
        plant.config.ambient_temperature * plant.mechanical_damping() / g
    } else {
        0.0
    };
    let freq = plant.mass() * w.powi(4) * budget.frequency_noise_asd.powi(2) / (4.0 * CONSTANTS.k_b * g);
    thermal + freq
}

/// Band power of the modeled spectrum (all sources, lines included), m^2.
pub fn modeled_band_power(plant: &Plant, budget: &NoiseBudget, f_lo: f64, f_hi: f64) -> Result<f64> {
    plant.require_stable()?;
    let model = BudgetModel::new(plant, budget)?;
    let f0 = plant.omega_eff() / (2.0 * std::f64::consts::PI);
    let continuum = integrate_relative(&|f| model.continuum(f).total(), f_lo, f_hi, &[f0], QUADRATURE_REL_TOL);
    let lines: f64 = model
        .line_powers()
        .into_iter()
        .filter(|(f, _)| *f >= f_lo && *f <= f_hi)
        .map(|(_, p)| p)
        .sum();
    Ok(continuum + lines)
}

/// Band-corrected temperature that the measurement procedure would report
/// for a perfectly estimated spectrum and resonance.
pub fn modeled_band_temperature(plant: &Plant, budget: &NoiseBudget, f_lo: f64, f_hi: f64) -> Result<f64> {
    let power = modeled_band_power(plant, budget, f_lo, f_hi)?;
    Ok(power / thermal_band_power_per_kelvin(f_lo, f_hi, Resonance::from(plant), plant.mass()))
}

/// White frequency-noise level (m/sqrt(Hz)) that makes the band-corrected
/// temperature of `plant` equal `target_t`, other sources as in `budget`.
pub fn calibrate_frequency_noise(plant: &Plant, budget: &NoiseBudget, f_lo: f64, f_hi: f64, target_t: f64) -> Result<f64> {
    let without = NoiseBudget {
        frequency_noise_asd: 0.0,
        ..budget.clone()
    };
    let unit = NoiseBudget {
        thermal: false,
        frequency_noise_asd: 1.0,
        acoustic_lines: Vec::new(),
        sensing_floor_asd: 0.0,
        calibration_line: budget.calibration_line,
    };
    let reference = thermal_band_power_per_kelvin(f_lo, f_hi, Resonance::from(plant), plant.mass());
    let other = modeled_band_power(plant, &without, f_lo, f_hi)?;
    let per_unit = modeled_band_power(plant, &unit, f_lo, f_hi)?;
    let needed = target_t * reference - other;
    if needed <= 0.0 {
        return Err(Error::InvalidArgument {
            name: "target_t",
            reason: format!("{target_t} K is below the temperature of the remaining sources"),
        });
    }
    Ok((needed / per_unit).sqrt())
}

/// Declared target and tolerance for one reported quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingReport {
    pub cooling_factor: f64,
    pub dilution_factor: f64,
    pub diluted_q: f64,
    pub n_osc_gain: f64,
    pub final_t_eff_k: f64,
    pub thermal_bound_without_spring_k: f64,
    pub thermal_bound_with_spring_k: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Reported values of the gram-scale mirror cooling run and their stated
/// uncertainties.
pub fn headline_targets() -> Vec<Target> {
    let t = |name: &str, value: f64, tolerance: f64| Target {
        name: name.to_string(),
        value,
        tolerance,
    };
    vec![
        t("final_t_eff_k", 6.9e-3, 1.4e-3),
        t("cooling_factor", 43000.0, 11000.0),
        t("n_osc_gain", 196.0, 40.0),
        t("diluted_q", 1.6e6, 0.08e6),
    ]
}

/// Compares a final mode against the initial (mechanical) one.
pub fn cooling_report(initial: &ModeSummary, final_: &ModeSummary, targets: &[Target]) -> CoolingReport {
    let dilution_factor = final_.omega_eff_rad_s / initial.omega_eff_rad_s;
    let diluted_q = initial.q_eff * dilution_factor;
    let mut report = CoolingReport {
        cooling_factor: initial.t_eff_k / final_.t_eff_k,
        dilution_factor,
        diluted_q,
        n_osc_gain: final_.n_osc / initial.n_osc,
        final_t_eff_k: final_.t_eff_k,
        thermal_bound_without_spring_k: initial.t_eff_k / initial.q_eff,
        thermal_bound_with_spring_k: initial.t_eff_k / diluted_q,
        checks: Vec::new(),
        pass: true,
    };
    for t in targets {
        let measured = match t.name.as_str() {
            "cooling_factor" => report.cooling_factor,
            "dilution_factor" => report.dilution_factor,
            "diluted_q" => report.diluted_q,
            "n_osc_gain" => report.n_osc_gain,
            "final_t_eff_k" => report.final_t_eff_k,
            "thermal_bound_without_spring_k" => report.thermal_bound_without_spring_k,
            _ => f64::NAN,
        };
        let pass = (measured - t.value).abs() <= t.tolerance;
        report.pass &= pass;
        report.checks.push(Check {
            name: t.name.clone(),
            measured,
            target: t.value,
            tolerance: t.tolerance,
            pass,
        });
    }
    report
}
