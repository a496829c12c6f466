//! TOML scenario profiles.
//!
//! A user profile is merged table-by-table over the embedded default, so it
//! only needs the keys it changes. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use optospring::noise::NoiseBudget;
use optospring::pipeline::{AnalysisParams, FitSource, SynthesisParams};
use optospring::{hz_to_rad, ExperimentConfig, ServoConfig, SpectralLine, Window};

use crate::error::CliError;

pub const DEFAULT_PROFILE: &str = include_str!("../profiles/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub seed: u64,
    pub experiment: ExperimentSection,
    pub servo: ServoSection,
    pub noise: NoiseSection,
    pub synthesis: SynthesisSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub cavity_length_m: f64,
    pub input_transmissivity: f64,
    pub end_transmissivity: f64,
    pub wavelength_m: f64,
    pub input_power_w: f64,
    pub coupling_efficiency: f64,
    pub detuning_over_gamma: f64,
    pub input_mirror_mass_kg: f64,
    pub end_mirror_mass_kg: f64,
    pub free_resonance_hz: f64,
    pub mechanical_q: f64,
    pub ambient_temperature_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoSection {
    pub gains_rad_s: Vec<f64>,
    pub lock_crossover_hz: f64,
    pub exact_spring: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub frequency_hz: f64,
    pub rms_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub thermal: bool,
    pub frequency_noise_asd_m_rthz: f64,
    pub sensing_floor_asd_m_rthz: f64,
    pub calibration_line_hz: f64,
    pub calibration_line_rms_m: f64,
    #[serde(default)]
    pub acoustic_lines: Vec<LineEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub readout_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowName {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSourceName {
    TransferFunction,
    Psd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub band_hz: [f64; 2],
    pub segment_length: usize,
    pub overlap: f64,
    pub window: WindowName,
    /// First, last and step of the driven sweep, Hz.
    pub sweep_hz: [f64; 3],
    pub sweep_noise: f64,
    pub calibration_systematic: f64,
    pub fit_source: FitSourceName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// The full-rate displacement record; about 100 MB per ladder step at the
    /// default rate and duration.
    pub write_timeseries: bool,
}

/// Recursively overlays `patch` on `base`. Tables merge key by key; any other
/// value, arrays included, replaces the base value.
fn merge(base: &mut toml::Table, patch: toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl Profile {
    pub fn builtin() -> Self {
        Self::from_toml("").expect("embedded profile is valid")
    }

    /// Parses `text` as a patch over the embedded default.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut base: toml::Table = DEFAULT_PROFILE
            .parse()
            .map_err(|e: toml::de::Error| CliError::Profile(format!("embedded default: {e}")))?;
        let patch: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Profile(e.to_string()))?;
        merge(&mut base, patch);
        toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Profile(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            cavity_length: e.cavity_length_m,
            input_transmissivity: e.input_transmissivity,
            end_transmissivity: e.end_transmissivity,
            wavelength: e.wavelength_m,
            input_power: e.input_power_w,
            coupling_efficiency: e.coupling_efficiency,
            detuning_over_gamma: e.detuning_over_gamma,
            input_mirror_mass: e.input_mirror_mass_kg,
            end_mirror_mass: e.end_mirror_mass_kg,
            free_resonance: hz_to_rad(e.free_resonance_hz),
            mechanical_q: e.mechanical_q,
            ambient_temperature: e.ambient_temperature_k,
        }
    }

    pub fn servo(&self, gain: f64) -> ServoConfig {
        ServoConfig {
            damping_gain: gain,
            lock_crossover_hz: self.servo.lock_crossover_hz,
            enabled: true,
        }
    }

    pub fn budget(&self) -> NoiseBudget {
        let n = &self.noise;
        NoiseBudget {
            thermal: n.thermal,
            frequency_noise_asd: n.frequency_noise_asd_m_rthz,
            acoustic_lines: n
                .acoustic_lines
                .iter()
                .map(|l| SpectralLine {
                    frequency_hz: l.frequency_hz,
                    rms_amplitude: l.rms_m,
                })
                .collect(),
            sensing_floor_asd: n.sensing_floor_asd_m_rthz,
            calibration_line: SpectralLine {
                frequency_hz: n.calibration_line_hz,
                rms_amplitude: n.calibration_line_rms_m,
            },
        }
    }

    pub fn synthesis(&self) -> SynthesisParams {
        SynthesisParams {
            duration: self.synthesis.duration_s,
            sample_rate: self.synthesis.sample_rate_hz,
            readout_gain: self.synthesis.readout_gain,
        }
    }

    pub fn analysis(&self) -> AnalysisParams {
        let a = &self.analysis;
        AnalysisParams {
            band: (a.band_hz[0], a.band_hz[1]),
            segment_length: a.segment_length,
            overlap: a.overlap,
            window: match a.window {
                WindowName::Hann => Window::Hann,
                WindowName::Rectangular => Window::Rectangular,
            },
            sweep_lo: a.sweep_hz[0],
            sweep_hi: a.sweep_hz[1],
            sweep_step: a.sweep_hz[2],
            sweep_noise: a.sweep_noise,
            calibration_systematic: a.calibration_systematic,
            fit_source: match a.fit_source {
                FitSourceName::TransferFunction => FitSource::TransferFunction,
                FitSourceName::Psd => FitSource::Psd,
            },
        }
    }

    /// SHA-256 of the canonical JSON form of everything except the seed.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("profile serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("seed");
        }
        let bytes = serde_json::to_vec(&value).expect("profile serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }
}
