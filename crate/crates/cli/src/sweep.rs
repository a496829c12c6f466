//! One-parameter sweeps over model-level mode summaries.
//!
//! Each row rebuilds the plant with one parameter replaced. Unless the servo
//! gain itself is swept, the servo stays at the last (strongest) ladder gain.
//! Rows whose plant is statically or dynamically unstable are kept with a
//! status instead of numbers.

use std::str::FromStr;

use rayon::prelude::*;

use optospring::inference::{modeled_temperature, ModeSummary};
use optospring::{rad_to_hz, Error, Plant};

use crate::bundle::{write_table, Bundle};
use crate::error::CliError;
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    DetuningOverGamma,
    InputPower,
    CouplingEfficiency,
    ServoGain,
}

impl SweepParameter {
    pub const NAMES: [&'static str; 4] = ["detuning_over_gamma", "input_power_w", "coupling_efficiency", "servo_gain"];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::DetuningOverGamma => Self::NAMES[0],
            SweepParameter::InputPower => Self::NAMES[1],
            SweepParameter::CouplingEfficiency => Self::NAMES[2],
            SweepParameter::ServoGain => Self::NAMES[3],
        }
    }
}

impl FromStr for SweepParameter {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "detuning_over_gamma" => Ok(SweepParameter::DetuningOverGamma),
            "input_power_w" => Ok(SweepParameter::InputPower),
            "coupling_efficiency" => Ok(SweepParameter::CouplingEfficiency),
            "servo_gain" => Ok(SweepParameter::ServoGain),
            other => Err(CliError::Scenario(format!(
                "unknown sweep parameter {other:?}; expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Stable,
    StaticallyUnstable,
    DynamicallyUnstable,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Stable => "stable",
            RowStatus::StaticallyUnstable => "statically_unstable",
            RowStatus::DynamicallyUnstable => "dynamically_unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub status: RowStatus,
    /// Static optical spring constant, N/m.
    pub k0: f64,
    /// Present for stable rows.
    pub mode: Option<ModeSummary>,
}

fn row(profile: &Profile, parameter: SweepParameter, value: f64) -> Result<SweepRow, CliError> {
    let mut config = profile.experiment();
    let ladder = &profile.servo.gains_rad_s;
    let mut gain = *ladder
        .last()
        .ok_or_else(|| CliError::Scenario("gain ladder is empty".into()))?;
    match parameter {
        SweepParameter::DetuningOverGamma => config.detuning_over_gamma = value,
        SweepParameter::InputPower => config.input_power = value,
        SweepParameter::CouplingEfficiency => config.coupling_efficiency = value,
        SweepParameter::ServoGain => gain = value,
    }
    let servo = profile.servo(gain);
    servo.validate()?;
    let derived = optospring::derive_cavity(&config)?;
    let k0 = optospring::spring::static_spring_k0(&config, &derived);
    let plant = match Plant::new(&config, servo) {
        Ok(p) => p.with_exact_spring(profile.servo.exact_spring),
        Err(Error::StaticallyUnstable { .. }) => {
            return Ok(SweepRow {
                value,
                status: RowStatus::StaticallyUnstable,
                k0,
                mode: None,
            })
        }
        Err(e) => return Err(e.into()),
    };
    if !plant.stability().stable {
        return Ok(SweepRow {
            value,
            status: RowStatus::DynamicallyUnstable,
            k0,
            mode: None,
        });
    }
    let t = modeled_temperature(&plant, &profile.budget());
    let c = &plant.config;
    Ok(SweepRow {
        value,
        status: RowStatus::Stable,
        k0,
        mode: Some(ModeSummary::from_state(
            plant.omega_eff(),
            plant.net_damping(),
            t,
            plant.mass(),
            c.ambient_temperature,
        )),
    })
}

/// One row per value, in input order.
pub fn sweep_parameter(profile: &Profile, parameter: SweepParameter, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Scenario("sweep needs at least one value".into()));
    }
    profile.budget().validate()?;
    values.par_iter().map(|v| row(profile, parameter, *v)).collect()
}

pub const SWEEP_HEADER: [&str; 12] = [
    "value",
    "status",
    "k0_n_per_m",
    "omega_eff_rad_s",
    "f_eff_hz",
    "gamma_eff_rad_s",
    "q_eff",
    "t_eff_k",
    "occupation",
    "decoherence_time_s",
    "n_osc",
    "cooling_factor",
];

pub fn write_sweep(bundle: &mut Bundle, parameter: SweepParameter, rows: &[SweepRow]) -> Result<(), CliError> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![format!("{:e}", r.value), r.status.as_str().to_string(), format!("{:e}", r.k0)];
            match &r.mode {
                Some(m) => cells.extend(
                    [
                        m.omega_eff_rad_s,
                        rad_to_hz(m.omega_eff_rad_s),
                        m.gamma_eff_rad_s,
                        m.q_eff,
                        m.t_eff_k,
                        m.occupation,
                        m.decoherence_time_s,
                        m.n_osc,
                        m.cooling_factor,
                    ]
                    .iter()
                    .map(|v| format!("{v:e}")),
                ),
                None => cells.extend(std::iter::repeat_n(String::new(), 9)),
            }
            cells
        })
        .collect();
    let extra = [("parameter", parameter.name().to_string())];
    bundle.write_csv("sweep.csv", &extra, |w, meta| write_table(w, meta, &SWEEP_HEADER, &table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_parameter_rejected() {
        assert!("cavity_length_m".parse::<SweepParameter>().is_err());
        for n in SweepParameter::NAMES {
            assert_eq!(n.parse::<SweepParameter>().unwrap().name(), n);
        }
    }

    #[test]
    fn detuning_through_zero() {
        let p = Profile::builtin();
        let values = [-0.2, -0.05, 0.0, 0.05, 0.25, 0.5];
        let rows = sweep_parameter(&p, SweepParameter::DetuningOverGamma, &values).unwrap();
        assert!(rows[0].k0 < 0.0 && rows[1].k0 < 0.0);
        assert_eq!(rows[2].k0, 0.0);
        assert!(rows[3].k0 > 0.0);
        assert_eq!(rows[0].status, RowStatus::StaticallyUnstable);
        let m0 = rows[2].mode.unwrap();
        assert_eq!(m0.omega_eff_rad_s, p.experiment().free_resonance);
        let stable: Vec<f64> = rows.iter().filter_map(|r| r.mode.map(|m| m.omega_eff_rad_s)).collect();
        assert!(stable.iter().all(|w| *w >= m0.omega_eff_rad_s));
    }
}
