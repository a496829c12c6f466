//! Gain-ladder scenario runner.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use optospring::inference::{cooling_report, headline_targets, CoolingReport, ModeSummary};
use optospring::noise::displacement_psd;
use optospring::pipeline::{measure, Measurement};
use optospring::series::linear_grid;
use optospring::{rad_to_hz, Error, LorentzianFit, NoiseBudget, Plant};

use crate::bundle::{read_manifest, write_table, Bundle, Manifest, StageStatus, Stamped};
use crate::error::CliError;
use crate::profile::Profile;

/// Model spectrum grid written next to each estimate, Hz.
const BUDGET_GRID: (f64, f64, usize) = (1.0, 5000.0, 5000);

#[derive(Debug, Clone)]
pub struct Scenario {
    pub profile: Profile,
    pub out_dir: PathBuf,
}

pub fn entry_seed(master: u64, index: usize) -> u64 {
    master ^ index as u64
}

pub fn entry_dir(index: usize) -> String {
    format!("entry_{index:02}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub source: String,
    pub omega_eff_rad_s: f64,
    pub omega_err_rad_s: f64,
    pub gamma_eff_rad_s: f64,
    pub gamma_err_rad_s: f64,
    pub amplitude: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub points: usize,
    pub covers_peak: bool,
}

impl FitRecord {
    fn new(source: &str, f: &LorentzianFit) -> Self {
        Self {
            source: source.to_string(),
            omega_eff_rad_s: f.omega_eff,
            omega_err_rad_s: f.omega_err,
            gamma_eff_rad_s: f.gamma_eff,
            gamma_err_rad_s: f.gamma_err,
            amplitude: f.amplitude,
            residual_norm: f.residual_norm,
            iterations: f.iterations,
            points: f.points,
            covers_peak: f.covers_peak,
        }
    }
}

/// Per-gain summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub index: usize,
    pub servo_gain_rad_s: f64,
    pub entry_seed: u64,
    pub mode: ModeSummary,
    pub fits: Vec<FitRecord>,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub band_bins: usize,
    pub band_x_rms_m: f64,
    pub segment_count: usize,
    pub rbw_hz: f64,
    pub calibration_scale: f64,
    pub model_omega_eff_rad_s: f64,
    pub model_gamma_eff_rad_s: f64,
    pub modeled_band_temperature_k: f64,
    pub modeled_temperature_k: f64,
}

impl EntrySummary {
    fn new(index: usize, plant: &Plant, m: &Measurement) -> Self {
        let mut fits = vec![FitRecord::new("transfer_function", &m.sweep_fit)];
        if let Some(f) = &m.psd_fit {
            fits.push(FitRecord::new("psd", f));
        }
        Self {
            index,
            servo_gain_rad_s: plant.servo.damping_gain,
            entry_seed: m.seed,
            mode: m.summary,
            fits,
            band_lo_hz: m.band.f_lo,
            band_hi_hz: m.band.f_hi,
            band_bins: m.band.bins,
            band_x_rms_m: m.band.x_rms,
            segment_count: m.psd.segment_count,
            rbw_hz: m.psd.rbw_hz,
            calibration_scale: m.psd.calibration_scale,
            model_omega_eff_rad_s: plant.omega_eff(),
            model_gamma_eff_rad_s: plant.net_damping(),
            modeled_band_temperature_k: m.modeled_band_temperature,
            modeled_temperature_k: m.modeled_temperature,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpringRecord {
    pub linewidth_rad_s: f64,
    pub resonant_gain: f64,
    pub circulating_power_w: f64,
    pub reduced_mass_kg: f64,
    pub k0_n_per_m: f64,
    pub omega_eff_rad_s: f64,
    pub f_eff_hz: f64,
    pub optical_antidamping_rad_s: f64,
    pub dilution_factor: f64,
    pub diluted_q: f64,
    pub thermal_cooling_bound_k: f64,
}

impl SpringRecord {
    fn new(plant: &Plant) -> Self {
        let s = &plant.spring;
        Self {
            linewidth_rad_s: plant.derived.linewidth,
            resonant_gain: plant.derived.resonant_gain,
            circulating_power_w: plant.derived.circulating_power,
            reduced_mass_kg: plant.derived.reduced_mass,
            k0_n_per_m: s.k0,
            omega_eff_rad_s: s.omega_eff,
            f_eff_hz: rad_to_hz(s.omega_eff),
            optical_antidamping_rad_s: s.optical_antidamping,
            dilution_factor: s.dilution_factor,
            diluted_q: s.diluted_q,
            thermal_cooling_bound_k: s.thermal_cooling_bound,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub entries: Vec<EntrySummary>,
    pub report: CoolingReport,
}

impl Scenario {
    pub fn new(profile: Profile, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            profile,
            out_dir: out_dir.into(),
        }
    }

    /// Checks the whole scenario and builds one plant per ladder gain.
    pub fn validate(&self) -> Result<Vec<Plant>, CliError> {
        let p = &self.profile;
        let gains = &p.servo.gains_rad_s;
        if gains.is_empty() {
            return Err(CliError::Scenario("gain ladder is empty".into()));
        }
        if let Some(w) = gains.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(CliError::Scenario(format!(
                "gain ladder must be strictly ascending, found {} then {}",
                w[0], w[1]
            )));
        }
        let config = p.experiment();
        config.validate()?;
        p.budget().validate()?;
        p.synthesis().validate()?;
        p.analysis().validate()?;
        gains
            .iter()
            .map(|g| {
                let servo = p.servo(*g);
                servo.validate()?;
                let plant = Plant::new(&config, servo)?.with_exact_spring(p.servo.exact_spring);
                plant.require_stable()?;
                Ok(plant)
            })
            .collect()
    }
}

fn stage_detail(e: &CliError) -> Option<String> {
    Some(e.to_string())
}

/// Runs every ladder entry, writes the bundle and the cross-gain report.
/// On a stage failure the files written so far are kept, the manifest is
/// marked incomplete and the first error is returned.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutcome, CliError> {
    let plants = scenario.validate()?;
    let profile = &scenario.profile;
    let budget = profile.budget();
    let synth = profile.synthesis();
    let analysis = profile.analysis();
    let master = profile.seed;
    let mut bundle = Bundle::create(&scenario.out_dir, &profile.config_hash(), master)?;

    bundle.write_profile(&profile.to_toml())?;
    bundle.write_json("spring.json", &SpringRecord::new(&plants[0]))?;
    bundle.stage("validate", StageStatus::Ok, None);

    let results: Vec<Result<Measurement, Error>> = plants
        .par_iter()
        .enumerate()
        .map(|(i, plant)| measure(plant, &budget, &synth, &analysis, entry_seed(master, i)))
        .collect();

    let grid = linear_grid(BUDGET_GRID.0, BUDGET_GRID.1, BUDGET_GRID.2);
    let mut entries = Vec::new();
    let mut first_error: Option<CliError> = None;
    for (i, (plant, result)) in plants.iter().zip(results).enumerate() {
        let stage = entry_dir(i);
        let written = result.map_err(CliError::from).and_then(|m| {
            write_entry(&mut bundle, i, plant, &budget, &m, &grid, profile.output.write_timeseries)?;
            Ok(EntrySummary::new(i, plant, &m))
        });
        match written {
            Ok(summary) => {
                bundle.stage(&stage, StageStatus::Ok, None);
                entries.push(summary);
            }
            Err(e) => {
                bundle.stage(&stage, StageStatus::Failed, stage_detail(&e));
                first_error.get_or_insert(e);
            }
        }
    }

    if let Some(e) = first_error {
        bundle.stage("cooling_report", StageStatus::Skipped, None);
        bundle.finish()?;
        return Err(e);
    }

    write_ladder(&mut bundle, &entries)?;
    let report = aggregate_entries(bundle.root(), bundle.config_hash(), entries.len(), &plants[0]);
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            bundle.stage("cooling_report", StageStatus::Failed, stage_detail(&e));
            bundle.finish()?;
            return Err(e);
        }
    };
    bundle.write_json("cooling_report.json", &report)?;
    bundle.stage("cooling_report", StageStatus::Ok, None);
    let manifest = bundle.finish()?;
    Ok(RunOutcome {
        manifest,
        entries,
        report,
    })
}

fn write_entry(
    bundle: &mut Bundle,
    index: usize,
    plant: &Plant,
    budget: &NoiseBudget,
    m: &Measurement,
    grid: &[f64],
    write_timeseries: bool,
) -> Result<(), CliError> {
    let dir = entry_dir(index);
    let extra = [
        ("entry_index", index.to_string()),
        ("entry_seed", m.seed.to_string()),
        ("servo_gain_rad_s", format!("{:e}", plant.servo.damping_gain)),
    ];
    bundle.write_csv(&format!("{dir}/transfer_function.csv"), &extra, |w, meta| m.sweep.write_csv(w, meta))?;
    bundle.write_csv(&format!("{dir}/psd.csv"), &extra, |w, meta| m.psd.write_csv(w, meta))?;
    let model = displacement_psd(grid, plant, budget)?;
    bundle.write_csv(&format!("{dir}/budget.csv"), &extra, |w, meta| model.write_csv(w, meta))?;
    if write_timeseries {
        bundle.write_csv(&format!("{dir}/timeseries.csv"), &extra, |w, meta| m.series.write_csv(w, meta))?;
    }
    bundle.write_json(&format!("{dir}/summary.json"), &EntrySummary::new(index, plant, m))?;
    Ok(())
}

fn write_ladder(bundle: &mut Bundle, entries: &[EntrySummary]) -> Result<(), CliError> {
    let header = [
        "index",
        "entry_seed",
        "servo_gain_rad_s",
        "omega_eff_rad_s",
        "gamma_eff_rad_s",
        "q_eff",
        "band_x_rms_m",
        "t_eff_k",
        "t_eff_uncertainty_k",
        "modeled_band_temperature_k",
        "occupation",
        "decoherence_time_s",
        "n_osc",
        "cooling_factor",
    ];
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let m = &e.mode;
            vec![
                e.index.to_string(),
                e.entry_seed.to_string(),
                format!("{:e}", e.servo_gain_rad_s),
                format!("{:e}", m.omega_eff_rad_s),
                format!("{:e}", m.gamma_eff_rad_s),
                format!("{:e}", m.q_eff),
                format!("{:e}", e.band_x_rms_m),
                format!("{:e}", m.t_eff_k),
                format!("{:e}", m.t_eff_uncertainty_k),
                format!("{:e}", e.modeled_band_temperature_k),
                format!("{:e}", m.occupation),
                format!("{:e}", m.decoherence_time_s),
                format!("{:e}", m.n_osc),
                format!("{:e}", m.cooling_factor),
            ]
        })
        .collect();
    bundle.write_csv("ladder.csv", &[], |w, meta| write_table(w, meta, &header, &rows))
}

/// Reads an entry summary and checks its stamp.
pub fn read_entry(root: &Path, index: usize, expected_hash: &str) -> Result<EntrySummary, CliError> {
    let path = root.join(entry_dir(index)).join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let doc: Stamped<EntrySummary> = serde_json::from_str(&text)
        .map_err(|e| CliError::io(&path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    if doc.config_hash != expected_hash {
        return Err(CliError::HashMismatch {
            path,
            expected: expected_hash.to_string(),
            found: doc.config_hash,
        });
    }
    Ok(doc.data)
}

fn aggregate_entries(root: &Path, hash: &str, count: usize, plant: &Plant) -> Result<CoolingReport, CliError> {
    let entries = (0..count)
        .map(|i| read_entry(root, i, hash))
        .collect::<Result<Vec<_>, _>>()?;
    let coldest = entries.last().ok_or_else(|| CliError::Scenario("no entries to aggregate".into()))?;
    Ok(cooling_report(&ModeSummary::mechanical(plant), &coldest.mode, &headline_targets()))
}

/// Rebuilds the cross-gain report from a finished bundle on disk, refusing
/// summaries whose config hash differs from the manifest's.
pub fn aggregate_report(root: &Path) -> Result<CoolingReport, CliError> {
    let manifest = read_manifest(root)?;
    let path = root.join("scenario.toml");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let profile = Profile::from_toml(&text)?;
    if profile.config_hash() != manifest.config_hash {
        return Err(CliError::HashMismatch {
            path,
            expected: manifest.config_hash,
            found: profile.config_hash(),
        });
    }
    let count = profile.servo.gains_rad_s.len();
    let config = profile.experiment();
    let plant = Plant::new(&config, profile.servo(profile.servo.gains_rad_s[0]))?;
    aggregate_entries(root, &manifest.config_hash, count, &plant)
}
