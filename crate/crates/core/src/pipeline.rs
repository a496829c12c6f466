//! Single-configuration measurement chain.
//!
//! Synthesizes the modeled displacement noise of one plant, adds the
//! acoustic and calibration lines, passes it through an uncalibrated readout
//! gain, and then analyses it the way the measurement does: Welch estimate,
//! line calibration, a driven response sweep with a resonance fit, band RMS
//! and band-corrected thermometry.
//!
//! Sub-seeds for the synthesis, line phases and sweep noise are drawn in a
//! fixed order from a ChaCha20 stream seeded with the entry seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{force_response_sweep, Plant};
use crate::error::{Error, Result};
use crate::fit::{fit_lorentzian, fit_transfer_function, LorentzianFit};
use crate::inference::{
    effective_temperature, modeled_band_temperature, modeled_temperature, temperature_relative_uncertainty, ModeSummary,
    Resonance, Thermometry,
};
use crate::model::rad_to_hz;
use crate::noise::{inject_calibration_line, synthesize_with, BudgetModel, NoiseBudget};
use crate::series::{TimeSeries, TransferFunction};
use crate::spectral::{band_rms, calibrate_spectrum, estimate_psd, BandRms, PsdEstimate, Window};

/// Half-width of the PSD fit window in units of the resonance width.
pub const PSD_FIT_HALF_WIDTH: f64 = 2.5;
/// Bins excluded on each side of a known line in the PSD fit.
const LINE_GUARD_BINS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisParams {
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// Readout units per metre. Removed by the line calibration.
    pub readout_gain: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            duration: 60.0,
            sample_rate: 65536.0,
            readout_gain: 2.5e9,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, v: f64| Error::InvalidArgument {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        };
        for (name, v) in [
            ("duration", self.duration),
            ("sample_rate", self.sample_rate),
            ("readout_gain", self.readout_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(name, v));
            }
        }
        Ok(())
    }
}

/// Which resonance fit feeds the band correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSource {
    TransferFunction,
    Psd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    /// Thermometry band, Hz.
    pub band: (f64, f64),
    pub segment_length: usize,
    pub overlap: f64,
    pub window: Window,
    /// Driven sweep grid: first, last and step, Hz.
    pub sweep_lo: f64,
    pub sweep_hi: f64,
    pub sweep_step: f64,
    /// Relative multiplicative noise on each sweep point.
    pub sweep_noise: f64,
    /// Relative calibration systematic on the temperature.
    pub calibration_systematic: f64,
    pub fit_source: FitSource,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            band: (850.0, 1100.0),
            segment_length: 98_304,
            overlap: 0.5,
            window: Window::Hann,
            sweep_lo: 20.0,
            sweep_hi: 3000.0,
            sweep_step: 1.0,
            sweep_noise: 0.01,
            calibration_systematic: 0.2,
            fit_source: FitSource::TransferFunction,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidArgument { name, reason });
        let (lo, hi) = self.band;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return bad("band", format!("need 0 < lo < hi, got ({lo}, {hi})"));
        }
        if !(self.sweep_lo > 0.0 && self.sweep_lo < self.sweep_hi && self.sweep_step > 0.0) {
            return bad(
                "sweep",
                format!(
                    "need 0 < lo < hi and step > 0, got {}..{} step {}",
                    self.sweep_lo, self.sweep_hi, self.sweep_step
                ),
            );
        }
        if !(self.sweep_noise.is_finite() && (0.0..0.5).contains(&self.sweep_noise)) {
            return bad("sweep_noise", format!("must lie in [0, 0.5), got {}", self.sweep_noise));
        }
        if !(self.calibration_systematic.is_finite() && self.calibration_systematic >= 0.0) {
            return bad(
                "calibration_systematic",
                format!("must be >= 0, got {}", self.calibration_systematic),
            );
        }
        Ok(())
    }

    pub fn sweep_grid(&self) -> Vec<f64> {
        let n = ((self.sweep_hi - self.sweep_lo) / self.sweep_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.sweep_lo + i as f64 * self.sweep_step).collect()
    }
}

/// Everything produced for one configuration.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub seed: u64,
    pub series: TimeSeries,
    /// Calibrated displacement PSD.
    pub psd: PsdEstimate,
    pub sweep: TransferFunction,
    pub sweep_fit: LorentzianFit,
    pub psd_fit: Option<LorentzianFit>,
    pub band: BandRms,
    pub thermometry: Thermometry,
    pub summary: ModeSummary,
    /// Band-corrected temperature of the modeled spectrum, K.
    pub modeled_band_temperature: f64,
    /// Equipartition temperature of the modeled continuum, K.
    pub modeled_temperature: f64,
}

impl Measurement {
    pub fn resonance_fit(&self) -> &LorentzianFit {
        self.psd_fit.as_ref().unwrap_or(&self.sweep_fit)
    }
}

struct SubSeeds {
    noise: u64,
    calibration: u64,
    sweep: u64,
    lines: ChaCha20Rng,
}

impl SubSeeds {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self {
            noise: rng.next_u64(),
            calibration: rng.next_u64(),
            sweep: rng.next_u64(),
            lines: ChaCha20Rng::seed_from_u64(rng.next_u64()),
        }
    }
}

/// Displacement record of the plant under `budget`, in metres.
pub fn synthesize_displacement(plant: &Plant, budget: &NoiseBudget, synth: &SynthesisParams, seed: u64) -> Result<TimeSeries> {
    synth.validate()?;
    plant.require_stable()?;
    let model = BudgetModel::new(plant, budget)?;
    let mut seeds = SubSeeds::new(seed);
    let mut series = synthesize_with(|f| model.continuum(f).total(), synth.duration, synth.sample_rate, seeds.noise)?;
    for (f, power) in model.line_powers() {
        series = inject_calibration_line(&series, f, power.sqrt(), seeds.lines.next_u64())?;
    }
    let cal = budget.calibration_line;
    inject_calibration_line(&series, cal.frequency_hz, cal.rms_amplitude, seeds.calibration)
}

/// Driven response of the plant on the analysis grid with multiplicative
/// measurement noise on each point.
pub fn measure_sweep(plant: &Plant, analysis: &AnalysisParams, seed: u64) -> Result<TransferFunction> {
    let mut tf = force_response_sweep(plant, &analysis.sweep_grid(), false)?;
    if analysis.sweep_noise > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for h in tf.response.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *h *= 1.0 + analysis.sweep_noise * e;
        }
    }
    Ok(tf)
}

/// Fits the PSD within `PSD_FIT_HALF_WIDTH` widths of `around`, excluding
/// bins near known lines.
pub fn fit_psd_peak(psd: &PsdEstimate, around: Resonance, exclude_hz: &[f64]) -> Result<LorentzianFit> {
    let w_lo = (around.omega - PSD_FIT_HALF_WIDTH * around.gamma).max(around.omega / 10.0);
    let w_hi = around.omega + PSD_FIT_HALF_WIDTH * around.gamma;
    let guard = LINE_GUARD_BINS * psd.bin_spacing();
    let (f, p): (Vec<f64>, Vec<f64>) = psd
        .frequency_hz
        .iter()
        .zip(&psd.psd)
        .filter(|(f, p)| {
            **f >= rad_to_hz(w_lo)
                && **f <= rad_to_hz(w_hi)
                && **p > 0.0
                && exclude_hz.iter().all(|x| (*f - x).abs() > guard)
        })
        .map(|(f, p)| (*f, *p))
        .unzip();
    fit_lorentzian(&f, &p, None)
}

/// Runs the full chain for one plant.
pub fn measure(
    plant: &Plant,
    budget: &NoiseBudget,
    synth: &SynthesisParams,
    analysis: &AnalysisParams,
    seed: u64,
) -> Result<Measurement> {
    analysis.validate()?;
    let nyquist = 0.5 * synth.sample_rate;
    if analysis.band.1 >= nyquist {
        return Err(Error::Aliasing {
            what: "band",
            frequency_hz: analysis.band.1,
            nyquist_hz: nyquist,
        });
    }
    let seeds = SubSeeds::new(seed);
    let displacement = synthesize_displacement(plant, budget, synth, seed)?;
    let readout = displacement.scaled(synth.readout_gain);
    let raw = estimate_psd(&readout, analysis.segment_length, analysis.overlap, analysis.window)?;
    let cal = budget.calibration_line;
    let mut psd = calibrate_spectrum(&raw, cal.frequency_hz, cal.rms_amplitude)?;
    psd.seed = Some(seed);

    let sweep = measure_sweep(plant, analysis, seeds.sweep)?;
    let sweep_fit = fit_transfer_function(&sweep)?;
    let psd_fit = match analysis.fit_source {
        FitSource::TransferFunction => None,
        FitSource::Psd => {
            let mut exclude: Vec<f64> = budget.acoustic_lines.iter().map(|l| l.frequency_hz).collect();
            exclude.push(cal.frequency_hz);
            Some(fit_psd_peak(&psd, Resonance::from(&sweep_fit), &exclude)?)
        }
    };
    let fit = psd_fit.as_ref().unwrap_or(&sweep_fit);

    let band = band_rms(&psd.to_series(), analysis.band.0, analysis.band.1)?;
    let thermometry = effective_temperature(&band, Resonance::from(fit), plant.mass())?;
    let rel = temperature_relative_uncertainty(&band, psd.segment_count, psd.rbw_hz, analysis.calibration_systematic);
    let summary = ModeSummary::from_state(
        fit.omega_eff,
        fit.gamma_eff,
        thermometry.t_eff,
        plant.mass(),
        plant.config.ambient_temperature,
    )
    .with_uncertainty(rel * thermometry.t_eff);

    Ok(Measurement {
        seed,
        modeled_band_temperature: modeled_band_temperature(plant, budget, analysis.band.0, analysis.band.1)?,
        modeled_temperature: modeled_temperature(plant, budget),
        series: displacement,
        psd,
        sweep,
        sweep_fit,
        psd_fit,
        band,
        thermometry,
        summary,
    })
}

/// Continuum temperature predicted for the plant without running the chain.
pub fn predicted_summary(plant: &Plant, budget: &NoiseBudget, analysis: &AnalysisParams) -> Result<ModeSummary> {
    let t = modeled_band_temperature(plant, budget, analysis.band.0, analysis.band.1)?;
    Ok(ModeSummary::from_state(
        plant.omega_eff(),
        plant.net_damping(),
        t,
        plant.mass(),
        plant.config.ambient_temperature,
    ))
}
