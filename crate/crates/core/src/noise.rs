//! Noise sources acting on the mirror, the composed displacement spectrum,
//! and seeded synthesis of time series with a prescribed one-sided PSD.
//!
//! Source models:
//!
//! * thermal force noise `S_F = 4 k_B T_M M Gamma_M`, filtered by the closed
//!   loop susceptibility;
//! * laser frequency noise as a white cavity-length-equivalent drive,
//!   filtered by the spring transfer `K_total H`;
//! * discrete acoustic lines, filtered the same way;
//! * an additive sensing floor that does not drive the mirror.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::dynamics::Plant;
use crate::error::{Error, Result};
use crate::model::{hz_to_rad, CavityDerived, ExperimentConfig, CONSTANTS};
use crate::series::{check_ascending, write_meta, SpectrumSeries, TimeSeries};

/// White displacement-equivalent frequency-noise level, m/sqrt(Hz), that
/// puts the coldest configuration of the calibrated apparatus at 6.9 mK.
/// This is a calibration, see `inference::calibrate_frequency_noise`.
pub const CALIBRATED_FREQUENCY_NOISE_ASD: f64 = 3.5915e-17;

/// Default sensing floor, m/sqrt(Hz).
pub const DEFAULT_SENSING_FLOOR_ASD: f64 = 3.0e-19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub frequency_hz: f64,
    /// m rms
    pub rms_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget {
    /// Include fluctuation-dissipation force noise from the mechanical loss.
    pub thermal: bool,
    /// m/sqrt(Hz)
    pub frequency_noise_asd: f64,
    pub acoustic_lines: Vec<SpectralLine>,
    /// m/sqrt(Hz)
    pub sensing_floor_asd: f64,
    pub calibration_line: SpectralLine,
}

impl NoiseBudget {
    pub fn thermal_only() -> Self {
        Self {
            thermal: true,
            frequency_noise_asd: 0.0,
            acoustic_lines: Vec::new(),
            sensing_floor_asd: 0.0,
            calibration_line: Self::default_calibration_line(),
        }
    }

    pub fn silent() -> Self {
        Self {
            thermal: false,
            ..Self::thermal_only()
        }
    }

    pub fn default_calibration_line() -> SpectralLine {
        SpectralLine {
            frequency_hz: 12e3,
            rms_amplitude: 1e-15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, v: f64| Error::InvalidArgument {
            name,
            reason: format!("must be finite and >= 0, got {v}"),
        };
        for (name, v) in [
            ("frequency_noise_asd", self.frequency_noise_asd),
            ("sensing_floor_asd", self.sensing_floor_asd),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(name, v));
            }
        }
        for line in self.acoustic_lines.iter().chain([&self.calibration_line]) {
            if !(line.frequency_hz.is_finite() && line.frequency_hz > 0.0) {
                return Err(Error::InvalidArgument {
                    name: "line_frequency_hz",
                    reason: format!("must be > 0, got {}", line.frequency_hz),
                });
            }
            if !(line.rms_amplitude.is_finite() && line.rms_amplitude >= 0.0) {
                return Err(bad("line_rms_amplitude", line.rms_amplitude));
            }
        }
        Ok(())
    }
}

impl Default for NoiseBudget {
    fn default() -> Self {
        Self {
            thermal: true,
            frequency_noise_asd: CALIBRATED_FREQUENCY_NOISE_ASD,
            acoustic_lines: Vec::new(),
            sensing_floor_asd: DEFAULT_SENSING_FLOOR_ASD,
            calibration_line: Self::default_calibration_line(),
        }
    }
}

/// One-sided white thermal force PSD, N^2/Hz.
pub fn thermal_force_psd(config: &ExperimentConfig, derived: &CavityDerived) -> f64 {
    4.0 * CONSTANTS.k_b * config.ambient_temperature * derived.reduced_mass * derived.mechanical_damping
}

/// Continuum (line-free) displacement PSD of each source at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SourcePsd {
    pub thermal: f64,
    pub frequency_noise: f64,
    pub sensing: f64,
}

impl SourcePsd {
    /// Motion of the mirror itself (sensing excluded).
    pub fn mirror(&self) -> f64 {
        self.thermal + self.frequency_noise
    }

    pub fn total(&self) -> f64 {
        self.thermal + self.frequency_noise + self.sensing
    }
}

/// Evaluates a budget against a plant.
#[derive(Debug, Clone)]
pub struct BudgetModel<'a> {
    pub plant: &'a Plant,
    pub budget: &'a NoiseBudget,
    force_psd: f64,
}

impl<'a> BudgetModel<'a> {
    pub fn new(plant: &'a Plant, budget: &'a NoiseBudget) -> Result<Self> {
        budget.validate()?;
        let force_psd = if budget.thermal {
            thermal_force_psd(&plant.config, &plant.derived)
        } else {
            0.0
        };
        Ok(Self {
            plant,
            budget,
            force_psd,
        })
    }

    pub fn continuum(&self, f_hz: f64) -> SourcePsd {
        let w = hz_to_rad(f_hz);
        let h = self.plant.susceptibility(w);
        let hs = self.plant.spring_transfer(w);
        SourcePsd {
            thermal: h.norm_sqr() * self.force_psd,
            frequency_noise: hs.norm_sqr() * self.budget.frequency_noise_asd.powi(2),
            sensing: self.budget.sensing_floor_asd.powi(2),
        }
    }

    /// Acoustic lines as they appear in displacement: (frequency, rms^2).
    pub fn line_powers(&self) -> Vec<(f64, f64)> {
        self.budget
            .acoustic_lines
            .iter()
            .map(|l| {
                let hs = self.plant.spring_transfer(hz_to_rad(l.frequency_hz));
                (l.frequency_hz, l.rms_amplitude.powi(2) * hs.norm_sqr())
            })
            .collect()
    }
}

/// Total displacement PSD with its per-source breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSpectrum {
    pub frequency_hz: Vec<f64>,
    pub total: Vec<f64>,
    pub thermal: Vec<f64>,
    pub frequency_noise: Vec<f64>,
    pub sensing: Vec<f64>,
    /// Acoustic lines deposited in their nearest bin as rms^2 / bin width.
    pub lines: Vec<f64>,
}

impl BudgetSpectrum {
    pub fn to_series(&self) -> SpectrumSeries {
        SpectrumSeries {
            frequency_hz: self.frequency_hz.clone(),
            psd: self.total.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
        write_meta(out, meta)?;
        writeln!(
            out,
            "frequency_hz,total_psd_m2_per_hz,thermal_psd_m2_per_hz,frequency_noise_psd_m2_per_hz,sensing_psd_m2_per_hz,lines_psd_m2_per_hz"
        )?;
        for i in 0..self.frequency_hz.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                self.frequency_hz[i],
                self.total[i],
                self.thermal[i],
                self.frequency_noise[i],
                self.sensing[i],
                self.lines[i]
            )?;
        }
        Ok(())
    }
}

fn bin_width(grid: &[f64], i: usize) -> f64 {
    match grid.len() {
        0 | 1 => 1.0,
        _ if i == 0 => grid[1] - grid[0],
        n if i == n - 1 => grid[n - 1] - grid[n - 2],
        _ => 0.5 * (grid[i + 1] - grid[i - 1]),
    }
}

pub fn displacement_psd(grid_hz: &[f64], plant: &Plant, budget: &NoiseBudget) -> Result<BudgetSpectrum> {
    check_ascending(grid_hz)?;
    plant.require_stable()?;
    let model = BudgetModel::new(plant, budget)?;
    let n = grid_hz.len();
    let mut out = BudgetSpectrum {
        frequency_hz: grid_hz.to_vec(),
        total: vec![0.0; n],
        thermal: vec![0.0; n],
        frequency_noise: vec![0.0; n],
        sensing: vec![0.0; n],
        lines: vec![0.0; n],
    };
    for (i, f) in grid_hz.iter().enumerate() {
        let s = model.continuum(*f);
        out.thermal[i] = s.thermal;
        out.frequency_noise[i] = s.frequency_noise;
        out.sensing[i] = s.sensing;
    }
    if n > 0 {
        for (f, power) in model.line_powers() {
            if f < grid_hz[0] || f > grid_hz[n - 1] {
                continue;
            }
            let i = nearest_index(grid_hz, f);
            out.lines[i] += power / bin_width(grid_hz, i);
        }
    }
    for i in 0..n {
        out.total[i] = out.thermal[i] + out.frequency_noise[i] + out.sensing[i] + out.lines[i];
    }
    Ok(out)
}

fn nearest_index(grid: &[f64], f: f64) -> usize {
    let i = grid.partition_point(|g| *g < f);
    if i == 0 {
        0
    } else if i == grid.len() || (f - grid[i - 1]) <= (grid[i] - f) {
        i - 1
    } else {
        i
    }
}

/// Synthesizes a real Gaussian stationary series whose expected one-sided
/// periodogram is `psd_at(f)`, by drawing independent complex Gaussian
/// Fourier coefficients and inverting. DC and Nyquist bins are left empty.
pub fn synthesize_with<F>(psd_at: F, duration: f64, sample_rate: f64, seed: u64) -> Result<TimeSeries>
where
    F: Fn(f64) -> f64,
{
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "sample_rate",
            reason: format!("must be > 0, got {sample_rate}"),
        });
    }
    let n = (duration * sample_rate).round();
    if !(n >= 4.0 && n <= (1u64 << 28) as f64) {
        return Err(Error::InvalidArgument {
            name: "duration",
            reason: format!("{n} samples outside the supported range [4, 2^28]"),
        });
    }
    let n = n as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let df = sample_rate / n as f64;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let scale = sample_rate * n as f64 / 4.0;
    for k in 1..n.div_ceil(2) {
        let s = psd_at(k as f64 * df);
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let sigma = (s.max(0.0) * scale).sqrt();
        let c = Complex64::new(sigma * a, sigma * b);
        spectrum[k] = c;
        spectrum[n - k] = c.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let inv_n = 1.0 / n as f64;
    let samples = spectrum.iter().map(|c| c.re * inv_n).collect();
    Ok(TimeSeries::new(sample_rate, samples))
}

/// Synthesizes a series realizing `psd`, interpolated linearly and zero
/// outside its grid.
pub fn synthesize_timeseries(psd: &SpectrumSeries, duration: f64, sample_rate: f64, seed: u64) -> Result<TimeSeries> {
    let nyquist = 0.5 * sample_rate;
    if let Some(&top) = psd.frequency_hz.last() {
        if top > nyquist * (1.0 + 1e-12) {
            return Err(Error::Aliasing {
                what: "psd grid",
                frequency_hz: top,
                nyquist_hz: nyquist,
            });
        }
    }
    synthesize_with(|f| psd.interpolate(f), duration, sample_rate, seed)
}

/// Adds a sinusoid of the given rms at `frequency_hz` with a phase drawn from
/// `seed`.
pub fn inject_calibration_line(series: &TimeSeries, frequency_hz: f64, rms_amplitude: f64, seed: u64) -> Result<TimeSeries> {
    let nyquist = 0.5 * series.sample_rate;
    if !(frequency_hz > 0.0 && frequency_hz < nyquist) {
        return Err(Error::Aliasing {
            what: "calibration line",
            frequency_hz,
            nyquist_hz: nyquist,
        });
    }
    if rms_amplitude == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let phase = rng.random_range(0.0..2.0 * PI);
    let amp = rms_amplitude * std::f64::consts::SQRT_2;
    let w = hz_to_rad(frequency_hz);
    let dt = series.dt();
    let samples = series
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| x + amp * (w * i as f64 * dt + phase).sin())
        .collect();
    Ok(TimeSeries::new(series.sample_rate, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ServoConfig;
    use crate::model::derive_cavity;
    use crate::series::linear_grid;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn thermal_force_level() {
        let c = ExperimentConfig::nominal();
        let d = derive_cavity(&c).unwrap();
        // 4 k_B 295 K * 9.96e-4 kg * 3.9998e-3 rad/s
        assert!(rel(thermal_force_psd(&c, &d), 6.490_412e-26) < 1e-6);
        let mut d2 = d;
        d2.mechanical_damping *= 2.0;
        assert!(rel(thermal_force_psd(&c, &d2), 2.0 * thermal_force_psd(&c, &d)) < 1e-15);
    }

    #[test]
    fn zero_temperature_limit() {
        let c = ExperimentConfig::nominal();
        let d = derive_cavity(&c).unwrap();
        let c0 = ExperimentConfig {
            ambient_temperature: 0.0,
            ..c
        };
        assert_eq!(thermal_force_psd(&c0, &d), 0.0);
    }

    #[test]
    fn silent_budget_is_zero() {
        let p = Plant::new(&ExperimentConfig::nominal(), ServoConfig::with_gain(900.0)).unwrap();
        let s = displacement_psd(&linear_grid(1.0, 5000.0, 200), &p, &NoiseBudget::silent()).unwrap();
        assert!(s.total.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unstable_plant_rejected() {
        let p = Plant::new(&ExperimentConfig::nominal(), ServoConfig::with_gain(0.0)).unwrap();
        assert!(matches!(
            displacement_psd(&[1000.0], &p, &NoiseBudget::default()),
            Err(Error::UnstablePlant { .. })
        ));
    }

    #[test]
    fn breakdown_sums_and_line_is_binned() {
        let p = Plant::new(&ExperimentConfig::nominal(), ServoConfig::with_gain(900.0)).unwrap();
        let mut b = NoiseBudget::default();
        b.acoustic_lines.push(SpectralLine {
            frequency_hz: 1000.1,
            rms_amplitude: 1e-16,
        });
        let grid = linear_grid(900.0, 1100.0, 801);
        let s = displacement_psd(&grid, &p, &b).unwrap();
        for i in 0..grid.len() {
            let sum = s.thermal[i] + s.frequency_noise[i] + s.sensing[i] + s.lines[i];
            assert_eq!(s.total[i], sum);
        }
        let nonzero: Vec<_> = s.lines.iter().enumerate().filter(|(_, v)| **v > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(grid[nonzero[0].0], 1000.0);
        let hs = p.spring_transfer(hz_to_rad(1000.1)).norm_sqr();
        assert!(rel(nonzero[0].1 * 0.25, 1e-32 * hs) < 1e-12);
    }

    #[test]
    fn spring_transfer_low_frequency_unity() {
        let p = Plant::new(&ExperimentConfig::nominal(), ServoConfig::with_gain(900.0)).unwrap();
        assert!((p.spring_transfer(1e-3).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn white_noise_variance() {
        let level = 2e-6;
        let fs = 4096.0;
        let ts = synthesize_with(|_| level, 64.0, fs, 11).unwrap();
        let n = ts.len() as f64;
        let expected = level * fs / 2.0 * (1.0 - 2.0 / n);
        // Sample variance of n Gaussian draws: relative std sqrt(2/n).
        let se = expected * (2.0 / n).sqrt();
        assert!((ts.variance() - expected).abs() < 3.0 * se);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let psd = SpectrumSeries::new(vec![0.0, 500.0, 1000.0], vec![1.0, 2.0, 0.5]).unwrap();
        let a = synthesize_timeseries(&psd, 1.0, 2000.0, 42).unwrap();
        let b = synthesize_timeseries(&psd, 1.0, 2000.0, 42).unwrap();
        let c = synthesize_timeseries(&psd, 1.0, 2000.0, 43).unwrap();
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.samples != c.samples);
    }

    #[test]
    fn aliasing_rejected() {
        let psd = SpectrumSeries::new(vec![0.0, 3000.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            synthesize_timeseries(&psd, 1.0, 4000.0, 0),
            Err(Error::Aliasing { .. })
        ));
        let ts = TimeSeries::new(4000.0, vec![0.0; 16]);
        assert!(matches!(
            inject_calibration_line(&ts, 2500.0, 1.0, 0),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn zero_amplitude_line_is_identity() {
        let ts = synthesize_with(|_| 1.0, 1.0, 1024.0, 3).unwrap();
        let out = inject_calibration_line(&ts, 100.0, 0.0, 9).unwrap();
        assert_eq!(out, ts);
    }

    #[test]
    fn injected_line_rms() {
        let ts = TimeSeries::new(65536.0, vec![0.0; 65536]);
        let out = inject_calibration_line(&ts, 12e3, 2.5, 1).unwrap();
        // Integer number of cycles in one second.
        assert!(rel(out.variance().sqrt(), 2.5) < 1e-9);
    }
}
