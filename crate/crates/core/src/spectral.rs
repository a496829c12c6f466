//! Segment-averaged periodogram (Welch) estimation, calibration against an
//! injected line, and band-limited RMS.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::series::{trapezoid, write_meta, SpectrumSeries, TimeSeries};

/// Bins on each side of the line centre that are summed as line power.
const LINE_HALF_WIDTH: usize = 5;
/// Local noise reference: bins between these offsets on either side.
const FLOOR_INNER: usize = 10;
const FLOOR_OUTER: usize = 40;
pub const MIN_LINE_PROMINENCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    /// Periodic Hann.
    Hann,
}

impl Window {
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let s = (std::f64::consts::PI * i as f64 / n as f64).sin();
                    s * s
                })
                .collect(),
        }
    }

    /// Equivalent noise bandwidth in bins.
    pub fn enbw_bins(&self, n: usize) -> f64 {
        let w = self.coefficients(n);
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        n as f64 * s2 / (s1 * s1)
    }
}

/// Smallest segment length whose window-corrected resolution bandwidth is
/// at most `max_rbw_hz`.
pub fn segment_length_for_rbw(sample_rate: f64, max_rbw_hz: f64, window: Window) -> usize {
    let enbw = match window {
        Window::Rectangular => 1.0,
        Window::Hann => 1.5,
    };
    (enbw * sample_rate / max_rbw_hz).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequency_hz: Vec<f64>,
    /// One-sided, units^2/Hz.
    pub psd: Vec<f64>,
    pub segment_count: usize,
    /// Window-corrected resolution bandwidth, Hz.
    pub rbw_hz: f64,
    /// Product of every calibration factor applied so far.
    pub calibration_scale: f64,
    pub seed: Option<u64>,
}

impl PsdEstimate {
    pub fn bin_spacing(&self) -> f64 {
        self.frequency_hz[1] - self.frequency_hz[0]
    }

    pub fn to_series(&self) -> SpectrumSeries {
        SpectrumSeries {
            frequency_hz: self.frequency_hz.clone(),
            psd: self.psd.clone(),
        }
    }

    /// Restriction to `[lo, hi]` Hz.
    pub fn slice(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.frequency_hz
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, p)| (*f, *p))
            .unzip()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
        let mut all = vec![
            ("segment_count", self.segment_count.to_string()),
            ("rbw_hz", format!("{:e}", self.rbw_hz)),
            ("calibration_scale", format!("{:e}", self.calibration_scale)),
            (
                "seed",
                self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
        ];
        all.extend(meta.iter().cloned());
        write_meta(out, &all)?;
        writeln!(out, "frequency_hz,total_psd_m2_per_hz")?;
        for (f, p) in self.frequency_hz.iter().zip(&self.psd) {
            writeln!(out, "{f:e},{p:e}")?;
        }
        Ok(())
    }
}

/// Welch estimate: mean-removed, windowed segments advanced by
/// `(1 - overlap) * segment_length`, with density scaling so that the
/// integral of the estimate equals the variance.
pub fn estimate_psd(series: &TimeSeries, segment_length: usize, overlap: f64, window: Window) -> Result<PsdEstimate> {
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::InvalidArgument {
            name: "overlap",
            reason: format!("must lie in [0, 0.9], got {overlap}"),
        });
    }
    if segment_length < 8 || series.len() < segment_length {
        return Err(Error::TooShort {
            len: series.len(),
            needed: segment_length.max(8),
        });
    }
    let n = segment_length;
    let step = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let count = (series.len() - n) / step + 1;
    let w = window.coefficients(n);
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let fs = series.sample_rate;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bins = n / 2 + 1;

    let periodograms: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|seg| {
            let chunk = &series.samples[seg * step..seg * step + n];
            let mean = chunk.iter().sum::<f64>() / n as f64;
            let mut buf: Vec<Complex64> = chunk
                .iter()
                .zip(&w)
                .map(|(x, wi)| Complex64::new((x - mean) * wi, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();

    let mut acc = vec![0.0; bins];
    for p in &periodograms {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let base = 1.0 / (fs * s2 * count as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            v * base * one_sided
        })
        .collect();
    let frequency_hz = (0..bins).map(|k| k as f64 * fs / n as f64).collect();
    Ok(PsdEstimate {
        frequency_hz,
        psd,
        segment_count: count,
        rbw_hz: n as f64 * s2 / (s1 * s1) * fs / n as f64,
        calibration_scale: 1.0,
        seed: None,
    })
}

/// Integrated power of the line nearest `frequency_hz`, above the local
/// floor, and its prominence (peak over floor median).
pub fn line_power(est: &PsdEstimate, frequency_hz: f64) -> Result<(f64, f64)> {
    let df = est.bin_spacing();
    let centre = (frequency_hz / df).round() as usize;
    let n = est.psd.len();
    if centre < FLOOR_OUTER || centre + FLOOR_OUTER >= n {
        return Err(Error::BandOutOfRange {
            lo: frequency_hz,
            hi: frequency_hz,
            grid_lo: est.frequency_hz[0] + FLOOR_OUTER as f64 * df,
            grid_hi: est.frequency_hz[n - 1] - FLOOR_OUTER as f64 * df,
        });
    }
    let mut floor: Vec<f64> = (FLOOR_INNER..=FLOOR_OUTER)
        .flat_map(|o| [est.psd[centre - o], est.psd[centre + o]])
        .collect();
    floor.sort_by(|a, b| a.total_cmp(b));
    let median = 0.5 * (floor[floor.len() / 2 - 1] + floor[floor.len() / 2]);
    let cluster = &est.psd[centre - LINE_HALF_WIDTH..=centre + LINE_HALF_WIDTH];
    let peak = cluster.iter().cloned().fold(0.0, f64::max);
    let prominence = if median > 0.0 { peak / median } else { f64::INFINITY };
    let power = cluster.iter().map(|p| (p - median) * df).sum::<f64>();
    Ok((power, prominence))
}

/// Rescales the whole estimate so that the line at `frequency_hz` carries
/// `known_rms^2`.
pub fn calibrate_spectrum(raw: &PsdEstimate, frequency_hz: f64, known_rms: f64) -> Result<PsdEstimate> {
    let (power, prominence) = line_power(raw, frequency_hz)?;
    if prominence < MIN_LINE_PROMINENCE || power <= 0.0 {
        return Err(Error::LineNotFound {
            frequency_hz,
            prominence,
            required: MIN_LINE_PROMINENCE,
        });
    }
    let scale = known_rms * known_rms / power;
    Ok(PsdEstimate {
        psd: raw.psd.iter().map(|p| p * scale).collect(),
        calibration_scale: raw.calibration_scale * scale,
        ..raw.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRms {
    /// m rms within the band.
    pub x_rms: f64,
    /// First and last grid points actually integrated, Hz.
    pub f_lo: f64,
    pub f_hi: f64,
    pub bins: usize,
}

/// Square root of the trapezoidal integral over the grid points inside
/// `[f_lo, f_hi]`.
pub fn band_rms(spectrum: &SpectrumSeries, f_lo: f64, f_hi: f64) -> Result<BandRms> {
    let grid = &spectrum.frequency_hz;
    let out_of_range = || Error::BandOutOfRange {
        lo: f_lo,
        hi: f_hi,
        grid_lo: grid.first().copied().unwrap_or(f64::NAN),
        grid_hi: grid.last().copied().unwrap_or(f64::NAN),
    };
    if grid.is_empty() || !(f_lo < f_hi) || f_lo < grid[0] || f_hi > grid[grid.len() - 1] {
        return Err(out_of_range());
    }
    let start = grid.partition_point(|g| *g < f_lo);
    let end = grid.partition_point(|g| *g <= f_hi);
    if end < start + 2 {
        return Err(out_of_range());
    }
    let power = trapezoid(&grid[start..end], &spectrum.psd[start..end]);
    Ok(BandRms {
        x_rms: power.max(0.0).sqrt(),
        f_lo: grid[start],
        f_hi: grid[end - 1],
        bins: end - start,
    })
}
