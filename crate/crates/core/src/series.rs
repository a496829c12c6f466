//! Gridded datasets shared by the simulation and analysis stages, and their
//! CSV form.
//!
//! Every CSV starts with `# key: value` metadata lines, followed by one
//! header row naming the columns with units, then one row per sample.
//! Floats are written in shortest round-trip scientific notation so that
//! identical inputs give byte-identical files.

use std::io::{self, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex force-to-displacement response sampled on an ascending grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    /// Hz, strictly increasing.
    pub frequency_hz: Vec<f64>,
    /// m/N
    pub response: Vec<Complex64>,
}

impl TransferFunction {
    pub fn magnitude_squared(&self) -> Vec<f64> {
        self.response.iter().map(|h| h.norm_sqr()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
        write_meta(out, meta)?;
        writeln!(out, "frequency_hz,real_m_per_n,imag_m_per_n")?;
        for (f, h) in self.frequency_hz.iter().zip(&self.response) {
            writeln!(out, "{:e},{:e},{:e}", f, h.re, h.im)?;
        }
        Ok(())
    }
}

/// Uniformly sampled real series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Hz
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|x| x * gain).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
        write_meta(out, meta)?;
        writeln!(out, "time_s,displacement_m")?;
        for (i, x) in self.samples.iter().enumerate() {
            writeln!(out, "{:e},{:e}", self.time(i), x)?;
        }
        Ok(())
    }
}

/// One-sided PSD (units^2/Hz) on an ascending frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub frequency_hz: Vec<f64>,
    pub psd: Vec<f64>,
}

impl SpectrumSeries {
    pub fn new(frequency_hz: Vec<f64>, psd: Vec<f64>) -> Result<Self> {
        if frequency_hz.len() != psd.len() {
            return Err(Error::InvalidArgument {
                name: "psd",
                reason: format!("{} values for {} grid points", psd.len(), frequency_hz.len()),
            });
        }
        check_ascending(&frequency_hz)?;
        if let Some(bad) = psd.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidArgument {
                name: "psd",
                reason: format!("values must be finite and >= 0, found {bad}"),
            });
        }
        Ok(Self { frequency_hz, psd })
    }

    /// Linear interpolation; zero outside the grid.
    pub fn interpolate(&self, f: f64) -> f64 {
        let grid = &self.frequency_hz;
        if grid.is_empty() || f < grid[0] || f > grid[grid.len() - 1] {
            return 0.0;
        }
        let i = grid.partition_point(|g| *g <= f);
        if i == 0 {
            return self.psd[0];
        }
        if i == grid.len() {
            return self.psd[grid.len() - 1];
        }
        let (f0, f1) = (grid[i - 1], grid[i]);
        let t = (f - f0) / (f1 - f0);
        self.psd[i - 1] * (1.0 - t) + self.psd[i] * t
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.frequency_hz, &self.psd)
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

pub(crate) fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|f| !f.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument {
            name: "frequency_grid",
            reason: "must be finite and strictly increasing".into(),
        });
    }
    Ok(())
}

pub fn write_meta<W: Write>(out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}")?;
    }
    Ok(())
}

/// `n` points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
