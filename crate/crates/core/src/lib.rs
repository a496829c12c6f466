//! Simulation and inference for a suspended mirror held by the optical
//! spring of a detuned cavity and cooled by feedback damping.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`model`]: apparatus configuration and derived cavity quantities;
//! * [`spring`]: optical spring constant, anti-damping and the shifted
//!   resonance;
//! * [`dynamics`]: closed-loop susceptibility, stability and ringdowns;
//! * [`noise`]: noise budget, displacement spectra and seeded synthesis;
//! * [`spectral`]: Welch estimation, line calibration and band RMS;
//! * [`fit`] and [`inference`]: resonance fits, effective temperature and
//!   lifetime metrics.

pub mod dynamics;
pub mod error;
pub mod fit;
pub mod inference;
pub mod model;
pub mod noise;
pub mod pipeline;
pub mod quadrature;
pub mod series;
pub mod spectral;
pub mod spring;

pub use dynamics::{Plant, RingdownFit, ServoConfig, StabilityReport};
pub use error::{Error, Result, Violation};
pub use fit::{fit_lorentzian, fit_transfer_function, LorentzianFit};
pub use inference::{cooling_report, CoolingReport, ModeSummary, Resonance};
pub use model::{derive_cavity, hz_to_rad, rad_to_hz, CavityDerived, ExperimentConfig, PhysicalConstants, CONSTANTS};
pub use noise::{NoiseBudget, SpectralLine};
pub use pipeline::{measure, AnalysisParams, FitSource, Measurement, SynthesisParams};
pub use series::{SpectrumSeries, TimeSeries, TransferFunction};
pub use spectral::{BandRms, PsdEstimate, Window};
pub use spring::{SpringResponse, SpringSummary};
