//! Closed-loop mechanical response: optical spring, mechanical damping and
//! servo cold damping acting on the cavity length.
//!
//! By default the optical coefficients are frozen at their values on
//! resonance (two-pole model). [`Plant::exact_spring`] switches to per-bin
//! evaluation of the full frequency-dependent spring.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{derive_cavity, hz_to_rad, rad_to_hz, CavityDerived, ExperimentConfig};
use crate::series::{check_ascending, TimeSeries, TransferFunction};
use crate::spring::{effective_resonance, spring_response, SpringSummary};

/// Viscous damping added by the analog laser-frequency feedback path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoConfig {
    /// rad/s
    pub damping_gain: f64,
    /// Upper edge of the slow digital lock path, Hz. Not modeled in the
    /// measurement band.
    pub lock_crossover_hz: f64,
    pub enabled: bool,
}

impl ServoConfig {
    pub fn with_gain(damping_gain: f64) -> Self {
        Self {
            damping_gain,
            ..Self::default()
        }
    }

    pub fn off() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn applied_damping(&self) -> f64 {
        if self.enabled {
            self.damping_gain
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping_gain.is_finite() && self.damping_gain >= 0.0) {
            return Err(Error::InvalidArgument {
                name: "damping_gain",
                reason: format!("must be finite and >= 0, got {}", self.damping_gain),
            });
        }
        Ok(())
    }
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            damping_gain: 0.0,
            lock_crossover_hz: 10.0,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// Gamma_M - Gamma_opt + Gamma_servo, rad/s.
    pub net_damping: f64,
    pub stable: bool,
    /// Amplitude envelope rate, 1/s: positive for decay, negative for growth.
    pub decay_rate: f64,
}

impl StabilityReport {
    /// Envelope growth rate of an unstable mode, 1/s (zero when stable).
    pub fn growth_rate(&self) -> f64 {
        if self.stable {
            0.0
        } else {
            -self.decay_rate
        }
    }
}

/// The oscillator mode in one operating configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub config: ExperimentConfig,
    pub derived: CavityDerived,
    pub spring: SpringSummary,
    pub servo: ServoConfig,
    pub exact_spring: bool,
}

impl Plant {
    pub fn new(config: &ExperimentConfig, servo: ServoConfig) -> Result<Self> {
        servo.validate()?;
        let derived = derive_cavity(config)?;
        let spring = effective_resonance(config, &derived)?;
        Ok(Self {
            config: config.clone(),
            derived,
            spring,
            servo,
            exact_spring: false,
        })
    }

    pub fn with_exact_spring(mut self, exact: bool) -> Self {
        self.exact_spring = exact;
        self
    }

    pub fn mass(&self) -> f64 {
        self.derived.reduced_mass
    }

    pub fn omega_eff(&self) -> f64 {
        self.spring.omega_eff
    }

    pub fn mechanical_damping(&self) -> f64 {
        self.derived.mechanical_damping
    }

    pub fn net_damping(&self) -> f64 {
        self.derived.mechanical_damping - self.spring.optical_antidamping + self.servo.applied_damping()
    }

    pub fn q_eff(&self) -> f64 {
        self.omega_eff() / self.net_damping()
    }

    /// Servo damping (rad/s) that brings the net quality factor to `q`.
    pub fn gain_for_q(&self, q: f64) -> Result<f64> {
        let gain = self.omega_eff() / q - self.derived.mechanical_damping + self.spring.optical_antidamping;
        if !(q > 0.0 && gain.is_finite() && gain >= 0.0) {
            return Err(Error::InvalidArgument {
                name: "q",
                reason: format!("Q = {q} not reachable with non-negative servo damping"),
            });
        }
        Ok(gain)
    }

    /// M Omega_eff^2, N/m.
    pub fn total_stiffness(&self) -> f64 {
        self.mass() * self.omega_eff() * self.omega_eff()
    }

    pub fn stability(&self) -> StabilityReport {
        let net = self.net_damping();
        StabilityReport {
            net_damping: net,
            stable: net > 0.0,
            decay_rate: net / 2.0,
        }
    }

    pub fn require_stable(&self) -> Result<()> {
        let s = self.stability();
        if s.stable {
            Ok(())
        } else {
            Err(Error::UnstablePlant {
                net_damping: s.net_damping,
                growth_rate: s.growth_rate(),
            })
        }
    }

    /// Stiffness seen at `omega`: MOmega_M^2 + K, N/m.
    fn stiffness_at(&self, omega: f64) -> f64 {
        if self.exact_spring {
            let k = spring_response(omega, &self.config, &self.derived).spring_constant;
            self.mass() * self.config.free_resonance.powi(2) + k
        } else {
            self.total_stiffness()
        }
    }

    fn damping_at(&self, omega: f64) -> f64 {
        if self.exact_spring {
            let g = spring_response(omega, &self.config, &self.derived).damping_coefficient;
            self.derived.mechanical_damping - g + self.servo.applied_damping()
        } else {
            self.net_damping()
        }
    }

    /// Displacement per unit force, m/N, at angular frequency `omega`.
    pub fn susceptibility(&self, omega: f64) -> Complex64 {
        let m = self.mass();
        let denom = Complex64::new(
            self.stiffness_at(omega) - m * omega * omega,
            m * self.damping_at(omega) * omega,
        );
        denom.inv()
    }

    /// Dimensionless response of mirror motion to a cavity-length-equivalent
    /// drive acting through the spring; tends to 1 well below resonance.
    pub fn spring_transfer(&self, omega: f64) -> Complex64 {
        self.susceptibility(omega) * self.stiffness_at(omega)
    }
}

pub fn closed_loop_susceptibility(
    omega: f64,
    spring: &SpringSummary,
    servo: &ServoConfig,
    config: &ExperimentConfig,
) -> Result<Complex64> {
    let derived = derive_cavity(config)?;
    let plant = Plant {
        config: config.clone(),
        derived,
        spring: *spring,
        servo: *servo,
        exact_spring: false,
    };
    Ok(plant.susceptibility(omega))
}

pub fn assess_stability(spring: &SpringSummary, servo: &ServoConfig, config: &ExperimentConfig) -> Result<StabilityReport> {
    let derived = derive_cavity(config)?;
    let net = derived.mechanical_damping - spring.optical_antidamping + servo.applied_damping();
    Ok(StabilityReport {
        net_damping: net,
        stable: net > 0.0,
        decay_rate: net / 2.0,
    })
}

/// Samples the closed-loop response on `grid_hz`. An unstable plant is
/// refused unless `force` is set.
pub fn force_response_sweep(plant: &Plant, grid_hz: &[f64], force: bool) -> Result<TransferFunction> {
    check_ascending(grid_hz)?;
    if !force {
        plant.require_stable()?;
    }
    let response: Vec<Complex64> = grid_hz
        .iter()
        .map(|f| plant.susceptibility(hz_to_rad(*f)))
        .collect();
    if response.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
        return Err(Error::InvalidArgument {
            name: "frequency_grid",
            reason: "response not finite on the grid".into(),
        });
    }
    Ok(TransferFunction {
        frequency_hz: grid_hz.to_vec(),
        response,
    })
}

/// Free evolution of the mode from `(x0, 0)` with a classical RK4 step.
pub fn time_domain_ringdown(plant: &Plant, duration: f64, dt: f64, x0: f64) -> Result<TimeSeries> {
    let f_eff = rad_to_hz(plant.omega_eff());
    let max_dt = 1.0 / (20.0 * f_eff);
    if !(dt > 0.0 && dt <= max_dt) {
        return Err(Error::StepTooCoarse { dt, max_dt });
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "duration",
            reason: format!("must be > 0, got {duration}"),
        });
    }
    let w2 = plant.omega_eff() * plant.omega_eff();
    let g = plant.net_damping();
    let accel = |x: f64, v: f64| -w2 * x - g * v;

    let steps = (duration / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (x0, 0.0);
    samples.push(x);
    for _ in 0..steps {
        let (k1x, k1v) = (v, accel(x, v));
        let (k2x, k2v) = (v + 0.5 * dt * k1v, accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v));
        let (k3x, k3v) = (v + 0.5 * dt * k2v, accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v));
        let (k4x, k4v) = (v + dt * k3v, accel(x + dt * k3x, v + dt * k3v));
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        samples.push(x);
    }
    Ok(TimeSeries::new(1.0 / dt, samples))
}

/// Envelope parameters recovered from a ringdown record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingdownFit {
    /// Slope of the log envelope, 1/s. Negative when the motion decays.
    pub envelope_rate: f64,
    /// Damped oscillation frequency, rad/s.
    pub damped_frequency: f64,
    /// Undamped resonance, rad/s.
    pub natural_frequency: f64,
    /// `natural_frequency / net damping`; infinite for a growing envelope.
    pub quality_factor: f64,
    pub peaks: usize,
}

impl RingdownFit {
    /// Net damping rate implied by the envelope, rad/s.
    pub fn net_damping(&self) -> f64 {
        -2.0 * self.envelope_rate
    }
}

/// Positive peaks of `series` as `(time, value)`, each refined by parabolic
/// interpolation through the neighbouring samples.
pub fn envelope_peaks(series: &TimeSeries) -> Vec<(f64, f64)> {
    let x = &series.samples;
    let dt = series.dt();
    let mut peaks = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
        if b > 0.0 && b > a && b >= c {
            let curv = a - 2.0 * b + c;
            let shift = if curv != 0.0 { 0.5 * (a - c) / curv } else { 0.0 };
            peaks.push(((i as f64 + shift) * dt, b - 0.25 * (a - c) * shift));
        }
    }
    peaks
}

/// Log-envelope regression over the positive peaks of `series`.
pub fn fit_ringdown(series: &TimeSeries) -> Result<RingdownFit> {
    let peaks = envelope_peaks(series);
    let times: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = peaks.iter().map(|p| p.1.ln()).collect();
    if times.len() < 3 {
        return Err(Error::TooShort {
            len: times.len(),
            needed: 3,
        });
    }
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let ml = logs.iter().sum::<f64>() / n;
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let envelope_rate = sxy / sxx;
    let period = (times[times.len() - 1] - times[0]) / (n - 1.0);
    let damped_frequency = 2.0 * std::f64::consts::PI / period;
    let natural_frequency = (damped_frequency.powi(2) + envelope_rate.powi(2)).sqrt();
    let quality_factor = if envelope_rate < 0.0 {
        natural_frequency / (-2.0 * envelope_rate)
    } else {
        f64::INFINITY
    };
    Ok(RingdownFit {
        envelope_rate,
        damped_frequency,
        natural_frequency,
        quality_factor,
        peaks: times.len(),
    })
}
