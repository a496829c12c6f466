//! Two-pole resonance fits.
//!
//! The model is `A / ((w0^2 - w^2)^2 + G^2 w^2)` in angular frequency, which
//! is the shape of both `|H|^2` and a thermally driven displacement PSD. The
//! fit minimizes squared log residuals by damped Gauss-Newton over
//! `(ln A, ln w0, ln G)`, so all three parameters stay positive and
//! multiplicative noise is weighted evenly across the peak.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::hz_to_rad;
use crate::series::TransferFunction;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-9;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    /// rad/s
    pub omega: f64,
    /// rad/s
    pub gamma: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    /// rad/s
    pub omega_eff: f64,
    /// rad/s
    pub gamma_eff: f64,
    pub amplitude: f64,
    pub omega_err: f64,
    pub gamma_err: f64,
    pub amplitude_err: f64,
    /// Euclidean norm of the log residuals.
    pub residual_norm: f64,
    pub iterations: usize,
    pub points: usize,
    /// Whether the data reach `w0 + 2G` above and `max(w0 - 2G, w0/10)`
    /// below the fitted resonance.
    pub covers_peak: bool,
}

impl LorentzianFit {
    pub fn q_eff(&self) -> f64 {
        self.omega_eff / self.gamma_eff
    }

    pub fn model(&self, omega: f64) -> f64 {
        lorentzian(omega, self.amplitude, self.omega_eff, self.gamma_eff)
    }
}

pub fn lorentzian(omega: f64, amplitude: f64, omega0: f64, gamma: f64) -> f64 {
    let a = omega0 * omega0 - omega * omega;
    amplitude / (a * a + gamma * gamma * omega * omega)
}

/// Peak location from the grid maximum and width from the half-maximum
/// crossings. A missing crossing on one side (heavily damped peaks) is
/// replaced by mirroring the other side.
pub fn initial_guess(freq_hz: &[f64], power: &[f64]) -> Result<InitialGuess> {
    let (imax, &pmax) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Unidentifiable("no data".into()))?;
    let half = 0.5 * pmax;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        for i in range {
            if power[i] <= half {
                return Some(freq_hz[i]);
            }
        }
        None
    };
    let left = crossing(&mut (0..imax).rev());
    let right = crossing(&mut (imax + 1..power.len()));
    let f0 = freq_hz[imax];
    let width_hz = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (None, Some(r)) => 2.0 * (r - f0),
        (Some(l), None) => 2.0 * (f0 - l),
        (None, None) => {
            return Err(Error::Unidentifiable(
                "no half-maximum crossing: data are flat or do not contain the peak".into(),
            ))
        }
    };
    let omega = hz_to_rad(f0);
    let gamma = hz_to_rad(width_hz);
    if !(gamma > 0.0 && omega > 0.0) {
        return Err(Error::Unidentifiable("degenerate peak".into()));
    }
    Ok(InitialGuess {
        omega,
        gamma,
        amplitude: pmax * gamma * gamma * omega * omega,
    })
}

fn residuals_and_jacobian(
    omegas: &[f64],
    log_data: &[f64],
    p: &Vector3<f64>,
    want_jacobian: bool,
) -> (f64, Matrix3<f64>, Vector3<f64>) {
    let (amp, w0, g) = (p[0].exp(), p[1].exp(), p[2].exp());
    let mut cost = 0.0;
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (w, y) in omegas.iter().zip(log_data) {
        let a = w0 * w0 - w * w;
        let d = a * a + g * g * w * w;
        let r = y - (amp.ln() - d.ln());
        cost += r * r;
        if want_jacobian {
            // dr/dp = -d(ln m)/dp
            let j = Vector3::new(-1.0, 4.0 * a * w0 * w0 / d, 2.0 * g * g * w * w / d);
            jtj += j * j.transpose();
            jtr += j * r;
        }
    }
    (cost, jtj, jtr)
}

/// Fits the two-pole magnitude model to `power` sampled at `freq_hz`.
pub fn fit_lorentzian(freq_hz: &[f64], power: &[f64], guess: Option<InitialGuess>) -> Result<LorentzianFit> {
    if freq_hz.len() != power.len() {
        return Err(Error::InvalidArgument {
            name: "power",
            reason: "length differs from frequency grid".into(),
        });
    }
    if freq_hz.len() < 4 {
        return Err(Error::Unidentifiable(format!("{} points for 3 parameters", freq_hz.len())));
    }
    if power.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Unidentifiable("data must be finite and positive".into()));
    }
    let guess = match guess {
        Some(g) => g,
        None => initial_guess(freq_hz, power)?,
    };
    let omegas: Vec<f64> = freq_hz.iter().map(|f| hz_to_rad(*f)).collect();
    let log_data: Vec<f64> = power.iter().map(|p| p.ln()).collect();

    let mut p = Vector3::new(guess.amplitude.ln(), guess.omega.ln(), guess.gamma.ln());
    // The amplitude is linear in log space: start from its optimum.
    p[0] += amplitude_offset(&omegas, &log_data, &p);

    let (mut cost, mut jtj, mut jtr) = residuals_and_jacobian(&omegas, &log_data, &p, true);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let step = jtj
            .lu()
            .solve(&(-jtr))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Unidentifiable("singular normal equations".into()))?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = p + step * scale;
            let (c, _, _) = residuals_and_jacobian(&omegas, &log_data, &trial, false);
            if c.is_finite() && c <= cost {
                accepted = Some((trial, c));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, c)) = accepted else {
            // No descent along the Gauss-Newton direction: at a minimum to
            // working precision.
            converged = step.amax() < 1e-6;
            break;
        };
        let moved = (trial - p).amax();
        p = trial;
        let rel_drop = (cost - c) / cost.max(f64::MIN_POSITIVE);
        cost = c;
        let (_, j2, r2) = residuals_and_jacobian(&omegas, &log_data, &p, true);
        jtj = j2;
        jtr = r2;
        if moved < STEP_TOLERANCE || (rel_drop < 1e-15 && moved < 1e-6) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitNonConvergence { iterations });
    }

    let n = omegas.len();
    let s2 = cost / (n - 3) as f64;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::Unidentifiable("singular covariance".into()))?
        * s2;
    let (amp, w0, g) = (p[0].exp(), p[1].exp(), p[2].exp());
    let lo = omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = omegas.iter().cloned().fold(0.0, f64::max);
    Ok(LorentzianFit {
        omega_eff: w0,
        gamma_eff: g,
        amplitude: amp,
        omega_err: w0 * cov[(1, 1)].max(0.0).sqrt(),
        gamma_err: g * cov[(2, 2)].max(0.0).sqrt(),
        amplitude_err: amp * cov[(0, 0)].max(0.0).sqrt(),
        residual_norm: cost.sqrt(),
        iterations,
        points: n,
        covers_peak: hi >= w0 + 2.0 * g && lo <= (w0 - 2.0 * g).max(w0 / 10.0),
    })
}

fn amplitude_offset(omegas: &[f64], log_data: &[f64], p: &Vector3<f64>) -> f64 {
    let (amp, w0, g) = (p[0].exp(), p[1].exp(), p[2].exp());
    let sum: f64 = omegas
        .iter()
        .zip(log_data)
        .map(|(w, y)| y - lorentzian(*w, amp, w0, g).ln())
        .sum();
    sum / omegas.len() as f64
}

/// Fits `|H|^2` of a driven response measurement.
pub fn fit_transfer_function(tf: &TransferFunction) -> Result<LorentzianFit> {
    fit_lorentzian(&tf.frequency_hz, &tf.magnitude_squared(), None)
}
