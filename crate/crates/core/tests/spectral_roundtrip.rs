use optospring::noise::{inject_calibration_line, synthesize_with};
use optospring::pipeline::SynthesisParams;
use optospring::spectral::{calibrate_spectrum, estimate_psd};
use optospring::{measure, AnalysisParams, ExperimentConfig, NoiseBudget, Plant, ServoConfig, TimeSeries, Window};

fn shaped(f: f64) -> f64 {
    1e-30 * (1.0 + 100.0 / f) + 4e-30 / (1.0 + (f / 800.0).powi(4))
}

#[test]
fn welch_recovers_synthesized_shape_per_half_decade() {
    let series = synthesize_with(shaped, 64.0, 8192.0, 11).unwrap();
    let est = estimate_psd(&series, 8192, 0.5, Window::Hann).unwrap();
    let mut lo = 10.0_f64;
    while lo * 10f64.sqrt() <= 3000.0 {
        let hi = lo * 10f64.sqrt();
        let (f, p) = est.slice(lo, hi);
        let ratio = p.iter().zip(&f).map(|(p, f)| p / shaped(*f)).sum::<f64>() / f.len() as f64;
        assert!((ratio - 1.0).abs() < 0.10, "[{lo:.0}, {hi:.0}] Hz: ratio {ratio}");
        lo = hi;
    }
}

#[test]
fn variance_matches_integrated_psd() {
    let s0 = 2.5e-28;
    let fs = 4096.0;
    let expected = s0 * fs / 2.0;
    let mean = (0..8)
        .map(|seed| synthesize_with(|_| s0, 16.0, fs, seed).unwrap().variance())
        .sum::<f64>()
        / 8.0;
    assert!((mean / expected - 1.0).abs() < 0.01, "{mean:e} vs {expected:e}");
}

#[test]
fn injected_line_carries_its_rms() {
    let quiet = TimeSeries::new(16384.0, vec![0.0; 16384 * 8]);
    for (f, rms) in [(12e3 / 4.0, 1e-15), (1234.5, 3e-12)] {
        let s = inject_calibration_line(&quiet, f, rms, 3).unwrap();
        let ms = s.samples.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        assert!((ms.sqrt() / rms - 1.0).abs() < 1e-3, "{f} Hz");
    }
}

#[test]
fn calibration_undoes_readout_gain() {
    let base = synthesize_with(|_| 1e-30, 16.0, 32768.0, 5).unwrap();
    let base = inject_calibration_line(&base, 12e3, 1e-13, 6).unwrap();
    let a = estimate_psd(&base, 16384, 0.5, Window::Hann).unwrap();
    let b = estimate_psd(&base.scaled(3.7e8), 16384, 0.5, Window::Hann).unwrap();
    let ca = calibrate_spectrum(&a, 12e3, 1e-13).unwrap();
    let cb = calibrate_spectrum(&b, 12e3, 1e-13).unwrap();
    for (x, y) in ca.psd.iter().zip(&cb.psd) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300));
    }
    let ratio = ca.calibration_scale / cb.calibration_scale;
    assert!((ratio / (3.7e8f64 * 3.7e8) - 1.0).abs() < 1e-9);
}

#[test]
fn measured_band_rms_falls_with_servo_gain() {
    let config = ExperimentConfig::calibrated();
    let synth = SynthesisParams {
        duration: 8.0,
        ..SynthesisParams::default()
    };
    let analysis = AnalysisParams::default();
    let budget = NoiseBudget::default();
    let rms: Vec<f64> = [428.978, 908.7, 2241.259, 5923.967]
        .iter()
        .map(|g| {
            let plant = Plant::new(&config, ServoConfig::with_gain(*g)).unwrap();
            measure(&plant, &budget, &synth, &analysis, 77).unwrap().band.x_rms
        })
        .collect();
    assert!(rms.windows(2).all(|w| w[1] < w[0]), "{rms:?}");
}
