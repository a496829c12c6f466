use std::fs;
use std::path::Path;
use std::process::Command;

use optospring_cli::bundle::{read_manifest, sha256_hex, StageStatus};
use optospring_cli::scenario::{entry_dir, read_entry};
use optospring_cli::sweep::RowStatus;
use optospring_cli::{aggregate_report, run_scenario, sweep_parameter, CliError, ErrorKind, Profile, Scenario, SweepParameter};

fn quick_profile() -> Profile {
    Profile::from_toml(
        "[synthesis]\nduration_s = 8.0\n[analysis]\nsegment_length = 32768\n",
    )
    .unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optospring"))
}

#[test]
fn default_band_rms_decreases_with_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&Scenario::new(Profile::builtin(), dir.path())).unwrap();
    assert_eq!(out.entries.len(), 4);
    assert!(out.manifest.complete);
    let rms: Vec<f64> = out.entries.iter().map(|e| e.band_x_rms_m).collect();
    assert!(rms.windows(2).all(|w| w[1] < w[0]), "{rms:?}");
    let gammas: Vec<f64> = out.entries.iter().map(|e| e.mode.gamma_eff_rad_s).collect();
    assert!(gammas.windows(2).all(|w| w[1] > w[0]));
    // Common resonance across the ladder within the joint fit errors.
    let fits: Vec<_> = out.entries.iter().map(|e| &e.fits[0]).collect();
    for f in &fits[1..] {
        let joint = (f.omega_err_rad_s.powi(2) + fits[0].omega_err_rad_s.powi(2)).sqrt();
        assert!((f.omega_eff_rad_s - fits[0].omega_eff_rad_s).abs() < 4.0 * joint + 1e-9);
    }
}

#[test]
fn every_file_is_listed_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let p = quick_profile();
    let out = run_scenario(&Scenario::new(p.clone(), dir.path())).unwrap();
    let hash = p.config_hash();
    assert_eq!(out.manifest.config_hash, hash);
    for f in &out.manifest.files {
        let bytes = fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.path);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains(&hash), "{} lacks the config hash", f.path);
        assert!(text.contains(&p.seed.to_string()), "{} lacks the seed", f.path);
    }
    let psd = fs::read_to_string(dir.path().join("entry_01/psd.csv")).unwrap();
    assert!(psd.contains(&format!("# entry_seed: {}", p.seed ^ 1)));
}

#[test]
fn same_seed_reproduces_bundle_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let p = quick_profile();
    run_scenario(&Scenario::new(p.clone(), a.path())).unwrap();
    run_scenario(&Scenario::new(p.clone(), b.path())).unwrap();
    let ma = fs::read(a.path().join("MANIFEST.json")).unwrap();
    let mb = fs::read(b.path().join("MANIFEST.json")).unwrap();
    assert_eq!(ma, mb);

    let c = tempfile::tempdir().unwrap();
    let mut q = p.clone();
    q.seed += 7;
    run_scenario(&Scenario::new(q, c.path())).unwrap();
    let pa = fs::read(a.path().join("entry_00/psd.csv")).unwrap();
    let pc = fs::read(c.path().join("entry_00/psd.csv")).unwrap();
    assert_ne!(pa, pc);
}

#[test]
fn empty_ladder_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut p = quick_profile();
    p.servo.gains_rad_s.clear();
    let e = run_scenario(&Scenario::new(p, &out)).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Validation);
    assert!(!out.exists());
}

#[test]
fn ladder_must_ascend_and_be_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = quick_profile();
    p.servo.gains_rad_s = vec![900.0, 500.0];
    assert!(matches!(run_scenario(&Scenario::new(p.clone(), dir.path())), Err(CliError::Scenario(_))));
    p.servo.gains_rad_s = vec![10.0, 500.0];
    let e = run_scenario(&Scenario::new(p, dir.path())).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::Instability);
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn failed_stage_keeps_partial_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = quick_profile();
    // No calibration line: the spectra cannot be calibrated.
    p.noise.calibration_line_rms_m = 0.0;
    let e = run_scenario(&Scenario::new(p, dir.path())).unwrap_err();
    assert_eq!(e.kind(), ErrorKind::FitFailure);
    let m = read_manifest(dir.path()).unwrap();
    assert!(!m.complete);
    assert!(m.files.iter().any(|f| f.path == "scenario.toml"));
    let statuses: Vec<_> = m.stages.iter().map(|s| s.status).collect();
    assert_eq!(statuses[0], StageStatus::Ok);
    assert_eq!(*statuses.last().unwrap(), StageStatus::Skipped);
    assert!(statuses.contains(&StageStatus::Failed));
}

#[test]
fn report_refuses_mismatched_hash() {
    let dir = tempfile::tempdir().unwrap();
    let p = quick_profile();
    let out = run_scenario(&Scenario::new(p.clone(), dir.path())).unwrap();
    let again = aggregate_report(dir.path()).unwrap();
    assert_eq!(again.cooling_factor, out.report.cooling_factor);

    let path = dir.path().join(entry_dir(2)).join("summary.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replace(&p.config_hash(), &"0".repeat(64))).unwrap();
    assert!(matches!(read_entry(dir.path(), 2, &p.config_hash()), Err(CliError::HashMismatch { .. })));
    assert!(matches!(aggregate_report(dir.path()), Err(CliError::HashMismatch { .. })));
}

#[test]
fn power_sweep_scales_as_sqrt() {
    let p = Profile::builtin();
    let powers = [0.02, 0.04, 0.08, 0.16];
    let rows = sweep_parameter(&p, SweepParameter::InputPower, &powers).unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| (r.value.ln(), r.mode.unwrap().omega_eff_rad_s.ln()))
        .unzip();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() < 0.01, "{slope}");
}

#[test]
fn coupling_sweep_locates_measured_resonance() {
    let mut p = Profile::builtin();
    p.experiment.coupling_efficiency = 1.0;
    let values: Vec<f64> = (0..=40).map(|i| 0.5 + 0.005 * i as f64).collect();
    let rows = sweep_parameter(&p, SweepParameter::CouplingEfficiency, &values).unwrap();
    let target = 2.0 * std::f64::consts::PI * 1018.0;
    let w: Vec<f64> = rows.iter().map(|r| r.mode.unwrap().omega_eff_rad_s).collect();
    let i = w.windows(2).position(|p| p[0] <= target && p[1] > target).unwrap();
    let eta = values[i] + (target - w[i]) / (w[i + 1] - w[i]) * (values[i + 1] - values[i]);
    assert!((eta - 0.65).abs() < 0.01, "{eta}");
}

#[test]
fn gain_sweep_reports_unstable_rows() {
    let p = Profile::builtin();
    let rows = sweep_parameter(&p, SweepParameter::ServoGain, &[0.0, 50.0, 200.0, 2000.0]).unwrap();
    assert_eq!(rows[0].status, RowStatus::DynamicallyUnstable);
    assert_eq!(rows[3].status, RowStatus::Stable);
    let t: Vec<f64> = rows.iter().filter_map(|r| r.mode.map(|m| m.t_eff_k)).collect();
    assert!(t.windows(2).all(|w| w[1] < w[0]));
}

fn write_quick_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("quick.toml");
    fs::write(
        &path,
        "seed = 3\n[synthesis]\nduration_s = 4.0\n[analysis]\nsegment_length = 32768\n",
    )
    .unwrap();
    path
}

#[test]
fn binary_exit_codes_and_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());

    let ok = dir.path().join("ok");
    let s = bin().arg("--config").arg(&cfg).arg("--out").arg(&ok).arg("--gains").arg("2000,6000").status().unwrap();
    assert_eq!(s.code(), Some(0));
    assert!(read_manifest(&ok).unwrap().complete);

    let bad = dir.path().join("validation");
    let s = bin().arg("--config").arg(&cfg).arg("--out").arg(&bad).arg("--gains").arg("").status().unwrap();
    assert_eq!(s.code(), Some(2));
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(bad.join("error.json")).unwrap()).unwrap();
    assert_eq!(record["kind"], "validation");
    assert_eq!(record["exit_code"], 2);

    let unstable = dir.path().join("unstable");
    let s = bin().arg("--config").arg(&cfg).arg("--out").arg(&unstable).arg("--gains").arg("0").status().unwrap();
    assert_eq!(s.code(), Some(3));

    let fit = dir.path().join("fit");
    let nocal = dir.path().join("nocal.toml");
    fs::write(&nocal, "[noise]\ncalibration_line_rms_m = 0.0\n[synthesis]\nduration_s = 4.0\n[analysis]\nsegment_length = 32768\n").unwrap();
    let s = bin().arg("--config").arg(&nocal).arg("--out").arg(&fit).arg("--gains").arg("6000").status().unwrap();
    assert_eq!(s.code(), Some(4));
    assert!(!read_manifest(&fit).unwrap().complete);

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let s = bin().arg("--config").arg(&cfg).arg("--out").arg(blocker.join("sub")).status().unwrap();
    assert_eq!(s.code(), Some(5));

    let s = bin().arg("--out").arg(dir.path().join("sw")).arg("--sweep").arg("mirror_mass=1").status().unwrap();
    assert_eq!(s.code(), Some(2));
}

#[test]
fn binary_band_sweep_and_exact_spring_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path());
    let out = dir.path().join("band");
    let s = bin()
        .arg("--config").arg(&cfg)
        .arg("--out").arg(&out)
        .args(["--gains", "6000", "--band", "900,1050", "--exact-spring", "--seed", "11"])
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(0));
    let e = read_entry(&out, 0, &read_manifest(&out).unwrap().config_hash).unwrap();
    assert!(e.band_lo_hz >= 900.0 && e.band_hi_hz <= 1050.0);
    assert_eq!(e.entry_seed, 11);
    let toml = fs::read_to_string(out.join("scenario.toml")).unwrap();
    assert!(toml.contains("exact_spring = true"));

    let sw = dir.path().join("sweep");
    let s = bin().arg("--out").arg(&sw).args(["--sweep", "detuning_over_gamma=-0.2,0,0.5"]).status().unwrap();
    assert_eq!(s.code(), Some(0));
    let csv = fs::read_to_string(sw.join("sweep.csv")).unwrap();
    assert!(csv.contains("statically_unstable"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
}
